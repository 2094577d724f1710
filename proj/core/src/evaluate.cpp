#include "footgan/evaluate.hpp"

#include <cstdio>
#include <set>

#include "footgan/checkpoint.hpp"
#include "footgan/error.hpp"
#include "footgan/wav.hpp"

namespace footgan {
using nlohmann::json;

void to_json(json& j, const EvalConfig& c) {
  j = {{"is_samples", c.is_samples},
       {"fad_extractor", to_string(c.fad_extractor)},
       {"kid_extractor", to_string(c.kid_extractor)},
       {"mmd_extractor", to_string(c.mmd_extractor)},
       {"pca_extractor", to_string(c.pca_extractor)},
       {"pca_components", c.pca_components},
       {"batch_size", c.batch_size},
       {"kid_kernel", "(x.y/d + 1)^3, unbiased"},
       {"mmd_estimator", "2 mean l1(a,b) - mean_{i!=j} l1(a,a) - mean_{i!=j} l1(b,b)"},
       {"fad_sqrt", "symmetric eigendecomposition, negative eigenvalues clamped to 0"}};
}

void from_json(const json& j, EvalConfig& c) {
  EvalConfig d;
  c.is_samples = j.value("is_samples", d.is_samples);
  auto tag = [&](const char* key, ExtractorTag fallback) {
    return j.contains(key) ? extractor_from_string(j.at(key).get<std::string>()) : fallback;
  };
  c.fad_extractor = tag("fad_extractor", d.fad_extractor);
  c.kid_extractor = tag("kid_extractor", d.kid_extractor);
  c.mmd_extractor = tag("mmd_extractor", d.mmd_extractor);
  c.pca_extractor = tag("pca_extractor", d.pca_extractor);
  c.pca_components = j.value("pca_components", d.pca_components);
  c.batch_size = j.value("batch_size", d.batch_size);
}

SetPair make_pair_key(const std::string& a, const std::string& b) { return a <= b ? SetPair{a, b} : SetPair{b, a}; }

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  auto d = t.to(torch::kDouble).contiguous();
  if (d.dim() != 2) throw Error(Errc::ShapeMismatch, "expected a 2-D tensor");
  Eigen::MatrixXd m(d.size(0), d.size(1));
  const double* p = d.data_ptr<double>();
  for (int64_t i = 0; i < d.size(0); ++i) {
    for (int64_t j = 0; j < d.size(1); ++j) m(i, j) = p[i * d.size(1) + j];
  }
  return m;
}

MetricReport evaluate(const std::vector<ClipSet>& sets, const ClassifierModel& classifier,
                      const ExtractorAssets& assets, const EvalConfig& cfg) {
  std::map<ExtractorTag, std::unique_ptr<EmbeddingExtractor>> owned;
  std::map<ExtractorTag, EmbeddingExtractor*> view;
  ExtractorAssets with_classifier = assets;
  if (!with_classifier.classifier) with_classifier.classifier = classifier;
  for (auto tag : {cfg.fad_extractor, cfg.kid_extractor, cfg.mmd_extractor, cfg.pca_extractor}) {
    if (owned.count(tag) == 0) {
      owned[tag] = make_extractor(tag, with_classifier);
      view[tag] = owned[tag].get();
    }
  }
  return evaluate(sets, classifier, view, cfg);
}

MetricReport evaluate(const std::vector<ClipSet>& sets, const ClassifierModel& classifier,
                      const std::map<ExtractorTag, EmbeddingExtractor*>& extractors, const EvalConfig& cfg) {
  std::set<std::string> names;
  for (const auto& s : sets) {
    if (!names.insert(s.name).second) throw Error(Errc::InvalidConfig, "duplicate set name '" + s.name + "'");
  }
  MetricReport r;
  r.config = cfg;

  for (const auto& s : sets) {
    const auto n = std::min<size_t>(s.clips.size(), static_cast<size_t>(std::max(cfg.is_samples, 0)));
    if (n == 0) throw Error(Errc::InsufficientData, "set '" + s.name + "' has no clips for IS");
    std::vector<AudioClip> subset(s.clips.begin(), s.clips.begin() + static_cast<std::ptrdiff_t>(n));
    r.is_score[s.name] = inception_score(to_eigen(classifier.predict_proba(subset, cfg.batch_size)));
    r.is_count[s.name] = static_cast<int>(n);
  }

  std::map<ExtractorTag, std::vector<EmbeddingSet>> embedded;
  auto embeddings_for = [&](ExtractorTag tag) -> const std::vector<EmbeddingSet>& {
    auto it = embedded.find(tag);
    if (it != embedded.end()) return it->second;
    auto ex = extractors.find(tag);
    if (ex == extractors.end() || ex->second == nullptr) {
      throw Error(Errc::ExtractorUnavailable, "no extractor provided for " + to_string(tag));
    }
    auto& out = embedded[tag];
    for (const auto& s : sets) out.push_back(ex->second->extract(s.clips, s.name, cfg.batch_size));
    return out;
  };

  auto pairwise = [&](ExtractorTag tag, PairTable& table, double (*metric)(const EmbeddingSet&, const EmbeddingSet&)) {
    const auto& e = embeddings_for(tag);
    for (size_t i = 0; i < e.size(); ++i) {
      for (size_t j = i + 1; j < e.size(); ++j) table.set(sets[i].name, sets[j].name, metric(e[i], e[j]));
    }
  };
  pairwise(cfg.fad_extractor, r.fad, &fad);
  pairwise(cfg.kid_extractor, r.kid, &kid);
  pairwise(cfg.mmd_extractor, r.mmd, &mmd_l1);
  r.pca = pca_project(embeddings_for(cfg.pca_extractor), cfg.pca_components);
  return r;
}

json MetricReport::to_json() const {
  auto table = [](const PairTable& t) {
    json out = json::object();
    for (const auto& [key, v] : t.values()) out[key.first][key.second] = v, out[key.second][key.first] = v;
    return out;
  };
  json pca_json = {{"explained_variance_ratio", pca.explained_ratio}, {"coords", json::object()}};
  for (size_t s = 0; s < pca.sources.size(); ++s) {
    json pts = json::array();
    const auto& c = pca.coords[s];
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      json p = json::array();
      for (Eigen::Index k = 0; k < c.cols(); ++k) p.push_back(c(i, k));
      pts.push_back(p);
    }
    pca_json["coords"][pca.sources[s]] = pts;
  }
  json is_json = json::object();
  for (const auto& [name, v] : is_score) is_json[name] = {{"value", v}, {"num_samples", is_count.at(name)}};
  return {{"config", config}, {"is", is_json}, {"fad", table(fad)}, {"kid", table(kid)}, {"mmd", table(mmd)},
          {"pca", pca_json}};
}

std::string MetricReport::edge_list_csv() const {
  std::string out = "set_a,set_b,metric,value\n";
  char buf[64];
  for (const auto& [metric, table] : {std::pair{"fad", &fad}, std::pair{"kid", &kid}, std::pair{"mmd", &mmd}}) {
    for (const auto& [key, v] : table->values()) {
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      out += key.first + "," + key.second + "," + metric + "," + buf + "\n";
    }
  }
  return out;
}

void MetricReport::write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const {
  write_json_file(json_path, to_json());
  const std::string csv = edge_list_csv();
  write_file_bytes(csv_path, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
}

}  // namespace footgan
