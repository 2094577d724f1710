#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "footgan/embeddings.hpp"
#include "footgan/metrics.hpp"
#include "json.hpp"

namespace footgan {

struct EvalConfig {
  int is_samples = 3500;  // first min(n, is_samples) clips of each set
  ExtractorTag fad_extractor = ExtractorTag::vggish_like;
  ExtractorTag kid_extractor = ExtractorTag::inception_variant;
  ExtractorTag mmd_extractor = ExtractorTag::openl3_env_mel128_512;
  ExtractorTag pca_extractor = ExtractorTag::openl3_env_mel128_512;
  int pca_components = 2;
  int batch_size = 64;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

struct ClipSet {
  std::string name;
  std::vector<AudioClip> clips;
  bool generated = false;
};

/// Unordered pair of set names; stored with the names sorted.
using SetPair = std::pair<std::string, std::string>;
SetPair make_pair_key(const std::string& a, const std::string& b);

class PairTable {
 public:
  void set(const std::string& a, const std::string& b, double v) { values_[make_pair_key(a, b)] = v; }
  double at(const std::string& a, const std::string& b) const { return values_.at(make_pair_key(a, b)); }
  bool contains(const std::string& a, const std::string& b) const { return values_.count(make_pair_key(a, b)) > 0; }
  const std::map<SetPair, double>& values() const { return values_; }

 private:
  std::map<SetPair, double> values_;
};

struct MetricReport {
  EvalConfig config;
  std::map<std::string, double> is_score;
  std::map<std::string, int> is_count;
  PairTable fad, kid, mmd;
  PcaResult pca;

  nlohmann::json to_json() const;
  /// Rows "set_a,set_b,metric,value" with a header line.
  std::string edge_list_csv() const;
  void write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const;
};

/// IS per set from the classifier, pairwise FAD/KID/MMD over all sets and a
/// joint PCA. Each set's clips are embedded once per distinct extractor.
MetricReport evaluate(const std::vector<ClipSet>& sets, const ClassifierModel& classifier,
                      const ExtractorAssets& assets, const EvalConfig& cfg = {});

/// As above with caller-built extractors, keyed by tag.
MetricReport evaluate(const std::vector<ClipSet>& sets, const ClassifierModel& classifier,
                      const std::map<ExtractorTag, EmbeddingExtractor*>& extractors, const EvalConfig& cfg = {});

Eigen::MatrixXd to_eigen(const torch::Tensor& t);

}  // namespace footgan
