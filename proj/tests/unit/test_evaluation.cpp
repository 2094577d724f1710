#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <torch/script.h>

#include <fstream>
#include <sstream>

#include "footgan/checkpoint.hpp"
#include "footgan/classifier.hpp"
#include "footgan/embeddings.hpp"
#include "footgan/evaluate.hpp"
#include "footgan/metrics.hpp"
#include "test_support.hpp"

using namespace footgan;

namespace {

EmbeddingSet make_set(Eigen::MatrixXd v, std::string source = "s",
                      ExtractorTag tag = ExtractorTag::log_mel_stats) {
  EmbeddingSet e;
  e.vectors = std::move(v);
  e.extractor = tag;
  e.source = std::move(source);
  return e;
}

Eigen::MatrixXd gaussian(int n, int d, uint64_t seed, double shift = 0.0, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = shift + scale * nd(rng);
  }
  return m;
}

double kid_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double d = static_cast<double>(a.cols());
  auto k = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return std::pow(x.dot(y) / d + 1.0, 3); };
  const auto m = a.rows(), n = b.rows();
  double saa = 0, sbb = 0, sab = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) saa += k(a.row(i), a.row(j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sbb += k(b.row(i), b.row(j));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sab += k(a.row(i), b.row(j));
  return saa / (m * (m - 1.0)) + sbb / (n * (n - 1.0)) - 2.0 * sab / double(m * n);
}

double mmd_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  auto l1 = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return (x - y).cwiseAbs().sum(); };
  auto within = [&](const Eigen::MatrixXd& x) {
    if (x.rows() < 2) return 0.0;
    double s = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.rows(); ++j)
        if (i != j) s += l1(x.row(i), x.row(j));
    return s / (x.rows() * (x.rows() - 1.0));
  };
  double cross = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) cross += l1(a.row(i), b.row(j));
  cross /= double(a.rows() * b.rows());
  return 2.0 * cross - within(a) - within(b);
}

// Writes a TorchScript module mapping (B, T) audio to (B, width).
std::filesystem::path write_adapter(const std::filesystem::path& dir, ExtractorTag tag, int width) {
  torch::jit::Module m("Adapter");
  std::ostringstream src;
  src << "def forward(self, x):\n  return x[:, 0:" << width << "] * 2.0 + 1.0\n";
  m.define(src.str());
  std::filesystem::create_directories(dir);
  const auto path = dir / (to_string(tag) + ".pt");
  m.save(path.string());
  return path;
}

ClassifierConfig quick_classifier(int epochs) {
  ClassifierConfig c;
  c.epochs = epochs;
  c.stem_channels = 8;
  c.branch_channels = 8;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("inception score") {
  TEST_CASE("identical rows give 1") {
    Eigen::MatrixXd p(10, 5);
    p.rowwise() = Eigen::RowVectorXd::Constant(5, 0.2);
    CHECK(inception_score(p) == doctest::Approx(1.0));
  }

  TEST_CASE("confident and balanced predictions give the class count") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(20, 5);
    for (int i = 0; i < 20; ++i) p(i, i % 5) = 1.0;
    CHECK(inception_score(p) == doctest::Approx(5.0));
  }

  TEST_CASE("matches the direct KL formula") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Eigen::MatrixXd p(30, 4);
    for (int i = 0; i < 30; ++i) {
      for (int j = 0; j < 4; ++j) p(i, j) = u(rng);
      p.row(i) /= p.row(i).sum();
    }
    const Eigen::RowVectorXd marg = p.colwise().mean();
    double kl = 0;
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 4; ++j) kl += p(i, j) * std::log(p(i, j) / marg(j));
    CHECK(inception_score(p) == doctest::Approx(std::exp(kl / 30)).epsilon(1e-12));
  }

  TEST_CASE("rejects rows that are not distributions") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(3, 2, 0.5);
    p(1, 0) = 0.6;
    CHECK_ERRC(inception_score(p), Errc::InvalidDistribution);
    p(1, 0) = 1.5;
    p(1, 1) = -0.5;
    CHECK_ERRC(inception_score(p), Errc::InvalidDistribution);
    CHECK_ERRC(inception_score(Eigen::MatrixXd(0, 3)), Errc::InvalidDistribution);
  }
}

TEST_SUITE("frechet distance") {
  TEST_CASE("unit-shifted 1-D normals are 1 apart") {
    const auto a = make_set(gaussian(100000, 1, 1), "a");
    const auto b = make_set(gaussian(100000, 1, 2, 1.0), "b");
    CHECK(std::abs(fad(a, b) - 1.0) < 0.05);
  }

  TEST_CASE("translation adds the squared norm of the shift") {
    const Eigen::MatrixXd x = gaussian(400, 6, 5);
    Eigen::RowVectorXd v(6);
    v << 0.5, -1.0, 2.0, 0.0, 0.25, -0.75;
    const Eigen::MatrixXd y = x.rowwise() + v;
    CHECK(fad(make_set(x), make_set(y)) == doctest::Approx(v.squaredNorm()).epsilon(1e-6));
    CHECK(std::abs(fad(make_set(x), make_set(x))) < 1e-8);
  }

  TEST_CASE("closed form for diagonal covariances") {
    GaussianStats a{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 4).asDiagonal()};
    GaussianStats b{Eigen::Vector2d(1, 1), Eigen::Vector2d(4, 9).asDiagonal()};
    // |mu|^2 + sum (sqrt(s_a) - sqrt(s_b))^2 = 2 + 1 + 1
    CHECK(frechet_distance(a, b) == doctest::Approx(4.0));
    CHECK(frechet_distance(b, a) == doctest::Approx(4.0));
  }

  TEST_CASE("psd square root") {
    Eigen::Matrix2d m;
    m << 2, 1, 1, 2;
    const Eigen::MatrixXd r = psd_sqrt(m);
    CHECK((r * r - m).norm() < 1e-12);
    Eigen::Matrix2d neg;
    neg << 1, 0, 0, -1e-9;
    CHECK(psd_sqrt(neg)(1, 1) == 0.0);
  }

  TEST_CASE("errors") {
    CHECK_ERRC(fit_gaussian(Eigen::MatrixXd::Ones(1, 3)), Errc::DegenerateCovariance);
    CHECK_ERRC(fad(make_set(gaussian(5, 3, 1)), make_set(gaussian(5, 3, 2), "b", ExtractorTag::vggish_like)),
               Errc::ExtractorMismatch);
    CHECK_ERRC(fad(make_set(gaussian(5, 3, 1)), make_set(gaussian(5, 4, 2))), Errc::ExtractorMismatch);
  }
}

TEST_SUITE("kernel inception distance") {
  TEST_CASE("matches the brute-force unbiased estimator") {
    const auto a = gaussian(37, 4, 7);
    const auto b = gaussian(23, 4, 8, 0.3, 1.2);
    CHECK(kid(make_set(a), make_set(b)) == doctest::Approx(kid_oracle(a, b)).epsilon(1e-10));
    CHECK(polynomial_kernel(a.row(0), b.row(0)) == doctest::Approx(std::pow(a.row(0).dot(b.row(0)) / 4 + 1, 3)));
  }

  TEST_CASE("blockwise accumulation agrees on larger sets") {
    const auto a = gaussian(700, 3, 9);
    const auto b = gaussian(650, 3, 10, 0.1);
    CHECK(kid(make_set(a), make_set(b)) == doctest::Approx(kid_oracle(a, b)).epsilon(1e-9));
  }

  TEST_CASE("same distribution is near zero") {
    const auto a = gaussian(5000, 8, 11);
    const auto b = gaussian(5000, 8, 12);
    CHECK(std::abs(kid(make_set(a), make_set(b))) < 1e-3);
  }

  TEST_CASE("grows with the mean shift") {
    const auto a = make_set(gaussian(300, 4, 13));
    double prev = -1.0;
    for (double s : {0.25, 0.5, 1.0, 2.0}) {
      const double v = kid(a, make_set(gaussian(300, 4, 14, s)));
      CHECK(v > prev);
      prev = v;
    }
  }

  TEST_CASE("singletons are rejected") {
    CHECK_ERRC(kid(make_set(gaussian(1, 4, 1)), make_set(gaussian(5, 4, 2))), Errc::ExtractorMismatch);
  }
}

TEST_SUITE("l1 mmd") {
  TEST_CASE("single points at 0 and 1") {
    CHECK(mmd_l1(make_set(Eigen::MatrixXd::Zero(1, 1)), make_set(Eigen::MatrixXd::Ones(1, 1))) == doctest::Approx(2.0));
  }

  TEST_CASE("matches brute force and is symmetric") {
    const auto a = gaussian(19, 5, 15);
    const auto b = gaussian(31, 5, 16, 0.4);
    const double v = mmd_l1(make_set(a), make_set(b));
    CHECK(v == doctest::Approx(mmd_oracle(a, b)).epsilon(1e-10));
    CHECK(v == doctest::Approx(mmd_l1(make_set(b), make_set(a))).epsilon(1e-12));
    const auto c = gaussian(1, 5, 17);
    CHECK(mmd_l1(make_set(c), make_set(b)) == doctest::Approx(mmd_oracle(c, b)).epsilon(1e-10));
  }

  TEST_CASE("separated sets score higher than overlapping ones") {
    const auto a = make_set(gaussian(60, 3, 18));
    CHECK(mmd_l1(a, make_set(gaussian(60, 3, 19, 3.0))) > mmd_l1(a, make_set(gaussian(60, 3, 20))));
  }
}

TEST_SUITE("pca") {
  TEST_CASE("rank-one data is explained by the first component") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd;
    Eigen::VectorXd dir(6);
    dir << 1, -2, 0.5, 3, 0, 1;
    Eigen::MatrixXd x(200, 6);
    for (int i = 0; i < 200; ++i) x.row(i) = nd(rng) * dir.transpose() + 1e-3 * gaussian(1, 6, 1000 + i);
    const auto r = pca_project({make_set(x.topRows(120), "a"), make_set(x.bottomRows(80), "b")}, 2);
    CHECK(r.explained_ratio[0] >= 0.999);
    CHECK(r.explained_ratio[0] >= r.explained_ratio[1]);
    CHECK(r.coords[0].rows() == 120);
    CHECK(r.coords[1].rows() == 80);
    CHECK(r.sources == std::vector<std::string>{"a", "b"});
    const Eigen::VectorXd c0 = r.components.col(0);
    Eigen::Index arg;
    c0.cwiseAbs().maxCoeff(&arg);
    CHECK(c0(arg) > 0.0);
    CHECK(std::abs(std::abs(c0.dot(dir.normalized())) - 1.0) < 1e-4);
  }

  TEST_CASE("ratios and coordinates are rotation invariant") {
    Eigen::MatrixXd x = gaussian(150, 4, 22);
    x.col(0) *= 3.0;
    x.col(1) *= 2.0;
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(4, 4, 23)).householderQ();
    const auto r1 = pca_project({make_set(x)}, 2);
    const auto r2 = pca_project({make_set(x * q)}, 2);
    for (int k = 0; k < 2; ++k) {
      CHECK(r1.explained_ratio[k] == doctest::Approx(r2.explained_ratio[k]).epsilon(1e-9));
      CHECK((r1.coords[0].col(k).cwiseAbs() - r2.coords[0].col(k).cwiseAbs()).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("errors") {
    CHECK_ERRC(pca_project({make_set(gaussian(2, 4, 1))}, 2), Errc::InsufficientData);
    CHECK_ERRC(pca_project({make_set(Eigen::MatrixXd::Ones(10, 3))}, 2), Errc::DegenerateInput);
    CHECK_ERRC(pca_project({make_set(gaussian(5, 3, 1)), make_set(gaussian(5, 3, 2), "b", ExtractorTag::vggish_like)}),
               Errc::ExtractorMismatch);
  }
}

TEST_SUITE("extractors") {
  TEST_CASE("tags") {
    for (auto t : {ExtractorTag::vggish_like, ExtractorTag::inception_variant, ExtractorTag::openl3_env_mel128_512,
                   ExtractorTag::log_mel_stats}) {
      CHECK(extractor_from_string(to_string(t)) == t);
    }
    CHECK(to_string(ExtractorTag::openl3_env_mel128_512) == "openl3_env_mel128_512");
    CHECK_ERRC(extractor_from_string("mfcc"), Errc::InvalidConfig);
    CHECK(expected_dim(ExtractorTag::openl3_env_mel128_512) == 512);
    CHECK(expected_dim(ExtractorTag::vggish_like) == 128);
  }

  TEST_CASE("log-mel statistics") {
    LogMelStatsExtractor ex;
    std::vector<AudioClip> clips = {testing::clip_of(testing::sine(440, 16000, 8192)),
                                    testing::clip_of(std::vector<float>(8192, 0.0f)),
                                    testing::clip_of(testing::sine(440, 16000, 8192))};
    const auto e = ex.extract(clips, "x");
    CHECK(e.size() == 3);
    CHECK(e.dim() == 128);
    CHECK(e.source == "x");
    CHECK(e.vectors.allFinite());
    CHECK(e.vectors.row(0) == e.vectors.row(2));
    // Silence is constant over time: every std is zero.
    CHECK(e.vectors.row(1).tail(64).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(ex.extract(clips, "x", 1).vectors == e.vectors);

    auto resampled = clips;
    resampled[0].sample_rate = 44100;
    CHECK_ERRC(ex.extract(resampled, "x"), Errc::InvalidRate);
  }

  TEST_CASE("torchscript adapters") {
    testing::TempDir dir;
    write_adapter(dir.path(), ExtractorTag::openl3_env_mel128_512, 512);
    write_adapter(dir.path(), ExtractorTag::vggish_like, 100);
    ExtractorAssets assets;
    assets.model_dir = dir.path();
    auto ex = make_extractor(ExtractorTag::openl3_env_mel128_512, assets);
    std::vector<AudioClip> clips = {testing::clip_of(testing::sine(300, 16000, 8192)),
                                    testing::clip_of(testing::burst(8192, 0, 3))};
    const auto e = ex->extract(clips, "g");
    CHECK(e.dim() == 512);
    CHECK(e.extractor == ExtractorTag::openl3_env_mel128_512);
    CHECK(e.vectors(1, 7) == doctest::Approx(2.0 * clips[1].samples[7] + 1.0));

    auto wrong = make_extractor(ExtractorTag::vggish_like, assets);
    CHECK_ERRC(wrong->extract(clips, "g"), Errc::ExtractorMismatch);

    std::filesystem::remove(dir / "openl3_env_mel128_512.pt");
    CHECK_ERRC(make_extractor(ExtractorTag::openl3_env_mel128_512, assets), Errc::ExtractorUnavailable);
    CHECK_ERRC(make_extractor(ExtractorTag::vggish_like, ExtractorAssets{}), Errc::ExtractorUnavailable);
    CHECK_ERRC(make_extractor(ExtractorTag::inception_variant, ExtractorAssets{}), Errc::ExtractorUnavailable);
  }
}

TEST_SUITE("classifier") {
  TEST_CASE("band fixture is separable by an independent oracle") {
    const auto ds = testing::band_fixture(12, 1);
    CHECK(testing::nearest_centroid_accuracy(ds, 4) >= 0.9);
  }

  TEST_CASE("training, prediction and persistence") {
    testing::TempDir dir;
    const auto ds = testing::band_fixture(10, 2, 4096);
    const auto model = train_eval_classifier(ds, quick_classifier(3));
    CHECK(model.curve.size() == 3);
    CHECK(model.class_names == eval_class_names());
    CHECK(model.validation_accuracy == model.curve.back().validation_accuracy);

    std::vector<AudioClip> probe(ds.clips.begin(), ds.clips.begin() + 7);
    const auto p = model.predict_proba(probe, 3);
    CHECK(p.sizes() == torch::IntArrayRef{7, 5});
    CHECK((p.sum(1) - 1.0).abs().max().item<double>() < 1e-6);
    const auto emb = model.embed(probe);
    CHECK(emb.sizes() == torch::IntArrayRef{7, 32});

    save_classifier(model, dir / "clf.pt");
    const auto back = load_classifier(dir / "clf.pt");
    CHECK(back.config() == model.config());
    CHECK(torch::allclose(back.predict_proba(probe), p, 1e-6, 1e-7));
    CHECK(back.validation_accuracy == model.validation_accuracy);
    CHECK_ERRC(read_manifest(dir / "clf.pt", "generator"), Errc::IncompatibleCheckpoint);

    ClassifierExtractor ex(back);
    CHECK(ex.dim() == 32);
    CHECK(ex.extract(probe, "r").vectors.rows() == 7);
  }

  TEST_CASE("insufficient data") {
    auto ds = testing::band_fixture(4, 3, 2048);
    auto only0 = ds;
    std::erase_if(only0.clips, [](const AudioClip& c) { return *c.label != 0; });
    CHECK_ERRC(train_eval_classifier(only0, quick_classifier(1)), Errc::InsufficientData);
    auto single = ds;
    single.clips.erase(single.clips.begin() + 1, single.clips.begin() + 4);
    CHECK_ERRC(train_eval_classifier(single, quick_classifier(1)), Errc::InsufficientData);
    auto unlabeled = ds;
    unlabeled.clips[0].label.reset();
    CHECK_ERRC(train_eval_classifier(unlabeled, quick_classifier(1)), Errc::InsufficientData);
  }

  TEST_CASE("stacking requires equal lengths") {
    std::vector<AudioClip> clips = {testing::clip_of(std::vector<float>(10)), testing::clip_of(std::vector<float>(11))};
    CHECK_ERRC(stack_clips(clips), Errc::ShapeMismatch);
  }
}

TEST_CASE("evaluate produces symmetric tables and edge lists") {
  testing::TempDir dir;
  const auto fixture = testing::band_fixture(6, 4, 4096);
  const auto model = train_eval_classifier(fixture, quick_classifier(1));

  std::vector<ClipSet> sets(3);
  const char* names[] = {"real", "wave", "hifi"};
  for (int s = 0; s < 3; ++s) {
    sets[s].name = names[s];
    sets[s].generated = s > 0;
    for (int i = 0; i < 8; ++i) sets[s].clips.push_back(fixture.clips[(s * 9 + i) % fixture.clips.size()]);
  }
  LogMelStatsExtractor mel;
  EvalConfig cfg;
  cfg.is_samples = 5;
  cfg.fad_extractor = cfg.kid_extractor = cfg.mmd_extractor = cfg.pca_extractor = ExtractorTag::log_mel_stats;
  const auto r = evaluate(sets, model, {{ExtractorTag::log_mel_stats, &mel}}, cfg);

  for (const auto& s : sets) {
    CHECK(r.is_count.at(s.name) == 5);
    CHECK(r.is_score.at(s.name) >= 1.0 - 1e-9);
  }
  CHECK(r.fad.values().size() == 3);
  CHECK(r.fad.at("wave", "real") == r.fad.at("real", "wave"));
  CHECK(r.mmd.contains("hifi", "wave"));
  // Direct metric calls agree with the report.
  const auto a = mel.extract(sets[0].clips, "real");
  const auto b = mel.extract(sets[2].clips, "hifi");
  CHECK(r.kid.at("real", "hifi") == doctest::Approx(kid(a, b)).epsilon(1e-12));
  CHECK(r.pca.coords.size() == 3);

  const auto j = r.to_json();
  CHECK(j["fad"]["real"]["wave"] == j["fad"]["wave"]["real"]);
  CHECK(j["is"]["hifi"]["num_samples"] == 5);
  CHECK(j["config"]["fad_extractor"] == "log_mel_stats");
  CHECK(j["pca"]["coords"]["wave"].size() == 8);

  r.write(dir / "m.json", dir / "m.csv");
  std::ifstream csv(dir / "m.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "set_a,set_b,metric,value");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 9);

  auto dup = sets;
  dup[1].name = "real";
  CHECK_ERRC(evaluate(dup, model, {{ExtractorTag::log_mel_stats, &mel}}, cfg), Errc::InvalidConfig);
  cfg.kid_extractor = ExtractorTag::vggish_like;
  CHECK_ERRC(evaluate(sets, model, {{ExtractorTag::log_mel_stats, &mel}}, cfg), Errc::ExtractorUnavailable);
}
