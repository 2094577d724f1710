#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "footgan/audio.hpp"
#include "footgan/classifier.hpp"

namespace footgan {

enum class ExtractorTag {
  vggish_like,
  inception_variant,
  openl3_env_mel128_512,
  log_mel_stats,  // per-band mean and std of the 64-band log-mel, no assets needed
};

std::string to_string(ExtractorTag t);
ExtractorTag extractor_from_string(const std::string& s);

struct EmbeddingSet {
  Eigen::MatrixXd vectors;  // n x d, one row per clip
  ExtractorTag extractor = ExtractorTag::log_mel_stats;
  std::string source;

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

class EmbeddingExtractor {
 public:
  virtual ~EmbeddingExtractor() = default;
  virtual ExtractorTag tag() const = 0;
  virtual int dim() const = 0;
  /// (B, T) float audio at 16 kHz -> (B, dim) embeddings.
  virtual torch::Tensor embed_batch(const torch::Tensor& audio) = 0;

  /// Rows follow clip order. Throws InvalidRate for clips not at 16 kHz.
  EmbeddingSet extract(const std::vector<AudioClip>& clips, const std::string& source, int batch_size = 64);
};

/// Built-in: concatenated per-band mean and standard deviation of the log-mel
/// spectrogram over time (2 * n_mels dims).
class LogMelStatsExtractor final : public EmbeddingExtractor {
 public:
  explicit LogMelStatsExtractor(MelConfig cfg = {});
  ExtractorTag tag() const override { return ExtractorTag::log_mel_stats; }
  int dim() const override { return 2 * cfg_.n_mels; }
  torch::Tensor embed_batch(const torch::Tensor& audio) override;

 private:
  MelConfig cfg_;
};

/// Wraps an exported TorchScript model whose forward maps (B, T) audio to
/// (B, d). The output width is checked against the tag (512 for OpenL3,
/// 128 for the VGGish-like extractor).
class TorchScriptExtractor final : public EmbeddingExtractor {
 public:
  TorchScriptExtractor(ExtractorTag tag, const std::filesystem::path& model_file);
  ~TorchScriptExtractor() override;
  ExtractorTag tag() const override { return tag_; }
  int dim() const override { return dim_; }
  torch::Tensor embed_batch(const torch::Tensor& audio) override;

 private:
  struct Impl;
  ExtractorTag tag_;
  int dim_;
  std::unique_ptr<Impl> impl_;
};

/// Penultimate (pooled) layer of the evaluation classifier.
class ClassifierExtractor final : public EmbeddingExtractor {
 public:
  explicit ClassifierExtractor(ClassifierModel model);
  ExtractorTag tag() const override { return ExtractorTag::inception_variant; }
  int dim() const override { return model_.config().embedding_dim(); }
  torch::Tensor embed_batch(const torch::Tensor& audio) override;

 private:
  ClassifierModel model_;
};

int expected_dim(ExtractorTag tag);  // -1 when the width depends on a model config

struct ExtractorAssets {
  /// Holds <tag>.pt TorchScript files. Defaults to $FOOTGAN_MODEL_DIR.
  std::optional<std::filesystem::path> model_dir;
  std::optional<ClassifierModel> classifier;

  static ExtractorAssets from_environment();
  std::filesystem::path model_file(ExtractorTag tag) const;
};

/// Throws ExtractorUnavailable when the assets for `tag` are missing.
std::unique_ptr<EmbeddingExtractor> make_extractor(ExtractorTag tag, const ExtractorAssets& assets);

}  // namespace footgan
