#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "footgan/audio.hpp"
#include "footgan/melspec.hpp"
#include "json.hpp"

namespace footgan {

struct ClassifierConfig {
  MelConfig mel;
  int num_classes = kNumEvalClasses;
  int stem_channels = 16;
  int branch_channels = 16;  // per inception branch; block width is 4x this
  int num_blocks = 2;
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double val_fraction = 0.2;
  uint64_t seed = 0;

  int embedding_dim() const { return 4 * branch_channels; }
  bool operator==(const ClassifierConfig&) const = default;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

class ConvBnReluImpl : public torch::nn::Module {
 public:
  ConvBnReluImpl(int in_channels, int out_channels, int kernel);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
};
TORCH_MODULE(ConvBnRelu);

/// Four parallel branches (1x1; 1x1->3x3; 1x1->3x3->3x3; maxpool->1x1)
/// concatenated along channels.
class InceptionBlockImpl : public torch::nn::Module {
 public:
  InceptionBlockImpl(int in_channels, int branch_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential b1_{nullptr}, b3_{nullptr}, b5_{nullptr}, bpool_{nullptr};
};
TORCH_MODULE(InceptionBlock);

/// Compact inception-style conv net over log-mel spectrograms.
class InceptionClassifierImpl : public torch::nn::Module {
 public:
  explicit InceptionClassifierImpl(ClassifierConfig cfg);

  /// (B, n_mels, frames) log-mel -> pooled embedding (B, embedding_dim).
  torch::Tensor embed_features(const torch::Tensor& logmel);
  torch::Tensor logits_from_features(const torch::Tensor& logmel);

  /// (B, T) audio entry points.
  torch::Tensor embed(const torch::Tensor& audio);
  torch::Tensor probabilities(const torch::Tensor& audio);

  const ClassifierConfig& config() const { return cfg_; }

 private:
  ClassifierConfig cfg_;
  torch::nn::BatchNorm2d input_norm_{nullptr};
  torch::nn::Sequential stem_{nullptr};
  std::vector<InceptionBlock> blocks_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(InceptionClassifier);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct ClassifierModel {
  InceptionClassifier net{nullptr};
  std::vector<std::string> class_names;
  double validation_accuracy = 0.0;
  std::vector<EpochRecord> curve;

  const ClassifierConfig& config() const { return net->config(); }
  /// (n, num_classes) rows summing to 1, computed in eval mode.
  torch::Tensor predict_proba(const std::vector<AudioClip>& clips, int batch_size = 64) const;
  torch::Tensor embed(const std::vector<AudioClip>& clips, int batch_size = 64) const;
};

/// Stratified train/validation split, Adam on cross-entropy for cfg.epochs.
/// Throws InsufficientData with fewer than 2 classes or when any present
/// class lacks a clip for both sides of the split.
ClassifierModel train_eval_classifier(const LabeledDataset& train_set, const ClassifierConfig& cfg);

void save_classifier(const ClassifierModel& model, const std::filesystem::path& blob);
ClassifierModel load_classifier(const std::filesystem::path& blob);

/// Stacks fixed-length clips into a (n, T) float tensor.
torch::Tensor stack_clips(const std::vector<AudioClip>& clips);

}  // namespace footgan
