#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "footgan/signal_ops.hpp"
#include "json.hpp"

namespace footgan {

struct GeneratorConfig {
  int d_z = 100;
  int num_layers = 5;
  int kernel_size = 25;
  int upsample_factor = 4;
  int base_channels = 512;
  int initial_len = 8;
  int num_classes = 7;  // 0 disables conditioning
  UpsampleMode upsample_mode = UpsampleMode::zero_stuff;
  bool batch_norm = true;
  bool bias = true;

  int64_t output_len() const;
  /// Input channels of each up-conv layer followed by the output channel
  /// count: {c0, c0/2, ..., c0/2^(L-1), 1}. Conditioning channels excluded.
  std::vector<int> channel_plan() const;
  /// Feature length after each up-conv layer.
  std::vector<int64_t> layer_lengths() const;
  /// Throws Errc::InvalidConfig.
  void validate() const;

  bool operator==(const GeneratorConfig&) const = default;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct ParameterCount {
  int64_t dense = 0;
  int64_t conv = 0;
  int64_t batch_norm = 0;
  int64_t total() const { return dense + conv + batch_norm; }
};

/// Closed-form trainable parameter count for a generator built from `cfg`.
ParameterCount count_parameters(const GeneratorConfig& cfg);

struct GeneratorTrace {
  torch::Tensor output;
  std::vector<int64_t> layer_lengths;
};

/// Conditional WaveGAN generator: dense projection of z to (c0, 8), ReLU,
/// one-hot label channels appended, then `num_layers` blocks of
/// upsample x4 -> conv(k=25, stride 1) -> batch norm -> ReLU, ending in tanh.
class WaveGanGeneratorImpl : public torch::nn::Module {
 public:
  explicit WaveGanGeneratorImpl(GeneratorConfig cfg);

  /// z: (B, d_z), labels: (B, num_classes) one-hot -> (B, output_len).
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& labels);
  GeneratorTrace forward_trace(const torch::Tensor& z, const torch::Tensor& labels);

  const GeneratorConfig& config() const { return cfg_; }

 private:
  torch::Tensor up_conv(size_t layer, const torch::Tensor& x);

  GeneratorConfig cfg_;
  torch::nn::Linear dense_{nullptr};
  std::vector<torch::nn::Conv1d> convs_;
  std::vector<torch::nn::BatchNorm1d> norms_;
};
TORCH_MODULE(WaveGanGenerator);

/// Draws a (n, d_z) latent batch i.i.d. uniform in [-1, 1].
torch::Tensor sample_latent(int64_t n, int d_z, Rng& rng);

}  // namespace footgan
