#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "footgan/signal_ops.hpp"
#include "json.hpp"

namespace footgan {

/// Weight reparametrization of critic convs. `weight` is w = g * v / |v| per
/// output channel; `spectral` divides by a power-iteration estimate of the
/// largest singular value. The estimate only moves in power_iteration(), so
/// forwards are pure functions of the module state.
enum class CriticNorm { none, weight, spectral };

NLOHMANN_JSON_SERIALIZE_ENUM(CriticNorm, {{CriticNorm::none, "none"},
                                          {CriticNorm::weight, "weight"},
                                          {CriticNorm::spectral, "spectral"}})

/// Conv1d (dim 1) or Conv2d with kernel (k, 1) (dim 2) under a CriticNorm.
/// Initial effective weights equal the default torch init.
class CriticConvImpl : public torch::nn::Module {
 public:
  CriticConvImpl(int dim, int in, int out, int kernel, int stride, int padding, int groups, CriticNorm norm);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor effective_weight();
  /// One power-iteration step on the stored singular vectors (spectral only).
  void power_iteration();
  CriticNorm norm() const { return norm_; }

 private:
  int dim_, stride_, padding_, groups_;
  CriticNorm norm_;
  torch::Tensor weight_, weight_g_, bias_, u_, v_;
};
TORCH_MODULE(CriticConv);

/// Advances the spectral estimate of every CriticConv inside `critic`. The
/// trainer calls this once per critic update.
void power_iteration(torch::nn::Module& critic);

struct WaveDiscConfig {
  int num_layers = 5;
  int stride = 4;
  int kernel_size = 25;
  int base_channels = 64;
  int phase_shuffle_n = 2;
  int input_len = 8192;
  int num_classes = 7;
  double leaky_slope = 0.2;
  CriticNorm norm = CriticNorm::none;

  std::vector<int64_t> layer_lengths() const;
  void validate() const;
  bool operator==(const WaveDiscConfig&) const = default;
};

void to_json(nlohmann::json& j, const WaveDiscConfig& c);
void from_json(const nlohmann::json& j, WaveDiscConfig& c);

struct ConvSpec {
  int channels = 16;
  int kernel = 5;
  int stride = 1;
  int groups = 1;
  bool operator==(const ConvSpec&) const = default;
};

struct HiFiDiscConfig {
  std::vector<int> msd_pool_factors{1, 2, 4};
  std::vector<int> mpd_periods{2, 3, 5, 7, 11};
  double leaky_slope = 0.1;
  int num_classes = 7;
  std::vector<ConvSpec> msd_layers;
  std::vector<ConvSpec> mpd_layers;
  int post_kernel = 3;
  CriticNorm norm = CriticNorm::weight;
  /// The first scale critic (raw audio by default) uses spectral norm
  /// instead of `norm`.
  bool spectral_first_scale = true;

  /// Narrow widths sized for 8192-sample inputs on CPU (the default).
  static HiFiDiscConfig compact();
  /// Channel plan of the original vocoder discriminators.
  static HiFiDiscConfig reference();

  void validate() const;
  bool operator==(const HiFiDiscConfig&) const = default;
};

void to_json(nlohmann::json& j, const HiFiDiscConfig& c);
void from_json(const nlohmann::json& j, HiFiDiscConfig& c);

/// Output of a multi-sub-discriminator critic. For every sub-discriminator:
/// its score map, the activations of each conv layer in order (the last
/// entry is the score map itself) and the shape fed to its first layer.
struct CriticOutput {
  std::vector<torch::Tensor> scores;
  std::vector<std::vector<torch::Tensor>> features;
  std::vector<std::vector<int64_t>> input_shapes;

  void append(CriticOutput&& other);
  size_t size() const { return scores.size(); }
};

/// Conditional WaveGAN critic: 5 strided convs with LeakyReLU and phase
/// shuffle, then a dense layer to one unbounded score. No batch norm; the
/// conv weights follow cfg.norm.
class WaveGanDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit WaveGanDiscriminatorImpl(WaveDiscConfig cfg);

  /// input: (B, 1 + num_classes, L) audio with label channels already
  /// appended. Phase shuffle is applied only in training mode with an rng.
  torch::Tensor forward(const torch::Tensor& input, Rng* rng = nullptr);
  torch::Tensor forward_trace(const torch::Tensor& input, Rng* rng, std::vector<int64_t>* lengths);

  /// Convenience: (B, L) or (B, 1, L) audio plus (B, K) labels -> (B).
  torch::Tensor score(const torch::Tensor& audio, const torch::Tensor& labels, Rng* rng = nullptr);

  const WaveDiscConfig& config() const { return cfg_; }

 private:
  WaveDiscConfig cfg_;
  std::vector<CriticConv> convs_;
  torch::nn::Linear dense_{nullptr};
};
TORCH_MODULE(WaveGanDiscriminator);

class ScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  ScaleDiscriminatorImpl(const HiFiDiscConfig& cfg, int in_channels, CriticNorm norm);
  /// (B, C, T) -> score map (B, 1, T'), features per layer.
  std::pair<torch::Tensor, std::vector<torch::Tensor>> forward(const torch::Tensor& x);

 private:
  double slope_;
  std::vector<CriticConv> convs_;
  CriticConv post_{nullptr};
};
TORCH_MODULE(ScaleDiscriminator);

class PeriodDiscriminatorImpl : public torch::nn::Module {
 public:
  PeriodDiscriminatorImpl(const HiFiDiscConfig& cfg, int in_channels);
  /// (B, C, T/p, p) -> score map, features per layer.
  std::pair<torch::Tensor, std::vector<torch::Tensor>> forward(const torch::Tensor& x);

 private:
  double slope_;
  std::vector<CriticConv> convs_;
  CriticConv post_{nullptr};
};
TORCH_MODULE(PeriodDiscriminator);

/// Multi-scale plus multi-period critic pair, both conditional. Sub-
/// discriminators are ordered: scales in config order, then periods.
class HiFiDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit HiFiDiscriminatorImpl(HiFiDiscConfig cfg);

  /// audio: (B, T) or (B, 1, T), labels: (B, K).
  CriticOutput msd_forward(const torch::Tensor& audio, const torch::Tensor& labels);
  CriticOutput mpd_forward(const torch::Tensor& audio, const torch::Tensor& labels);
  CriticOutput forward(const torch::Tensor& audio, const torch::Tensor& labels);

  size_t num_sub_discriminators() const { return scales_.size() + periods_.size(); }
  const HiFiDiscConfig& config() const { return cfg_; }

 private:
  torch::Tensor augment(const torch::Tensor& audio, const torch::Tensor& labels) const;

  HiFiDiscConfig cfg_;
  std::vector<ScaleDiscriminator> scales_;
  std::vector<PeriodDiscriminator> periods_;
};
TORCH_MODULE(HiFiDiscriminator);

/// (B, T) -> (B, 1, T); (B, 1, T) passes through.
torch::Tensor as_mono_channel(const torch::Tensor& audio);

}  // namespace footgan
