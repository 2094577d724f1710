#include "footgan/generator.hpp"

#include <string>

#include "footgan/error.hpp"

namespace footgan {
namespace F = torch::nn::functional;

int64_t GeneratorConfig::output_len() const {
  int64_t len = initial_len;
  for (int i = 0; i < num_layers; ++i) len *= upsample_factor;
  return len;
}

std::vector<int> GeneratorConfig::channel_plan() const {
  std::vector<int> plan;
  int c = base_channels;
  for (int i = 0; i < num_layers; ++i) {
    plan.push_back(c);
    c /= 2;
  }
  plan.push_back(1);
  return plan;
}

std::vector<int64_t> GeneratorConfig::layer_lengths() const {
  std::vector<int64_t> out;
  int64_t len = initial_len;
  for (int i = 0; i < num_layers; ++i) {
    len *= upsample_factor;
    out.push_back(len);
  }
  return out;
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::InvalidConfig, "generator: " + msg); };
  if (d_z < 1) fail("d_z must be positive");
  if (num_layers < 1) fail("num_layers must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) fail("kernel_size must be odd");
  if (upsample_factor < 1) fail("upsample_factor must be >= 1");
  if (initial_len < 1) fail("initial_len must be positive");
  if (num_classes < 0) fail("num_classes must be >= 0");
  if (base_channels < 1) fail("base_channels must be positive");
  if (base_channels % (1 << (num_layers - 1)) != 0) {
    fail("base_channels must be divisible by 2^(num_layers-1) for the halving plan");
  }
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"d_z", c.d_z},
       {"num_layers", c.num_layers},
       {"kernel_size", c.kernel_size},
       {"upsample_factor", c.upsample_factor},
       {"base_channels", c.base_channels},
       {"initial_len", c.initial_len},
       {"num_classes", c.num_classes},
       {"upsample_mode", std::string(to_string(c.upsample_mode))},
       {"batch_norm", c.batch_norm},
       {"bias", c.bias},
       {"output_len", c.output_len()}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.d_z = j.value("d_z", d.d_z);
  c.num_layers = j.value("num_layers", d.num_layers);
  c.kernel_size = j.value("kernel_size", d.kernel_size);
  c.upsample_factor = j.value("upsample_factor", d.upsample_factor);
  c.base_channels = j.value("base_channels", d.base_channels);
  c.initial_len = j.value("initial_len", d.initial_len);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.upsample_mode = upsample_mode_from_string(j.value("upsample_mode", std::string("zero_stuff")));
  c.batch_norm = j.value("batch_norm", d.batch_norm);
  c.bias = j.value("bias", d.bias);
}

ParameterCount count_parameters(const GeneratorConfig& cfg) {
  ParameterCount pc;
  const auto plan = cfg.channel_plan();
  const int64_t c0 = plan.front();
  const int64_t proj = c0 * cfg.initial_len;
  pc.dense = cfg.d_z * proj + proj;
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int64_t in = plan[i] + (i == 0 ? cfg.num_classes : 0);
    const int64_t out = plan[i + 1];
    pc.conv += in * out * cfg.kernel_size + (cfg.bias ? out : 0);
    if (cfg.batch_norm && i + 1 < cfg.num_layers) pc.batch_norm += 2 * out;
  }
  return pc;
}

WaveGanGeneratorImpl::WaveGanGeneratorImpl(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto plan = cfg_.channel_plan();
  dense_ = register_module("dense", torch::nn::Linear(cfg_.d_z, plan.front() * cfg_.initial_len));
  for (int i = 0; i < cfg_.num_layers; ++i) {
    const int in = plan[i] + (i == 0 ? cfg_.num_classes : 0);
    const int out = plan[i + 1];
    auto opts = torch::nn::Conv1dOptions(in, out, cfg_.kernel_size)
                    .stride(1)
                    .padding(cfg_.kernel_size / 2)
                    .bias(cfg_.bias);
    convs_.push_back(register_module("conv" + std::to_string(i), torch::nn::Conv1d(opts)));
    if (cfg_.batch_norm && i + 1 < cfg_.num_layers) {
      norms_.push_back(register_module("bn" + std::to_string(i), torch::nn::BatchNorm1d(out)));
    }
  }
}

torch::Tensor WaveGanGeneratorImpl::up_conv(size_t layer, const torch::Tensor& x) {
  auto& conv = convs_[layer];
  const int64_t f = cfg_.upsample_factor;
  const int64_t pad = cfg_.kernel_size / 2;
  if (cfg_.upsample_mode == UpsampleMode::zero_stuff && f > 1) {
    // Zero-stuffing followed by a stride-1 conv is a stride-f transposed conv
    // with the kernel flipped and in/out channels swapped; skip the zeros.
    auto w = conv->weight.transpose(0, 1).flip({2});
    auto b = cfg_.bias ? conv->bias : torch::Tensor();
    return F::conv_transpose1d(
        x, w, F::ConvTranspose1dFuncOptions().bias(b).stride(f).padding(pad).output_padding(f - 1));
  }
  return conv->forward(upsample(x, f, cfg_.upsample_mode));
}

GeneratorTrace WaveGanGeneratorImpl::forward_trace(const torch::Tensor& z, const torch::Tensor& labels) {
  if (z.dim() != 2 || z.size(1) != cfg_.d_z) {
    throw Error(Errc::ShapeMismatch, "z must be (B, " + std::to_string(cfg_.d_z) + ")");
  }
  if (cfg_.num_classes > 0 &&
      (labels.dim() != 2 || labels.size(0) != z.size(0) || labels.size(1) != cfg_.num_classes)) {
    throw Error(Errc::ShapeMismatch, "labels must be (B, " + std::to_string(cfg_.num_classes) +
                                         ") with the same batch as z");
  }
  GeneratorTrace trace;
  auto x = dense_->forward(z).view({z.size(0), cfg_.channel_plan().front(), cfg_.initial_len});
  x = torch::relu(x);
  if (cfg_.num_classes > 0) x = condition_inject(x, labels);
  for (int i = 0; i < cfg_.num_layers; ++i) {
    x = up_conv(static_cast<size_t>(i), x);
    trace.layer_lengths.push_back(x.size(2));
    if (i + 1 < cfg_.num_layers) {
      if (cfg_.batch_norm) x = norms_[static_cast<size_t>(i)]->forward(x);
      x = torch::relu(x);
    } else {
      x = torch::tanh(x);
    }
  }
  trace.output = x.squeeze(1);
  return trace;
}

torch::Tensor WaveGanGeneratorImpl::forward(const torch::Tensor& z, const torch::Tensor& labels) {
  return forward_trace(z, labels).output;
}

torch::Tensor sample_latent(int64_t n, int d_z, Rng& rng) { return uniform_tensor({n, d_z}, -1.0, 1.0, rng); }

}  // namespace footgan
