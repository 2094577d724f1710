#include "footgan/discriminators.hpp"

#include <numeric>
#include <string>

#include "footgan/error.hpp"

namespace footgan {
namespace F = torch::nn::functional;
using nlohmann::json;

// ---- normalized convs ------------------------------------------------------

namespace {
torch::Tensor unit(const torch::Tensor& t) { return t / (t.norm() + 1e-12); }
}  // namespace

CriticConvImpl::CriticConvImpl(int dim, int in, int out, int kernel, int stride, int padding, int groups,
                               CriticNorm norm)
    : dim_(dim), stride_(stride), padding_(padding), groups_(groups), norm_(norm) {
  if (dim != 1 && dim != 2) throw Error(Errc::InvalidConfig, "critic conv dim must be 1 or 2");
  torch::Tensor w, b;
  if (dim == 1) {
    torch::nn::Conv1d c(torch::nn::Conv1dOptions(in, out, kernel).groups(groups));
    w = c->weight.detach().clone();
    b = c->bias.detach().clone();
  } else {
    torch::nn::Conv2d c(torch::nn::Conv2dOptions(in, out, {kernel, 1}).groups(groups));
    w = c->weight.detach().clone();
    b = c->bias.detach().clone();
  }
  if (norm_ == CriticNorm::weight) {
    std::vector<int64_t> shape(w.dim(), 1);
    shape[0] = out;
    weight_g_ = register_parameter("weight_g", w.flatten(1).norm(2, 1).reshape(shape));
    weight_ = register_parameter("weight_v", w);
  } else {
    weight_ = register_parameter("weight", w);
  }
  bias_ = register_parameter("bias", b);
  if (norm_ == CriticNorm::spectral) {
    torch::NoGradGuard ng;
    const auto mat = w.flatten(1);
    auto u = unit(torch::randn({mat.size(0)}));
    torch::Tensor v;
    for (int i = 0; i < 15; ++i) {
      v = unit(torch::mv(mat.t(), u));
      u = unit(torch::mv(mat, v));
    }
    u_ = register_buffer("u", u);
    v_ = register_buffer("v", v);
  }
}

torch::Tensor CriticConvImpl::effective_weight() {
  switch (norm_) {
    case CriticNorm::none:
      return weight_;
    case CriticNorm::weight: {
      std::vector<int64_t> shape(weight_.dim(), 1);
      shape[0] = weight_.size(0);
      return weight_g_ * weight_ / weight_.flatten(1).norm(2, 1).reshape(shape);
    }
    case CriticNorm::spectral: {
      const auto sigma = torch::dot(u_, torch::mv(weight_.flatten(1), v_));
      return weight_ / sigma;
    }
  }
  return weight_;
}

void CriticConvImpl::power_iteration() {
  if (norm_ != CriticNorm::spectral) return;
  torch::NoGradGuard ng;
  const auto mat = weight_.flatten(1);
  v_.copy_(unit(torch::mv(mat.t(), u_)));
  u_.copy_(unit(torch::mv(mat, v_)));
}

void power_iteration(torch::nn::Module& critic) {
  for (const auto& m : critic.modules()) {
    if (auto c = std::dynamic_pointer_cast<CriticConvImpl>(m)) c->power_iteration();
  }
}

torch::Tensor CriticConvImpl::forward(const torch::Tensor& x) {
  const auto w = effective_weight();
  if (dim_ == 1) return torch::conv1d(x, w, bias_, {stride_}, {padding_}, {1}, groups_);
  return torch::conv2d(x, w, bias_, {stride_, 1}, {padding_, 0}, {1, 1}, groups_);
}

// ---- WaveGAN critic --------------------------------------------------------

std::vector<int64_t> WaveDiscConfig::layer_lengths() const {
  std::vector<int64_t> out;
  int64_t len = input_len;
  for (int i = 0; i < num_layers; ++i) {
    len /= stride;
    out.push_back(len);
  }
  return out;
}

void WaveDiscConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::InvalidConfig, "wavegan critic: " + m); };
  if (num_layers < 1) fail("num_layers must be positive");
  if (stride < 1) fail("stride must be positive");
  if (kernel_size < stride || (kernel_size - stride + 1) % 2 != 0) {
    fail("kernel_size - stride + 1 must be even and non-negative");
  }
  if (base_channels < 1) fail("base_channels must be positive");
  if (phase_shuffle_n < 0) fail("phase_shuffle_n must be >= 0");
  if (num_classes < 0) fail("num_classes must be >= 0");
  int64_t len = input_len;
  for (int i = 0; i < num_layers; ++i) {
    if (len % stride != 0) fail("input_len must be divisible by stride^num_layers");
    len /= stride;
  }
  if (phase_shuffle_n > 0 && len <= phase_shuffle_n) fail("phase shuffle radius too large");
}

void to_json(json& j, const WaveDiscConfig& c) {
  j = {{"num_layers", c.num_layers},     {"stride", c.stride},
       {"kernel_size", c.kernel_size},   {"base_channels", c.base_channels},
       {"phase_shuffle_n", c.phase_shuffle_n}, {"input_len", c.input_len},
       {"num_classes", c.num_classes},   {"leaky_slope", c.leaky_slope},
       {"normalization", c.norm}};
}

void from_json(const json& j, WaveDiscConfig& c) {
  WaveDiscConfig d;
  c.num_layers = j.value("num_layers", d.num_layers);
  c.stride = j.value("stride", d.stride);
  c.kernel_size = j.value("kernel_size", d.kernel_size);
  c.base_channels = j.value("base_channels", d.base_channels);
  c.phase_shuffle_n = j.value("phase_shuffle_n", d.phase_shuffle_n);
  c.input_len = j.value("input_len", d.input_len);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.leaky_slope = j.value("leaky_slope", d.leaky_slope);
  c.norm = j.value("normalization", d.norm);
}

WaveGanDiscriminatorImpl::WaveGanDiscriminatorImpl(WaveDiscConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  int in = 1 + cfg_.num_classes;
  int out = cfg_.base_channels;
  const int pad = (cfg_.kernel_size - cfg_.stride + 1) / 2;
  for (int i = 0; i < cfg_.num_layers; ++i) {
    convs_.push_back(register_module("conv" + std::to_string(i),
                                     CriticConv(1, in, out, cfg_.kernel_size, cfg_.stride, pad, 1, cfg_.norm)));
    in = out;
    out *= 2;
  }
  const int64_t flat = static_cast<int64_t>(in) * cfg_.layer_lengths().back();
  dense_ = register_module("dense", torch::nn::Linear(flat, 1));
}

torch::Tensor WaveGanDiscriminatorImpl::forward_trace(const torch::Tensor& input, Rng* rng,
                                                      std::vector<int64_t>* lengths) {
  if (input.dim() != 3 || input.size(1) != 1 + cfg_.num_classes || input.size(2) != cfg_.input_len) {
    throw Error(Errc::ShapeMismatch, "wavegan critic expects (B, " + std::to_string(1 + cfg_.num_classes) +
                                         ", " + std::to_string(cfg_.input_len) + ")");
  }
  const bool shuffle = is_training() && rng != nullptr && cfg_.phase_shuffle_n > 0;
  auto x = input;
  for (size_t i = 0; i < convs_.size(); ++i) {
    x = F::leaky_relu(convs_[i]->forward(x), F::LeakyReLUFuncOptions().negative_slope(cfg_.leaky_slope));
    if (lengths) lengths->push_back(x.size(2));
    if (shuffle && i + 1 < convs_.size()) x = phase_shuffle(x, cfg_.phase_shuffle_n, *rng);
  }
  return dense_->forward(x.flatten(1)).squeeze(1);
}

torch::Tensor WaveGanDiscriminatorImpl::forward(const torch::Tensor& input, Rng* rng) {
  return forward_trace(input, rng, nullptr);
}

torch::Tensor WaveGanDiscriminatorImpl::score(const torch::Tensor& audio, const torch::Tensor& labels, Rng* rng) {
  auto x = as_mono_channel(audio);
  if (cfg_.num_classes > 0) x = condition_inject(x, labels);
  return forward(x, rng);
}

// ---- HiFi critics ----------------------------------------------------------

HiFiDiscConfig HiFiDiscConfig::compact() {
  HiFiDiscConfig c;
  c.msd_layers = {{16, 15, 1, 1}, {32, 41, 4, 4}, {64, 41, 4, 4}, {64, 41, 4, 4}, {64, 5, 1, 1}};
  c.mpd_layers = {{16, 5, 3, 1}, {32, 5, 3, 1}, {64, 5, 3, 1}, {64, 5, 1, 1}};
  return c;
}

HiFiDiscConfig HiFiDiscConfig::reference() {
  HiFiDiscConfig c;
  c.msd_layers = {{128, 15, 1, 1},   {128, 41, 2, 4},   {256, 41, 2, 16}, {512, 41, 4, 16},
                  {1024, 41, 4, 16}, {1024, 41, 1, 16}, {1024, 5, 1, 1}};
  c.mpd_layers = {{32, 5, 3, 1}, {128, 5, 3, 1}, {512, 5, 3, 1}, {1024, 5, 3, 1}, {1024, 5, 1, 1}};
  return c;
}

void HiFiDiscConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::InvalidConfig, "hifi critic: " + m); };
  if (msd_layers.empty() || mpd_layers.empty()) fail("layer plans must be non-empty");
  for (size_t i = 1; i < mpd_periods.size(); ++i) {
    if (mpd_periods[i] <= mpd_periods[i - 1]) fail("periods must be strictly increasing");
  }
  for (size_t i = 0; i < mpd_periods.size(); ++i) {
    if (mpd_periods[i] < 1) fail("periods must be >= 1");
    for (size_t k = i + 1; k < mpd_periods.size(); ++k) {
      if (std::gcd(mpd_periods[i], mpd_periods[k]) != 1) fail("periods must be pairwise coprime");
    }
  }
  for (int f : msd_pool_factors) {
    if (f < 1) fail("pool factors must be >= 1");
  }
  auto check_plan = [&](const std::vector<ConvSpec>& plan, const char* name) {
    int in = 1 + num_classes;
    for (size_t i = 0; i < plan.size(); ++i) {
      const auto& l = plan[i];
      if (l.kernel < 1 || l.kernel % 2 == 0) fail(std::string(name) + " kernels must be odd");
      if (l.stride < 1 || l.groups < 1) fail(std::string(name) + " stride/groups must be positive");
      if (in % l.groups != 0 || l.channels % l.groups != 0) {
        fail(std::string(name) + " layer " + std::to_string(i) + " channels not divisible by groups");
      }
      in = l.channels;
    }
  };
  check_plan(msd_layers, "msd");
  check_plan(mpd_layers, "mpd");
  if (post_kernel < 1 || post_kernel % 2 == 0) fail("post_kernel must be odd");
}

namespace {
json plan_json(const std::vector<ConvSpec>& plan) {
  json a = json::array();
  for (const auto& l : plan) {
    a.push_back({{"channels", l.channels}, {"kernel", l.kernel}, {"stride", l.stride}, {"groups", l.groups}});
  }
  return a;
}
std::vector<ConvSpec> plan_from_json(const json& a) {
  std::vector<ConvSpec> plan;
  for (const auto& l : a) {
    plan.push_back({l.at("channels").get<int>(), l.at("kernel").get<int>(), l.value("stride", 1),
                    l.value("groups", 1)});
  }
  return plan;
}
}  // namespace

void to_json(json& j, const HiFiDiscConfig& c) {
  j = {{"msd_pool_factors", c.msd_pool_factors},
       {"mpd_periods", c.mpd_periods},
       {"leaky_slope", c.leaky_slope},
       {"num_classes", c.num_classes},
       {"msd_layers", plan_json(c.msd_layers)},
       {"mpd_layers", plan_json(c.mpd_layers)},
       {"post_kernel", c.post_kernel},
       {"normalization", c.norm},
       {"spectral_first_scale", c.spectral_first_scale}};
}

void from_json(const json& j, HiFiDiscConfig& c) {
  const HiFiDiscConfig d = HiFiDiscConfig::compact();
  c.msd_pool_factors = j.value("msd_pool_factors", d.msd_pool_factors);
  c.mpd_periods = j.value("mpd_periods", d.mpd_periods);
  c.leaky_slope = j.value("leaky_slope", d.leaky_slope);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.msd_layers = j.contains("msd_layers") ? plan_from_json(j.at("msd_layers")) : d.msd_layers;
  c.mpd_layers = j.contains("mpd_layers") ? plan_from_json(j.at("mpd_layers")) : d.mpd_layers;
  c.post_kernel = j.value("post_kernel", d.post_kernel);
  c.norm = j.value("normalization", d.norm);
  c.spectral_first_scale = j.value("spectral_first_scale", d.spectral_first_scale);
}

void CriticOutput::append(CriticOutput&& other) {
  for (auto& s : other.scores) scores.push_back(std::move(s));
  for (auto& f : other.features) features.push_back(std::move(f));
  for (auto& s : other.input_shapes) input_shapes.push_back(std::move(s));
}

torch::Tensor as_mono_channel(const torch::Tensor& audio) {
  if (audio.dim() == 2) return audio.unsqueeze(1);
  if (audio.dim() == 3 && audio.size(1) == 1) return audio;
  throw Error(Errc::ShapeMismatch, "audio must be (B, T) or (B, 1, T)");
}

ScaleDiscriminatorImpl::ScaleDiscriminatorImpl(const HiFiDiscConfig& cfg, int in_channels, CriticNorm norm)
    : slope_(cfg.leaky_slope) {
  int in = in_channels;
  for (size_t i = 0; i < cfg.msd_layers.size(); ++i) {
    const auto& l = cfg.msd_layers[i];
    convs_.push_back(register_module(
        "conv" + std::to_string(i),
        CriticConv(1, in, l.channels, l.kernel, l.stride, (l.kernel - 1) / 2, l.groups, norm)));
    in = l.channels;
  }
  post_ = register_module("post", CriticConv(1, in, 1, cfg.post_kernel, 1, (cfg.post_kernel - 1) / 2, 1, norm));
}

std::pair<torch::Tensor, std::vector<torch::Tensor>> ScaleDiscriminatorImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> features;
  auto h = x;
  for (auto& conv : convs_) {
    h = F::leaky_relu(conv->forward(h), F::LeakyReLUFuncOptions().negative_slope(slope_));
    features.push_back(h);
  }
  h = post_->forward(h);
  features.push_back(h);
  return {h.flatten(1), std::move(features)};
}

PeriodDiscriminatorImpl::PeriodDiscriminatorImpl(const HiFiDiscConfig& cfg, int in_channels)
    : slope_(cfg.leaky_slope) {
  int in = in_channels;
  for (size_t i = 0; i < cfg.mpd_layers.size(); ++i) {
    const auto& l = cfg.mpd_layers[i];
    convs_.push_back(register_module(
        "conv" + std::to_string(i),
        CriticConv(2, in, l.channels, l.kernel, l.stride, (l.kernel - 1) / 2, l.groups, cfg.norm)));
    in = l.channels;
  }
  post_ = register_module("post", CriticConv(2, in, 1, cfg.post_kernel, 1, (cfg.post_kernel - 1) / 2, 1, cfg.norm));
}

std::pair<torch::Tensor, std::vector<torch::Tensor>> PeriodDiscriminatorImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> features;
  auto h = x;
  for (auto& conv : convs_) {
    h = F::leaky_relu(conv->forward(h), F::LeakyReLUFuncOptions().negative_slope(slope_));
    features.push_back(h);
  }
  h = post_->forward(h);
  features.push_back(h);
  return {h.flatten(1), std::move(features)};
}

HiFiDiscriminatorImpl::HiFiDiscriminatorImpl(HiFiDiscConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.msd_layers.empty() && cfg_.mpd_layers.empty()) {
    auto c = HiFiDiscConfig::compact();
    cfg_.msd_layers = c.msd_layers;
    cfg_.mpd_layers = c.mpd_layers;
  }
  cfg_.validate();
  const int in = 1 + cfg_.num_classes;
  for (size_t i = 0; i < cfg_.msd_pool_factors.size(); ++i) {
    const auto norm = (i == 0 && cfg_.spectral_first_scale) ? CriticNorm::spectral : cfg_.norm;
    scales_.push_back(register_module("msd" + std::to_string(i), ScaleDiscriminator(cfg_, in, norm)));
  }
  for (size_t i = 0; i < cfg_.mpd_periods.size(); ++i) {
    periods_.push_back(register_module("mpd" + std::to_string(cfg_.mpd_periods[i]), PeriodDiscriminator(cfg_, in)));
  }
}

torch::Tensor HiFiDiscriminatorImpl::augment(const torch::Tensor& audio, const torch::Tensor& labels) const {
  auto x = as_mono_channel(audio);
  if (cfg_.num_classes > 0) {
    if (labels.dim() != 2 || labels.size(0) != x.size(0) || labels.size(1) != cfg_.num_classes) {
      throw Error(Errc::ShapeMismatch, "labels must be (B, " + std::to_string(cfg_.num_classes) + ")");
    }
    x = condition_inject(x, labels);
  }
  return x;
}

CriticOutput HiFiDiscriminatorImpl::msd_forward(const torch::Tensor& audio, const torch::Tensor& labels) {
  const auto x = augment(audio, labels);
  CriticOutput out;
  for (size_t i = 0; i < scales_.size(); ++i) {
    auto xi = average_pool(x, cfg_.msd_pool_factors[i]);
    out.input_shapes.push_back(xi.sizes().slice(1).vec());
    auto [score, feats] = scales_[i]->forward(xi);
    out.scores.push_back(score);
    out.features.push_back(std::move(feats));
  }
  return out;
}

CriticOutput HiFiDiscriminatorImpl::mpd_forward(const torch::Tensor& audio, const torch::Tensor& labels) {
  const auto x = augment(audio, labels);
  CriticOutput out;
  for (size_t i = 0; i < periods_.size(); ++i) {
    auto xi = period_reshape(x, cfg_.mpd_periods[i]);
    out.input_shapes.push_back(xi.sizes().slice(1).vec());
    auto [score, feats] = periods_[i]->forward(xi);
    out.scores.push_back(score);
    out.features.push_back(std::move(feats));
  }
  return out;
}

CriticOutput HiFiDiscriminatorImpl::forward(const torch::Tensor& audio, const torch::Tensor& labels) {
  auto out = msd_forward(audio, labels);
  out.append(mpd_forward(audio, labels));
  return out;
}

}  // namespace footgan
