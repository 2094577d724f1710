#include "footgan/signal_ops.hpp"

#include <string>

#include "footgan/error.hpp"

namespace footgan {
namespace F = torch::nn::functional;

std::string_view to_string(UpsampleMode mode) {
  switch (mode) {
    case UpsampleMode::zero_stuff: return "zero_stuff";
    case UpsampleMode::nearest: return "nearest";
    case UpsampleMode::linear: return "linear";
    case UpsampleMode::cubic: return "cubic";
  }
  return "zero_stuff";
}

UpsampleMode upsample_mode_from_string(std::string_view name) {
  if (name == "zero_stuff") return UpsampleMode::zero_stuff;
  if (name == "nearest") return UpsampleMode::nearest;
  if (name == "linear") return UpsampleMode::linear;
  if (name == "cubic") return UpsampleMode::cubic;
  throw Error(Errc::InvalidConfig, "unknown upsample mode '" + std::string(name) + "'");
}

namespace {

// Gathers x at clamped anchor offsets and mixes them with per-phase weights.
// weights: (factor, taps) ; offsets: first anchor offset relative to i.
torch::Tensor interpolate(const torch::Tensor& x, int64_t factor, const torch::Tensor& weights,
                          int64_t first_offset) {
  const int64_t len = x.size(-1);
  const int64_t taps = weights.size(1);
  auto base = torch::arange(len, torch::kLong);
  torch::Tensor out;
  for (int64_t m = 0; m < taps; ++m) {
    auto idx = (base + (first_offset + m)).clamp(0, len - 1);
    auto term = x.index_select(-1, idx).unsqueeze(-1) * weights.select(1, m).to(x.dtype());
    out = out.defined() ? out + term : term;
  }
  auto sizes = x.sizes().vec();
  sizes.back() = len * factor;
  return out.reshape(sizes);
}

}  // namespace

torch::Tensor upsample(const torch::Tensor& x, int64_t factor, UpsampleMode mode) {
  if (factor < 1) throw Error(Errc::InvalidFactor, "upsample factor must be >= 1");
  if (factor == 1) return x;
  const int64_t len = x.size(-1);
  auto sizes = x.sizes().vec();
  sizes.back() = len * factor;

  switch (mode) {
    case UpsampleMode::zero_stuff: {
      auto zshape = x.sizes().vec();
      zshape.push_back(factor - 1);
      auto stuffed = torch::cat({x.unsqueeze(-1), torch::zeros(zshape, x.options())}, -1);
      return stuffed.reshape(sizes);
    }
    case UpsampleMode::nearest:
      return x.unsqueeze(-1).expand([&] {
                auto s = x.sizes().vec();
                s.push_back(factor);
                return s;
              }())
          .reshape(sizes);
    case UpsampleMode::linear: {
      auto t = torch::arange(factor, torch::kDouble) / static_cast<double>(factor);
      auto w = torch::stack({1.0 - t, t}, 1);
      return interpolate(x, factor, w, 0);
    }
    case UpsampleMode::cubic: {
      // Catmull-Rom (Keys, a = -0.5) over anchors i-1, i, i+1, i+2.
      auto t = torch::arange(factor, torch::kDouble) / static_cast<double>(factor);
      auto t2 = t * t;
      auto t3 = t2 * t;
      auto w = torch::stack({-0.5 * t3 + t2 - 0.5 * t, 1.5 * t3 - 2.5 * t2 + 1.0,
                             -1.5 * t3 + 2.0 * t2 + 0.5 * t, 0.5 * t3 - 0.5 * t2},
                            1);
      return interpolate(x, factor, w, -1);
    }
  }
  return x;
}

torch::Tensor condition_inject(const torch::Tensor& features, const torch::Tensor& labels) {
  if (features.dim() != 3 || labels.dim() != 2 || features.size(0) != labels.size(0)) {
    throw Error(Errc::ShapeMismatch, "condition_inject expects (B,C,L) features and (B,K) labels");
  }
  auto broadcast = labels.to(features.dtype()).unsqueeze(-1).expand({-1, -1, features.size(2)});
  return torch::cat({features, broadcast}, 1);
}

torch::Tensor one_hot(std::span<const int> ids, int64_t num_classes) {
  auto out = torch::zeros({static_cast<int64_t>(ids.size()), num_classes});
  auto acc = out.accessor<float, 2>();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= num_classes) {
      throw Error(Errc::InvalidClass, "class id " + std::to_string(ids[i]) + " out of range");
    }
    acc[static_cast<int64_t>(i)][ids[i]] = 1.0f;
  }
  return out;
}

torch::Tensor phase_shift(const torch::Tensor& x, const torch::Tensor& shifts, int64_t n) {
  if (n == 0) return x;
  const int64_t len = x.size(2);
  if (n >= len) throw Error(Errc::ShapeMismatch, "phase shuffle radius exceeds feature length");
  auto padded = F::pad(x, F::PadFuncOptions({n, n}).mode(torch::kReflect));
  auto idx = torch::arange(len, torch::kLong).view({1, 1, len}) + n + shifts.view({shifts.size(0), shifts.size(1), 1});
  return padded.gather(2, idx.expand({x.size(0), x.size(1), len}).contiguous());
}

torch::Tensor phase_shuffle(const torch::Tensor& x, int64_t n, Rng& rng) {
  if (n == 0) return x;
  std::uniform_int_distribution<int64_t> dist(-n, n);
  auto shifts = torch::empty({x.size(0), x.size(1)}, torch::kLong);
  auto* p = shifts.data_ptr<int64_t>();
  for (int64_t i = 0; i < shifts.numel(); ++i) p[i] = dist(rng);
  return phase_shift(x, shifts, n);
}

torch::Tensor period_reshape(const torch::Tensor& x, int64_t period) {
  if (period < 1) throw Error(Errc::InvalidConfig, "period must be >= 1");
  auto y = x;
  const int64_t t = x.size(-1);
  if (t % period != 0) {
    const int64_t pad = period - t % period;
    y = F::pad(x, F::PadFuncOptions({0, pad}).mode(torch::kReflect));
  }
  const int64_t tp = y.size(-1);
  return y.view({y.size(0), y.size(1), tp / period, period});
}

torch::Tensor average_pool(const torch::Tensor& x, int64_t factor) {
  if (factor < 1) throw Error(Errc::InvalidFactor, "pool factor must be >= 1");
  if (factor == 1) return x;
  return F::avg_pool1d(x, F::AvgPool1dFuncOptions(factor).stride(factor));
}

torch::Tensor uniform_tensor(torch::IntArrayRef shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  auto out = torch::empty(shape, torch::kFloat);
  auto* p = out.data_ptr<float>();
  for (int64_t i = 0; i < out.numel(); ++i) p[i] = static_cast<float>(dist(rng));
  return out;
}

}  // namespace footgan
