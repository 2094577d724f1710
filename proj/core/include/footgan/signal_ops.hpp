#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include <torch/torch.h>

namespace footgan {

using Rng = std::mt19937_64;

enum class UpsampleMode { zero_stuff, nearest, linear, cubic };

std::string_view to_string(UpsampleMode mode);
UpsampleMode upsample_mode_from_string(std::string_view name);

/// Upsamples the last dimension by `factor`. Interpolating modes anchor the
/// original samples at 0, f, 2f, ... and hold the last sample at the tail.
torch::Tensor upsample(const torch::Tensor& x, int64_t factor, UpsampleMode mode);

/// (B, K) one-hot labels broadcast along time and appended as K channels of
/// a (B, C, L) map -> (B, C + K, L).
torch::Tensor condition_inject(const torch::Tensor& features, const torch::Tensor& labels);

/// (B, K) float one-hot rows for integer class ids.
torch::Tensor one_hot(std::span<const int> ids, int64_t num_classes);

/// Shifts channel (b, c) so that out[t] = in[t + shifts[b][c]], reflecting at
/// the edges. `shifts` is (B, C) int64 with |shift| <= n.
torch::Tensor phase_shift(const torch::Tensor& x, const torch::Tensor& shifts, int64_t n);

/// Random per-channel shift drawn uniformly from [-n, n]; identity for n == 0.
torch::Tensor phase_shuffle(const torch::Tensor& x, int64_t n, Rng& rng);

/// (B, C, T) -> (B, C, T'/p, p), reflect-padding the tail up to the next
/// multiple T' of p.
torch::Tensor period_reshape(const torch::Tensor& x, int64_t period);

/// Non-overlapping mean over windows of `factor` along the last dimension.
torch::Tensor average_pool(const torch::Tensor& x, int64_t factor);

/// Tensor of `shape` filled with U(lo, hi) draws from `rng` (row-major order).
torch::Tensor uniform_tensor(torch::IntArrayRef shape, double lo, double hi, Rng& rng);

}  // namespace footgan
