#pragma once

#include <torch/torch.h>

#include "json.hpp"

namespace footgan {

struct MelConfig {
  int sample_rate = 16000;
  int n_fft = 512;
  int win_length = 400;  // 25 ms
  int hop_length = 160;  // 10 ms
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-6;

  int64_t num_frames(int64_t num_samples) const;
  bool operator==(const MelConfig&) const = default;
};

void to_json(nlohmann::json& j, const MelConfig& c);
void from_json(const nlohmann::json& j, MelConfig& c);

/// Triangular HTK-scale filters, (n_mels, n_fft / 2 + 1).
torch::Tensor mel_filterbank(const MelConfig& cfg);

/// (B, T) audio -> (B, n_mels, frames) natural-log mel power, uncentered
/// frames with a periodic Hann window.
torch::Tensor log_mel_spectrogram(const torch::Tensor& audio, const MelConfig& cfg);

}  // namespace footgan
