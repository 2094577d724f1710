#include "footgan/melspec.hpp"

#include <cmath>

#include "footgan/error.hpp"

namespace footgan {

int64_t MelConfig::num_frames(int64_t num_samples) const {
  if (num_samples < win_length) return 0;
  return 1 + (num_samples - win_length) / hop_length;
}

void to_json(nlohmann::json& j, const MelConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},   {"win_length", c.win_length},
       {"hop_length", c.hop_length},   {"n_mels", c.n_mels}, {"f_min", c.f_min},
       {"f_max", c.f_max},             {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, MelConfig& c) {
  MelConfig d;
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.n_fft = j.value("n_fft", d.n_fft);
  c.win_length = j.value("win_length", d.win_length);
  c.hop_length = j.value("hop_length", d.hop_length);
  c.n_mels = j.value("n_mels", d.n_mels);
  c.f_min = j.value("f_min", d.f_min);
  c.f_max = j.value("f_max", d.f_max);
  c.log_floor = j.value("log_floor", d.log_floor);
}

namespace {
double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
}  // namespace

torch::Tensor mel_filterbank(const MelConfig& cfg) {
  const int bins = cfg.n_fft / 2 + 1;
  auto fb = torch::zeros({cfg.n_mels, bins}, torch::kFloat);
  auto acc = fb.accessor<float, 2>();
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels + 2));
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.n_mels + 1));
  }
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      acc[m][k] = static_cast<float>(w);
    }
  }
  return fb;
}

torch::Tensor log_mel_spectrogram(const torch::Tensor& audio, const MelConfig& cfg) {
  if (audio.dim() != 2) throw Error(Errc::ShapeMismatch, "log_mel_spectrogram expects (B, T)");
  if (audio.size(1) < cfg.win_length) throw Error(Errc::ShapeMismatch, "audio shorter than one window");
  auto window = torch::hann_window(cfg.win_length, torch::TensorOptions().dtype(audio.dtype()));
  auto spec = torch::stft(audio, cfg.n_fft, cfg.hop_length, cfg.win_length, window,
                          /*center=*/false, "reflect", /*normalized=*/false, /*onesided=*/true,
                          /*return_complex=*/true);
  auto power = spec.abs().pow(2);  // (B, bins, frames)
  auto fb = mel_filterbank(cfg).to(audio.dtype());
  auto mel = torch::matmul(fb, power);
  return torch::log(mel + cfg.log_floor);
}

}  // namespace footgan
