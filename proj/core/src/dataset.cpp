#include "footgan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "footgan/error.hpp"
#include "footgan/wav.hpp"
#include "json.hpp"

namespace footgan {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Resampler design: 32 zero crossings of the low-pass kernel on each side,
// Kaiser beta 8.6 (~ -85 dB stop band), cutoff at 94% of the lower Nyquist.
constexpr double kZeroCrossings = 32.0;
constexpr double kKaiserBeta = 8.6;
constexpr double kRolloff = 0.94;
constexpr std::int64_t kMaxTabulatedPhases = 1024;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double beta) {
  // x in [-1, 1]
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

class SincKernel {
 public:
  SincKernel(std::int64_t up, std::int64_t down) : up_(up) {
    scale_ = kRolloff * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
    half_width_ = kZeroCrossings / scale_;
    taps_ = static_cast<std::int64_t>(std::ceil(half_width_)) + 1;
    if (up_ <= kMaxTabulatedPhases) {
      table_.resize(static_cast<std::size_t>(up_ * 2 * taps_));
      for (std::int64_t p = 0; p < up_; ++p) fill(p, &table_[static_cast<std::size_t>(p * 2 * taps_)]);
    }
  }

  std::int64_t taps() const { return taps_; }

  // Weights for input offsets -taps+1 .. taps relative to floor(t).
  const double* weights(std::int64_t phase, std::vector<double>& scratch) const {
    if (!table_.empty()) return &table_[static_cast<std::size_t>(phase * 2 * taps_)];
    scratch.resize(static_cast<std::size_t>(2 * taps_));
    fill(phase, scratch.data());
    return scratch.data();
  }

 private:
  void fill(std::int64_t phase, double* w) const {
    const double frac = static_cast<double>(phase) / static_cast<double>(up_);
    double sum = 0.0;
    for (std::int64_t k = -taps_ + 1; k <= taps_; ++k) {
      const double tau = frac - static_cast<double>(k);
      const double v = scale_ * sinc(scale_ * tau) * kaiser(tau / half_width_, kKaiserBeta);
      w[k + taps_ - 1] = v;
      sum += v;
    }
    if (sum != 0.0) {
      for (std::int64_t i = 0; i < 2 * taps_; ++i) w[i] /= sum;
    }
  }

  std::int64_t up_;
  double scale_ = 1.0;
  double half_width_ = 1.0;
  std::int64_t taps_ = 1;
  std::vector<double> table_;
};

bool is_wav(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

json alignment_json(const PrepareOptions& opts) {
  return {{"method", "threshold_onset"},
          {"automatic", true},
          {"onset_threshold", opts.align.onset_threshold},
          {"pre_onset_offset", opts.align.pre_onset_offset},
          {"target_len", opts.align.target_len}};
}

}  // namespace

AudioClip load_clip(const fs::path& path) {
  const WavData wav = read_wav(path);
  AudioClip clip;
  clip.sample_rate = wav.sample_rate;
  const std::size_t frames = wav.frames();
  clip.samples.resize(frames);
  const auto channels = static_cast<std::size_t>(wav.channels);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += wav.interleaved[f * channels + c];
    clip.samples[f] = static_cast<float>(acc / static_cast<double>(channels));
  }
  return clip;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (clip.sample_rate <= 0) throw Error(Errc::InvalidRate, "source rate must be positive");
  if (target_rate <= 0) throw Error(Errc::InvalidRate, "target rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  const std::int64_t g = std::gcd(clip.sample_rate, target_rate);
  const std::int64_t up = target_rate / g;
  const std::int64_t down = clip.sample_rate / g;
  const auto in_len = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t out_len = (in_len * up + down / 2) / down;

  SincKernel kernel(up, down);
  const std::int64_t taps = kernel.taps();
  std::vector<double> scratch;

  AudioClip out;
  out.sample_rate = target_rate;
  out.label = clip.label;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    const std::int64_t pos = n * down;
    const std::int64_t base = pos / up;
    const std::int64_t phase = pos % up;
    const double* w = kernel.weights(phase, scratch);
    const std::int64_t lo = std::max<std::int64_t>(0, base - taps + 1);
    const std::int64_t hi = std::min<std::int64_t>(in_len - 1, base + taps);
    double acc = 0.0;
    for (std::int64_t m = lo; m <= hi; ++m) acc += w[m - base + taps - 1] * clip.samples[m];
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

AudioClip normalize_peak(const AudioClip& clip, double target_dbfs) {
  if (clip.empty()) throw Error(Errc::ZeroPeak, "empty clip");
  const float peak = peak_abs(clip.samples);
  if (peak <= 0.0f) throw Error(Errc::ZeroPeak, "clip is silent");
  const double gain = dbfs_to_amplitude(target_dbfs) / static_cast<double>(peak);
  AudioClip out = clip;
  for (auto& s : out.samples) s = static_cast<float>(s * gain);
  return out;
}

std::size_t detect_onset(std::span<const float> samples, double threshold) {
  const double thr = threshold * static_cast<double>(peak_abs(samples));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i]) >= thr && samples[i] != 0.0f) return i;
  }
  throw Error(Errc::NoOnset, "onset threshold never crossed");
}

AudioClip align_and_fit(const AudioClip& clip, const AlignOptions& opts) {
  const std::size_t onset = detect_onset(clip.samples, opts.onset_threshold);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.label = clip.label;
  out.samples.assign(opts.target_len, 0.0f);
  // out[i] = in[i + onset - offset]
  const auto shift = static_cast<std::int64_t>(onset) - static_cast<std::int64_t>(opts.pre_onset_offset);
  for (std::size_t i = 0; i < opts.target_len; ++i) {
    const std::int64_t src = static_cast<std::int64_t>(i) + shift;
    if (src >= 0 && src < static_cast<std::int64_t>(clip.samples.size())) out.samples[i] = clip.samples[src];
  }
  return out;
}

AudioClip prepare_clip(const AudioClip& raw, const PrepareOptions& opts) {
  AudioClip clip = resample(raw, opts.target_rate);
  clip = normalize_peak(clip, opts.target_dbfs);
  clip = align_and_fit(clip, opts.align);
  return normalize_peak(clip, opts.target_dbfs);
}

std::vector<fs::path> list_wav_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && is_wav(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<PreparedClip> prepare_directory(const fs::path& root, const PrepareOptions& opts) {
  if (!fs::is_directory(root)) throw Error(Errc::EmptyDataset, root.string() + " is not a directory");

  std::vector<std::pair<SurfaceClass, fs::path>> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    const auto cls = surface_from_name(name);
    if (!cls) throw Error(Errc::UnknownClassDirectory, "'" + name + "' is not a surface class");
    class_dirs.emplace_back(*cls, entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  std::vector<PreparedClip> out;
  for (const auto& [cls, dir] : class_dirs) {
    for (const auto& file : list_wav_files(dir)) {
      AudioClip raw = load_clip(file);
      PreparedClip pc;
      pc.original_rate = raw.sample_rate;
      pc.source = file;
      pc.clip = prepare_clip(raw, opts);
      pc.clip.label = static_cast<int>(cls);
      out.push_back(std::move(pc));
    }
  }
  if (out.empty()) throw Error(Errc::EmptyDataset, "no WAV files under " + root.string());
  return out;
}

LabeledDataset build_dataset(const fs::path& root, const PrepareOptions& opts) {
  LabeledDataset ds;
  ds.class_names = surface_class_names();
  for (auto& pc : prepare_directory(root, opts)) ds.clips.push_back(std::move(pc.clip));
  return ds;
}

LabeledDataset remap_to_eval_classes(const LabeledDataset& dataset, const ClassMap& map) {
  LabeledDataset out;
  out.class_names = eval_class_names();
  out.clips = dataset.clips;
  for (auto& clip : out.clips) {
    if (clip.label) clip.label = static_cast<int>(map(surface_from_id(*clip.label)));
  }
  return out;
}

void write_prepared_dataset(const fs::path& out_dir, const std::vector<PreparedClip>& clips,
                            const PrepareOptions& opts) {
  fs::create_directories(out_dir);
  json entries = json::array();
  std::vector<std::size_t> per_class(kNumSurfaceClasses, 0);
  for (const auto& pc : clips) {
    const auto cls = surface_from_id(pc.clip.label.value_or(-1));
    const fs::path rel = fs::path(surface_name(cls)) / (pc.source.stem().string() + ".wav");
    fs::create_directories(out_dir / rel.parent_path());
    write_wav_pcm16(out_dir / rel, pc.clip.samples, pc.clip.sample_rate);
    ++per_class[static_cast<int>(cls)];
    entries.push_back({{"path", rel.generic_string()},
                       {"class_id", static_cast<int>(cls)},
                       {"class_name", surface_name(cls)},
                       {"peak", peak_abs(pc.clip.samples)},
                       {"original_rate", pc.original_rate},
                       {"source", pc.source.string()}});
  }
  json counts = json::object();
  for (int c = 0; c < kNumSurfaceClasses; ++c) counts[std::string(surface_name(static_cast<SurfaceClass>(c)))] = per_class[c];

  json manifest = {{"sample_rate", opts.target_rate},
                   {"clip_length", opts.align.target_len},
                   {"target_dbfs", opts.target_dbfs},
                   {"alignment", alignment_json(opts)},
                   {"class_counts", counts},
                   {"clips", entries}};
  const std::string text = manifest.dump(2);
  write_file_bytes(out_dir / "manifest.json",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

LabeledDataset load_prepared_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(Errc::EmptyDataset, "no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(Errc::UnreadableFile, "manifest.json: " + std::string(e.what()));
  }
  LabeledDataset ds;
  ds.class_names = surface_class_names();
  for (const auto& entry : manifest.at("clips")) {
    AudioClip clip = load_clip(dir / entry.at("path").get<std::string>());
    clip.label = static_cast<int>(surface_from_id(entry.at("class_id").get<int>()));
    ds.clips.push_back(std::move(clip));
  }
  if (ds.clips.empty()) throw Error(Errc::EmptyDataset, "manifest lists no clips");
  return ds;
}

}  // namespace footgan
