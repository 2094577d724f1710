#include "footgan/stimuli.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "footgan/checkpoint.hpp"
#include "footgan/dataset.hpp"
#include "footgan/error.hpp"
#include "footgan/signal_ops.hpp"
#include "footgan/wav.hpp"

namespace footgan {
namespace fs = std::filesystem;
using nlohmann::json;

std::vector<AudioClip> generate_samples(WaveGanGenerator& generator, int class_id, int n, uint64_t seed,
                                        int batch_size) {
  const auto& cfg = generator->config();
  if (class_id < 0 || class_id >= std::max(cfg.num_classes, 1)) {
    throw Error(Errc::InvalidClass, "class id " + std::to_string(class_id) + " outside 0.." +
                                        std::to_string(std::max(cfg.num_classes, 1) - 1));
  }
  if (n < 0 || batch_size < 1) throw Error(Errc::InvalidConfig, "sample count and batch size must be positive");
  torch::NoGradGuard no_grad;
  generator->eval();
  Rng rng(seed);
  std::vector<AudioClip> out;
  out.reserve(static_cast<size_t>(n));
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    auto z = sample_latent(b, cfg.d_z, rng);
    const std::vector<int> ids(static_cast<size_t>(b), class_id);
    auto labels = cfg.num_classes > 0 ? one_hot(ids, cfg.num_classes) : torch::zeros({b, 0});
    auto x = generator->forward(z, labels).contiguous();
    for (int i = 0; i < b; ++i) {
      const float* p = x[i].data_ptr<float>();
      AudioClip clip;
      clip.samples.assign(p, p + x.size(1));
      clip.sample_rate = kSampleRate;
      clip.label = class_id;
      out.push_back(std::move(clip));
    }
  }
  return out;
}

std::vector<AudioClip> generate_samples(const fs::path& checkpoint, int class_id, int n, uint64_t seed,
                                        int batch_size) {
  auto g = load_generator(checkpoint);
  return generate_samples(g, class_id, n, seed, batch_size);
}

std::vector<fs::path> write_clips(const std::vector<AudioClip>& clips, const fs::path& dir,
                                  const std::string& prefix) {
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  char name[32];
  for (size_t i = 0; i < clips.size(); ++i) {
    std::snprintf(name, sizeof(name), "_%05zu.wav", i);
    paths.push_back(dir / (prefix + name));
    write_wav_pcm16(paths.back(), clips[i].samples, clips[i].sample_rate);
  }
  return paths;
}

int64_t WalkSpec::num_samples() const { return std::llround(duration_s * kSampleRate); }

int64_t WalkSpec::onset_count() const {
  // The small slack keeps exact multiples (10 / 0.1) from flooring one short.
  return static_cast<int64_t>(std::floor(duration_s / interval_s + 1e-9));
}

int64_t WalkSpec::onset_sample(int64_t k) const {
  return std::llround(static_cast<double>(k) * interval_s * kSampleRate);
}

void WalkSpec::validate() const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw Error(Errc::InvalidConfig, "walk duration must be > 0");
  if (!(interval_s > 0.0) || !std::isfinite(interval_s)) throw Error(Errc::InvalidConfig, "walk interval must be > 0");
  if (sequence && static_cast<int64_t>(sequence->size()) != onset_count()) {
    throw Error(Errc::InvalidConfig, "walk sequence has " + std::to_string(sequence->size()) + " entries, expected " +
                                         std::to_string(onset_count()));
  }
}

Walk build_walk(const std::vector<AudioClip>& pool, const WalkSpec& spec) {
  if (pool.empty()) throw Error(Errc::EmptyClipPool, "no clips to build a walk from");
  spec.validate();
  Walk w;
  const int64_t len = spec.num_samples();
  std::vector<double> acc(static_cast<size_t>(len), 0.0);
  Rng rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int64_t k = 0; k < spec.onset_count(); ++k) {
    const std::size_t idx = spec.sequence ? (*spec.sequence)[static_cast<size_t>(k)] : pick(rng);
    if (idx >= pool.size()) throw Error(Errc::InvalidConfig, "walk sequence index out of range");
    const int64_t at = spec.onset_sample(k);
    const auto& s = pool[idx].samples;
    for (int64_t t = 0; t < static_cast<int64_t>(s.size()) && at + t < len; ++t) {
      acc[static_cast<size_t>(at + t)] += s[static_cast<size_t>(t)];
    }
    w.onsets.push_back(at);
    w.picks.push_back(idx);
  }
  double peak = 0.0;
  for (double v : acc) peak = std::max(peak, std::abs(v));
  const double target = dbfs_to_amplitude(spec.target_dbfs);
  const double gain = peak > target ? target / peak : 1.0;
  w.renormalized = peak > target;
  w.audio.sample_rate = kSampleRate;
  w.audio.samples.resize(acc.size());
  for (size_t i = 0; i < acc.size(); ++i) w.audio.samples[i] = static_cast<float>(acc[i] * gain);
  return w;
}

json SeriesManifest::to_json() const {
  return {{"series_id", series_id}, {"interval_s", interval_s}, {"conditions", conditions}};
}

SeriesManifest SeriesManifest::from_json(const json& j) {
  SeriesManifest m;
  try {
    m.series_id = j.at("series_id").get<std::string>();
    m.interval_s = j.at("interval_s").get<double>();
    m.conditions = j.at("conditions").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("series manifest: ") + e.what());
  }
  return m;
}

std::vector<AudioClip> load_clip_pool(const fs::path& dir) {
  std::vector<AudioClip> pool;
  for (const auto& f : list_wav_files(dir)) {
    auto clip = load_clip(f);
    pool.push_back(clip.sample_rate == kSampleRate ? std::move(clip) : resample(clip, kSampleRate));
  }
  return pool;
}

SeriesManifest assemble_series(const std::map<std::string, fs::path>& condition_dirs, const WalkSpec& spec,
                               const fs::path& out_dir, const std::string& series_id) {
  spec.validate();
  std::map<std::string, std::vector<AudioClip>> pools;
  for (const auto& c : kConditions) {
    auto it = condition_dirs.find(c);
    if (it == condition_dirs.end()) throw Error(Errc::MissingCondition, "no folder given for condition " + c);
    if (!fs::is_directory(it->second)) {
      throw Error(Errc::MissingCondition, "condition " + c + ": folder " + it->second.string() + " does not exist");
    }
    pools[c] = load_clip_pool(it->second);
    if (pools[c].empty()) throw Error(Errc::MissingCondition, "condition " + c + ": no WAV files in " + it->second.string());
  }
  SeriesManifest m;
  m.series_id = series_id;
  m.interval_s = spec.interval_s;
  const fs::path dir = out_dir / series_id;
  fs::create_directories(dir);
  for (const auto& c : kConditions) {
    const Walk w = build_walk(pools[c], spec);
    write_wav_pcm16(dir / (c + ".wav"), w.audio.samples, w.audio.sample_rate);
    m.conditions[c] = c + ".wav";
  }
  write_json_file(dir / "manifest.json", m.to_json());
  return m;
}

std::vector<SeriesManifest> assemble_series_set(const std::map<std::string, fs::path>& condition_dirs,
                                                const WalkSpec& spec, const fs::path& out_dir, int count) {
  if (count < 1) throw Error(Errc::InvalidConfig, "series count must be >= 1");
  std::vector<SeriesManifest> out;
  json index = json::array();
  char id[32];
  for (int k = 0; k < count; ++k) {
    WalkSpec s = spec;
    s.seed = spec.seed + static_cast<uint64_t>(k);
    std::snprintf(id, sizeof(id), "series_%02d", k + 1);
    out.push_back(assemble_series(condition_dirs, s, out_dir, id));
    index.push_back({{"series_id", id}, {"manifest", std::string(id) + "/manifest.json"}, {"seed", s.seed}});
  }
  write_json_file(out_dir / "index.json", {{"interval_s", spec.interval_s}, {"duration_s", spec.duration_s},
                                           {"series", index}});
  return out;
}

}  // namespace footgan
