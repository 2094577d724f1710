#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "footgan/audio.hpp"
#include "footgan/conditions.hpp"
#include "footgan/generator.hpp"
#include "json.hpp"

namespace footgan {

/// n clips for one surface class, deterministic in `seed`. InvalidClass for
/// ids outside 0..num_classes-1.
std::vector<AudioClip> generate_samples(WaveGanGenerator& generator, int class_id, int n, uint64_t seed,
                                        int batch_size = 64);
std::vector<AudioClip> generate_samples(const std::filesystem::path& checkpoint, int class_id, int n, uint64_t seed,
                                        int batch_size = 64);

/// Writes <prefix>_00000.wav, ... and returns the paths in order.
std::vector<std::filesystem::path> write_clips(const std::vector<AudioClip>& clips, const std::filesystem::path& dir,
                                               const std::string& prefix);

struct WalkSpec {
  double duration_s = 10.0;
  double interval_s = 0.5;
  uint64_t seed = 0;
  double target_dbfs = kDefaultTargetDbfs;
  /// Pool indices per onset; drawn uniformly with replacement when absent.
  std::optional<std::vector<std::size_t>> sequence;

  int64_t num_samples() const;
  int64_t onset_count() const;
  int64_t onset_sample(int64_t k) const;
  void validate() const;
};

struct Walk {
  AudioClip audio;
  std::vector<int64_t> onsets;     // sample positions
  std::vector<std::size_t> picks;  // pool index per onset
  bool renormalized = false;
};

/// Places one clip per onset, sums overlaps and truncates at the walk end.
/// If the summed peak exceeds target_dbfs the walk is scaled down to it.
Walk build_walk(const std::vector<AudioClip>& pool, const WalkSpec& spec);

struct SeriesManifest {
  std::string series_id;
  double interval_s = 0.5;
  std::map<std::string, std::string> conditions;  // name -> wav path relative to the manifest

  nlohmann::json to_json() const;
  static SeriesManifest from_json(const nlohmann::json& j);
};

/// Clips of a condition folder, resampled to 16 kHz when needed.
std::vector<AudioClip> load_clip_pool(const std::filesystem::path& dir);

/// One walk per condition with the same WalkSpec, written to
/// out_dir/<series_id>/<condition>.wav with a manifest.json beside them.
/// MissingCondition names the first absent or empty condition folder.
SeriesManifest assemble_series(const std::map<std::string, std::filesystem::path>& condition_dirs,
                               const WalkSpec& spec, const std::filesystem::path& out_dir,
                               const std::string& series_id);

/// `count` series, series k seeded with spec.seed + k; writes index.json.
std::vector<SeriesManifest> assemble_series_set(const std::map<std::string, std::filesystem::path>& condition_dirs,
                                                const WalkSpec& spec, const std::filesystem::path& out_dir,
                                                int count);

}  // namespace footgan
