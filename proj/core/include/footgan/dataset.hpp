#pragma once

#include <filesystem>
#include <vector>

#include "footgan/audio.hpp"

namespace footgan {

/// Reads a PCM/float WAV and mixes it down to mono by channel averaging.
AudioClip load_clip(const std::filesystem::path& path);

/// Band-limited rational resampler (Kaiser-windowed sinc). Output length is
/// round(len * target / source); equal rates return the input unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Scales so that max |sample| == 10^(target_dbfs / 20).
AudioClip normalize_peak(const AudioClip& clip, double target_dbfs = kDefaultTargetDbfs);

struct AlignOptions {
  double onset_threshold = 0.05;  // fraction of peak
  std::size_t pre_onset_offset = 256;
  std::size_t target_len = kClipLength;
};

/// Places the first sample with |x| >= threshold * peak at `pre_onset_offset`
/// and zero-pads or truncates the tail to exactly `target_len`.
AudioClip align_and_fit(const AudioClip& clip, const AlignOptions& opts = {});

/// Index of the first sample crossing `threshold * peak`; throws NoOnset.
std::size_t detect_onset(std::span<const float> samples, double threshold);

struct PrepareOptions {
  int target_rate = kSampleRate;
  double target_dbfs = kDefaultTargetDbfs;
  AlignOptions align;
};

/// Full per-clip chain: resample, normalize, align, then re-normalize so the
/// peak target holds even when truncation dropped the original peak.
AudioClip prepare_clip(const AudioClip& raw, const PrepareOptions& opts = {});

struct PreparedClip {
  AudioClip clip;
  std::filesystem::path source;
  int original_rate = 0;
};

/// Walks `root`, one sub-directory per surface name, and prepares every WAV.
std::vector<PreparedClip> prepare_directory(const std::filesystem::path& root,
                                            const PrepareOptions& opts = {});

LabeledDataset build_dataset(const std::filesystem::path& root, const PrepareOptions& opts = {});

LabeledDataset remap_to_eval_classes(const LabeledDataset& dataset,
                                     const ClassMap& map = ClassMap::standard());

/// Writes <out>/<class>/<stem>.wav (16-bit mono) plus manifest.json.
void write_prepared_dataset(const std::filesystem::path& out_dir,
                            const std::vector<PreparedClip>& clips, const PrepareOptions& opts);

/// Reads a directory produced by write_prepared_dataset.
LabeledDataset load_prepared_dataset(const std::filesystem::path& dir);

/// All *.wav files below `dir` (recursive), sorted by path.
std::vector<std::filesystem::path> list_wav_files(const std::filesystem::path& dir);

}  // namespace footgan
