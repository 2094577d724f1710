#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace footgan {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipLength = 8192;
inline constexpr double kDefaultTargetDbfs = -6.0;

/// Linear amplitude for a peak level in dB relative to full scale.
double dbfs_to_amplitude(double dbfs);

/// The seven recorded surfaces; ids are stable and used in checkpoints.
enum class SurfaceClass : int {
  carpet = 0,
  deck,
  metal,
  pavement,
  rug,
  wood,
  wood_internal,
};
inline constexpr int kNumSurfaceClasses = 7;

std::string_view surface_name(SurfaceClass c);
std::optional<SurfaceClass> surface_from_name(std::string_view name);
/// Throws Errc::InvalidClass for ids outside 0..6.
SurfaceClass surface_from_id(int id);
std::vector<std::string> surface_class_names();

/// Coarser grouping used by the evaluation classifier.
enum class EvalClass : int {
  carpet_rug = 0,
  deck_boardwalk,
  metal,
  pavement_concrete,
  wood,
};
inline constexpr int kNumEvalClasses = 5;

std::string_view eval_class_name(EvalClass c);
std::vector<std::string> eval_class_names();

struct ClassMap {
  std::array<EvalClass, kNumSurfaceClasses> mapping;

  /// carpet+rug and wood+wood_internal merged, everything else 1:1.
  static ClassMap standard();

  EvalClass operator()(SurfaceClass c) const { return mapping[static_cast<int>(c)]; }
};

/// Mono waveform. `label` is a class id whose meaning is given by the
/// owning dataset's class list (surface ids before remapping, eval ids after).
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;
  std::optional<int> label;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

float peak_abs(std::span<const float> samples);

struct LabeledDataset {
  std::vector<AudioClip> clips;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return clips.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;
};

}  // namespace footgan
