#include "footgan/audio.hpp"

#include <algorithm>
#include <cmath>

#include "footgan/error.hpp"

namespace footgan {
namespace {

constexpr std::array<std::string_view, kNumSurfaceClasses> kSurfaceNames = {
    "carpet", "deck", "metal", "pavement", "rug", "wood", "wood_internal"};

constexpr std::array<std::string_view, kNumEvalClasses> kEvalNames = {
    "carpet/rug", "deck/boardwalk", "metal", "pavement/concrete", "wood/wood internal"};

}  // namespace

double dbfs_to_amplitude(double dbfs) { return std::pow(10.0, dbfs / 20.0); }

std::string_view surface_name(SurfaceClass c) { return kSurfaceNames.at(static_cast<int>(c)); }

std::optional<SurfaceClass> surface_from_name(std::string_view name) {
  for (int i = 0; i < kNumSurfaceClasses; ++i) {
    if (kSurfaceNames[i] == name) return static_cast<SurfaceClass>(i);
  }
  return std::nullopt;
}

SurfaceClass surface_from_id(int id) {
  if (id < 0 || id >= kNumSurfaceClasses) {
    throw Error(Errc::InvalidClass, "surface class id " + std::to_string(id) + " outside 0.." +
                                        std::to_string(kNumSurfaceClasses - 1));
  }
  return static_cast<SurfaceClass>(id);
}

std::vector<std::string> surface_class_names() {
  return {kSurfaceNames.begin(), kSurfaceNames.end()};
}

std::string_view eval_class_name(EvalClass c) { return kEvalNames.at(static_cast<int>(c)); }

std::vector<std::string> eval_class_names() { return {kEvalNames.begin(), kEvalNames.end()}; }

ClassMap ClassMap::standard() {
  return ClassMap{{EvalClass::carpet_rug, EvalClass::deck_boardwalk, EvalClass::metal,
                   EvalClass::pavement_concrete, EvalClass::carpet_rug, EvalClass::wood,
                   EvalClass::wood}};
}

float peak_abs(std::span<const float> samples) {
  float peak = 0.0f;
  for (float s : samples) peak = std::max(peak, std::abs(s));
  return peak;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& clip : clips) {
    if (clip.label && *clip.label >= 0 && static_cast<std::size_t>(*clip.label) < counts.size()) {
      ++counts[*clip.label];
    }
  }
  return counts;
}

}  // namespace footgan
