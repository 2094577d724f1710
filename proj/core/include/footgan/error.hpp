#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace footgan {

enum class Errc {
  UnreadableFile,
  UnsupportedEncoding,
  InvalidRate,
  ZeroPeak,
  NoOnset,
  UnknownClassDirectory,
  EmptyDataset,
  InvalidClass,
  InvalidFactor,
  InvalidConfig,
  ShapeMismatch,
  StructureMismatch,
  IncompatibleCheckpoint,
  NonFiniteGradient,
  NonFiniteLoss,
  DiskFull,
  ExtractorUnavailable,
  ExtractorMismatch,
  DegenerateCovariance,
  DegenerateInput,
  InsufficientData,
  InvalidDistribution,
  EmptyClipPool,
  MissingCondition,
  SchemaViolation,
  NoDataRetained,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the toolkit carries one of the codes above so
/// callers (and tests) can branch on the kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace footgan
