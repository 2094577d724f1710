#include "footgan/error.hpp"

namespace footgan {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnreadableFile: return "UnreadableFile";
    case Errc::UnsupportedEncoding: return "UnsupportedEncoding";
    case Errc::InvalidRate: return "InvalidRate";
    case Errc::ZeroPeak: return "ZeroPeak";
    case Errc::NoOnset: return "NoOnset";
    case Errc::UnknownClassDirectory: return "UnknownClassDirectory";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InvalidClass: return "InvalidClass";
    case Errc::InvalidFactor: return "InvalidFactor";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::StructureMismatch: return "StructureMismatch";
    case Errc::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::DiskFull: return "DiskFull";
    case Errc::ExtractorUnavailable: return "ExtractorUnavailable";
    case Errc::ExtractorMismatch: return "ExtractorMismatch";
    case Errc::DegenerateCovariance: return "DegenerateCovariance";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::EmptyClipPool: return "EmptyClipPool";
    case Errc::MissingCondition: return "MissingCondition";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::NoDataRetained: return "NoDataRetained";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace footgan
