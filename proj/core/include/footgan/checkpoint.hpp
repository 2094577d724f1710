#pragma once

#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "footgan/generator.hpp"
#include "json.hpp"

namespace footgan {

inline constexpr int kCheckpointFormatVersion = 1;

/// Weight blobs are libtorch archives; each has a JSON sidecar next to it
/// (same stem, .json) describing what the blob contains:
///   {"format_version", "kind", "config", "step", "classes"}.
std::filesystem::path sidecar_path(const std::filesystem::path& blob);

void save_module(torch::nn::Module& module, const std::filesystem::path& blob, const nlohmann::json& manifest);
void load_module(torch::nn::Module& module, const std::filesystem::path& blob);

/// Throws IncompatibleCheckpoint when the sidecar is missing, unparsable,
/// from another format version, or of a different kind than expected.
nlohmann::json read_manifest(const std::filesystem::path& blob, const std::string& expected_kind);

nlohmann::json module_manifest(const std::string& kind, nlohmann::json config, int64_t step,
                               const std::vector<std::string>& classes);

void save_generator(WaveGanGenerator& g, const std::filesystem::path& blob, int64_t step);

/// Rebuilds a generator from its sidecar config and loads the weights. The
/// class list must match the surface classes. The module is put in eval mode.
WaveGanGenerator load_generator(const std::filesystem::path& blob);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace footgan
