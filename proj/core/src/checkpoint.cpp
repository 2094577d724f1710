#include "footgan/checkpoint.hpp"

#include <fstream>

#include "footgan/audio.hpp"
#include "footgan/error.hpp"
#include "footgan/wav.hpp"

namespace footgan {
namespace fs = std::filesystem;
using nlohmann::json;

fs::path sidecar_path(const fs::path& blob) {
  fs::path p = blob;
  p.replace_extension(".json");
  return p;
}

void write_json_file(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::UnreadableFile, path.string() + ": " + e.what());
  }
}

json module_manifest(const std::string& kind, json config, int64_t step, const std::vector<std::string>& classes) {
  return {{"format_version", kCheckpointFormatVersion},
          {"kind", kind},
          {"config", std::move(config)},
          {"step", step},
          {"classes", classes}};
}

void save_module(torch::nn::Module& module, const fs::path& blob, const json& manifest) {
  if (blob.has_parent_path()) fs::create_directories(blob.parent_path());
  try {
    torch::serialize::OutputArchive archive;
    module.save(archive);
    archive.save_to(blob.string());
  } catch (const c10::Error& e) {
    throw Error(Errc::DiskFull, "saving " + blob.string() + ": " + e.what_without_backtrace());
  }
  write_json_file(sidecar_path(blob), manifest);
}

void load_module(torch::nn::Module& module, const fs::path& blob) {
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(blob.string());
    module.load(archive);
  } catch (const c10::Error& e) {
    throw Error(Errc::IncompatibleCheckpoint, "loading " + blob.string() + ": " + e.what_without_backtrace());
  }
}

json read_manifest(const fs::path& blob, const std::string& expected_kind) {
  const fs::path side = sidecar_path(blob);
  if (!fs::exists(blob)) throw Error(Errc::IncompatibleCheckpoint, "missing weight blob " + blob.string());
  if (!fs::exists(side)) throw Error(Errc::IncompatibleCheckpoint, "missing manifest " + side.string());
  json m;
  try {
    m = read_json_file(side);
  } catch (const Error& e) {
    throw Error(Errc::IncompatibleCheckpoint, e.what());
  }
  if (m.value("format_version", -1) != kCheckpointFormatVersion) {
    throw Error(Errc::IncompatibleCheckpoint, "unsupported checkpoint format version");
  }
  if (m.value("kind", std::string()) != expected_kind) {
    throw Error(Errc::IncompatibleCheckpoint,
                "expected a '" + expected_kind + "' checkpoint, found '" + m.value("kind", std::string()) + "'");
  }
  if (!m.contains("config")) throw Error(Errc::IncompatibleCheckpoint, "manifest has no config");
  return m;
}

void save_generator(WaveGanGenerator& g, const fs::path& blob, int64_t step) {
  save_module(*g, blob, module_manifest("generator", g->config(), step, surface_class_names()));
}

WaveGanGenerator load_generator(const fs::path& blob) {
  const json m = read_manifest(blob, "generator");
  if (m.value("classes", std::vector<std::string>{}) != surface_class_names()) {
    throw Error(Errc::IncompatibleCheckpoint, "checkpoint class list differs from the surface classes");
  }
  GeneratorConfig cfg;
  try {
    cfg = m.at("config").get<GeneratorConfig>();
    cfg.validate();
  } catch (const json::exception& e) {
    throw Error(Errc::IncompatibleCheckpoint, std::string("generator config: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::IncompatibleCheckpoint, e.what());
  }
  if (cfg.num_classes != kNumSurfaceClasses) {
    throw Error(Errc::IncompatibleCheckpoint, "generator is not conditioned on the 7 surface classes");
  }
  WaveGanGenerator g(cfg);
  load_module(*g, blob);
  g->eval();
  return g;
}

}  // namespace footgan
