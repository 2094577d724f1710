#include "footgan/embeddings.hpp"

#include <cstdlib>

#include <torch/script.h>

#include "footgan/error.hpp"

namespace footgan {
namespace fs = std::filesystem;

std::string to_string(ExtractorTag t) {
  switch (t) {
    case ExtractorTag::vggish_like: return "vggish_like";
    case ExtractorTag::inception_variant: return "inception_variant";
    case ExtractorTag::openl3_env_mel128_512: return "openl3_env_mel128_512";
    case ExtractorTag::log_mel_stats: return "log_mel_stats";
  }
  return "unknown";
}

ExtractorTag extractor_from_string(const std::string& s) {
  for (auto t : {ExtractorTag::vggish_like, ExtractorTag::inception_variant, ExtractorTag::openl3_env_mel128_512,
                 ExtractorTag::log_mel_stats}) {
    if (to_string(t) == s) return t;
  }
  throw Error(Errc::InvalidConfig, "unknown extractor '" + s + "'");
}

int expected_dim(ExtractorTag tag) {
  switch (tag) {
    case ExtractorTag::vggish_like: return 128;
    case ExtractorTag::openl3_env_mel128_512: return 512;
    case ExtractorTag::log_mel_stats: return 2 * MelConfig{}.n_mels;
    case ExtractorTag::inception_variant: return -1;
  }
  return -1;
}

EmbeddingSet EmbeddingExtractor::extract(const std::vector<AudioClip>& clips, const std::string& source,
                                         int batch_size) {
  EmbeddingSet set;
  set.extractor = tag();
  set.source = source;
  set.vectors.resize(static_cast<Eigen::Index>(clips.size()), dim());
  torch::NoGradGuard no_grad;
  for (size_t start = 0; start < clips.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(clips.size(), start + static_cast<size_t>(batch_size));
    std::vector<AudioClip> chunk(clips.begin() + static_cast<std::ptrdiff_t>(start),
                                 clips.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& c : chunk) {
      if (c.sample_rate != kSampleRate) {
        throw Error(Errc::InvalidRate, "embedding input must be 16 kHz, got " + std::to_string(c.sample_rate));
      }
    }
    auto e = embed_batch(stack_clips(chunk)).to(torch::kDouble).contiguous();
    if (e.dim() != 2 || e.size(0) != static_cast<int64_t>(chunk.size()) || e.size(1) != dim()) {
      throw Error(Errc::ExtractorMismatch, to_string(tag()) + " returned shape " + c10::str(e.sizes()));
    }
    if (!torch::isfinite(e).all().item<bool>()) {
      throw Error(Errc::DegenerateInput, to_string(tag()) + " produced non-finite embeddings");
    }
    const double* p = e.data_ptr<double>();
    for (int64_t i = 0; i < e.size(0); ++i) {
      for (int64_t j = 0; j < e.size(1); ++j) {
        set.vectors(static_cast<Eigen::Index>(start) + i, j) = p[i * e.size(1) + j];
      }
    }
  }
  return set;
}

LogMelStatsExtractor::LogMelStatsExtractor(MelConfig cfg) : cfg_(cfg) {}

torch::Tensor LogMelStatsExtractor::embed_batch(const torch::Tensor& audio) {
  auto m = log_mel_spectrogram(audio, cfg_);
  return torch::cat({m.mean(2), m.std(2, /*unbiased=*/false)}, 1);
}

struct TorchScriptExtractor::Impl {
  torch::jit::script::Module module;
};

TorchScriptExtractor::TorchScriptExtractor(ExtractorTag tag, const fs::path& model_file)
    : tag_(tag), dim_(expected_dim(tag)), impl_(std::make_unique<Impl>()) {
  if (!fs::exists(model_file)) {
    throw Error(Errc::ExtractorUnavailable, to_string(tag) + " model not found at " + model_file.string());
  }
  try {
    impl_->module = torch::jit::load(model_file.string());
  } catch (const c10::Error& e) {
    throw Error(Errc::ExtractorUnavailable, "cannot load " + model_file.string() + ": " + e.what_without_backtrace());
  }
  impl_->module.eval();
  if (dim_ < 0) {
    torch::NoGradGuard no_grad;
    dim_ = static_cast<int>(impl_->module.forward({torch::zeros({1, kClipLength})}).toTensor().size(1));
  }
}

TorchScriptExtractor::~TorchScriptExtractor() = default;

torch::Tensor TorchScriptExtractor::embed_batch(const torch::Tensor& audio) {
  return impl_->module.forward({audio}).toTensor();
}

ClassifierExtractor::ClassifierExtractor(ClassifierModel model) : model_(std::move(model)) { model_.net->eval(); }

torch::Tensor ClassifierExtractor::embed_batch(const torch::Tensor& audio) { return model_.net->embed(audio); }

ExtractorAssets ExtractorAssets::from_environment() {
  ExtractorAssets a;
  if (const char* dir = std::getenv("FOOTGAN_MODEL_DIR"); dir != nullptr && *dir != '\0') a.model_dir = dir;
  return a;
}

fs::path ExtractorAssets::model_file(ExtractorTag tag) const {
  if (!model_dir) {
    throw Error(Errc::ExtractorUnavailable,
                "no model directory configured for " + to_string(tag) + " (set FOOTGAN_MODEL_DIR)");
  }
  return *model_dir / (to_string(tag) + ".pt");
}

std::unique_ptr<EmbeddingExtractor> make_extractor(ExtractorTag tag, const ExtractorAssets& assets) {
  switch (tag) {
    case ExtractorTag::log_mel_stats: return std::make_unique<LogMelStatsExtractor>();
    case ExtractorTag::inception_variant:
      if (!assets.classifier) throw Error(Errc::ExtractorUnavailable, "inception_variant requires a trained classifier");
      return std::make_unique<ClassifierExtractor>(*assets.classifier);
    case ExtractorTag::vggish_like:
    case ExtractorTag::openl3_env_mel128_512: return std::make_unique<TorchScriptExtractor>(tag, assets.model_file(tag));
  }
  throw Error(Errc::ExtractorUnavailable, "unsupported extractor");
}

}  // namespace footgan
