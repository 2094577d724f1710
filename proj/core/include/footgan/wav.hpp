#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace footgan {

enum class WavEncoding { pcm_u8, pcm_s16, pcm_s24, pcm_s32, float32, float64 };

/// Decoded WAV contents, interleaved, scaled to [-1, 1].
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  WavEncoding encoding = WavEncoding::pcm_s16;
  std::vector<float> interleaved;

  std::size_t frames() const { return channels > 0 ? interleaved.size() / channels : 0; }
};

WavData decode_wav(std::span<const std::uint8_t> bytes);
WavData read_wav(const std::filesystem::path& path);

/// Mono 16-bit PCM. Samples are clamped to [-1, 1] and scaled by 32767.
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);
void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                     int sample_rate);

/// Writes `bytes` to `path`, raising Errc::DiskFull if the stream fails.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace footgan
