#include "footgan/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "footgan/error.hpp"

namespace footgan {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = bytes_[pos_] | (bytes_[pos_ + 1] << 8) | (bytes_[pos_ + 2] << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16() {
    require(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string tag() {
    require(4);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

 private:
  void require(std::size_t n) const {
    if (!has(n)) throw Error(Errc::UnreadableFile, "truncated WAV header");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

float decode_sample(const std::uint8_t* p, WavEncoding enc) {
  switch (enc) {
    case WavEncoding::pcm_u8:
      return (static_cast<float>(p[0]) - 128.0f) / 128.0f;
    case WavEncoding::pcm_s16: {
      auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return static_cast<float>(v) / 32768.0f;
    }
    case WavEncoding::pcm_s24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;
      return static_cast<float>(static_cast<double>(v) / 8388608.0);
    }
    case WavEncoding::pcm_s32: {
      auto v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16) |
                                         (static_cast<std::uint32_t>(p[3]) << 24));
      return static_cast<float>(static_cast<double>(v) / 2147483648.0);
    }
    case WavEncoding::float32: {
      std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      return std::bit_cast<float>(bits);
    }
    case WavEncoding::float64: {
      std::uint64_t bits = 0;
      for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
      return static_cast<float>(std::bit_cast<double>(bits));
    }
  }
  return 0.0f;
}

int bytes_per_sample(WavEncoding enc) {
  switch (enc) {
    case WavEncoding::pcm_u8: return 1;
    case WavEncoding::pcm_s16: return 2;
    case WavEncoding::pcm_s24: return 3;
    case WavEncoding::pcm_s32: return 4;
    case WavEncoding::float32: return 4;
    case WavEncoding::float64: return 8;
  }
  return 0;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

WavData decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.has(12) || r.tag() != "RIFF") throw Error(Errc::UnreadableFile, "missing RIFF header");
  r.u32();
  if (r.tag() != "WAVE") throw Error(Errc::UnreadableFile, "missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  while (r.has(8)) {
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    const std::size_t body = r.pos();
    if (body + size > bytes.size()) {
      if (id == "data") {
        // Tolerate streams whose data chunk size was never patched.
        data = bytes.subspan(body);
        have_data = true;
        break;
      }
      throw Error(Errc::UnreadableFile, "chunk '" + id + "' overruns file");
    }
    if (id == "fmt ") {
      if (size < 16) throw Error(Errc::UnreadableFile, "fmt chunk too small");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();
      r.u16();
      bits = r.u16();
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(Errc::UnreadableFile, "extensible fmt chunk too small");
        r.u16();
        r.u16();
        r.u32();
        format = r.u16();
      }
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    r.seek(body + size + (size & 1u));
  }

  if (!have_fmt || !have_data) throw Error(Errc::UnreadableFile, "missing fmt or data chunk");
  if (channels == 0) throw Error(Errc::UnreadableFile, "zero channels");
  if (rate == 0) throw Error(Errc::UnreadableFile, "zero sample rate");

  WavData out;
  if (format == kFormatPcm) {
    switch (bits) {
      case 8: out.encoding = WavEncoding::pcm_u8; break;
      case 16: out.encoding = WavEncoding::pcm_s16; break;
      case 24: out.encoding = WavEncoding::pcm_s24; break;
      case 32: out.encoding = WavEncoding::pcm_s32; break;
      default:
        throw Error(Errc::UnsupportedEncoding, "PCM with " + std::to_string(bits) + " bits");
    }
  } else if (format == kFormatFloat) {
    if (bits == 32) out.encoding = WavEncoding::float32;
    else if (bits == 64) out.encoding = WavEncoding::float64;
    else throw Error(Errc::UnsupportedEncoding, "float with " + std::to_string(bits) + " bits");
  } else {
    throw Error(Errc::UnsupportedEncoding, "format tag " + std::to_string(format));
  }

  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  const int bps = bytes_per_sample(out.encoding);
  const std::size_t frame_bytes = static_cast<std::size_t>(bps) * channels;
  const std::size_t frames = data.size() / frame_bytes;
  out.interleaved.resize(frames * channels);
  for (std::size_t i = 0; i < out.interleaved.size(); ++i) {
    float s = decode_sample(data.data() + i * bps, out.encoding);
    if (!std::isfinite(s)) throw Error(Errc::UnreadableFile, "non-finite float sample");
    out.interleaved[i] = std::clamp(s, -1.0f, 1.0f);
  }
  return out;
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : samples) {
    const float c = std::isfinite(s) ? std::clamp(s, -1.0f, 1.0f) : 0.0f;
    const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0f));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::DiskFull, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(Errc::DiskFull, "short write to " + path.string());
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                     int sample_rate) {
  write_file_bytes(path, encode_wav_pcm16(samples, sample_rate));
}

}  // namespace footgan
