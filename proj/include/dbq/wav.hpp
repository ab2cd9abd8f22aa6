#pragma once

// Minimal mono WAV reader/writer: 16-bit PCM and 32-bit IEEE float.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dbq/biquad.hpp"
#include "dbq/error.hpp"

namespace dbq {

enum class WavFormat { Pcm16, Float32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

inline AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) -> Error { return Error(path + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      format = detail::read_u16(chunk + 8);
      channels = detail::read_u16(chunk + 10);
      rate = detail::read_u32(chunk + 12);
      bits = detail::read_u16(chunk + 22);
      if (format == 0xFFFE && size >= 40) format = detail::read_u16(chunk + 8 + 24);  // extensible sub-format
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (format == 0 || data == nullptr) throw fail("missing fmt or data chunk");
  if (channels != 1) throw fail("only mono files are supported (found " + std::to_string(channels) + " channels)");

  AudioClip clip;
  clip.sample_rate = rate;
  if (format == 1 && bits == 16) {
    clip.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < clip.samples.size(); ++i)
      clip.samples[i] = static_cast<std::int16_t>(detail::read_u16(data + 2 * i)) / 32768.0;
  } else if (format == 3 && bits == 32) {
    clip.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      const std::uint32_t raw = detail::read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &raw, 4);
      clip.samples[i] = f;
    }
  } else {
    throw fail("unsupported sample format (need 16-bit PCM or 32-bit float)");
  }
  return clip;
}

inline void write_wav(const std::string& path, const AudioClip& clip, WavFormat fmt = WavFormat::Float32) {
  const std::uint16_t bits = fmt == WavFormat::Pcm16 ? 16 : 32;
  const std::uint16_t tag = fmt == WavFormat::Pcm16 ? 1 : 3;
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, tag);
  detail::put_u16(out, 1);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * (bits / 8));
  detail::put_u16(out, bits / 8);
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double s : clip.samples) {
    if (fmt == WavFormat::Pcm16) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      const float f = static_cast<float>(s);
      std::uint32_t raw;
      std::memcpy(&raw, &f, 4);
      detail::put_u32(out, raw);
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error("write failed: " + path);
}

}  // namespace dbq
