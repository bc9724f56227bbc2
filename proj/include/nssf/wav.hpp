/* Copyright 2026 The nssf Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nssf/audio.hpp"
#include "nssf/errors.hpp"

// RIFF/WAVE, little-endian. Supported sample formats: PCM 16-bit
// (format tag 1) and IEEE float 32-bit (format tag 3). PCM16 scaling is
// bit-exact value/32768.

namespace nssf {

namespace wav_detail {

inline std::uint32_t rd_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t rd_u16(const unsigned char* p) {
  return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
}
inline void wr_u32(std::string& s, std::uint32_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 24) & 0xff));
}
inline void wr_u16(std::string& s, std::uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}

}  // namespace wav_detail

// Reads a WAV file; returns all channels. Throws UnsupportedFormat on
// anything but mono-or-multichannel PCM16 / float32.
inline MultichannelAudio read_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw UnsupportedFormat(path + " is not a RIFF/WAVE file");

  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    std::uint32_t chunk_len = rd_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_len > buf.size()) break;
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      fmt_tag = rd_u16(body);
      channels = rd_u16(body + 2);
      rate = rd_u32(body + 4);
      bits = rd_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!data || channels == 0) throw UnsupportedFormat(path + ": missing fmt/data chunk");
  const bool pcm16 = (fmt_tag == 1 && bits == 16);
  const bool f32 = (fmt_tag == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw UnsupportedFormat(path + ": only PCM16 and float32 supported");

  const std::size_t bytes_per = bits / 8;
  const std::size_t frames = data_len / (bytes_per * channels);
  MultichannelAudio out;
  out.sample_rate = static_cast<int>(rate);
  out.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * bytes_per;
      if (pcm16) {
        std::int16_t v = static_cast<std::int16_t>(rd_u16(p));
        out.channels[c][i] = static_cast<double>(v) / 32768.0;
      } else {
        std::uint32_t u = rd_u32(p);
        float fv;
        std::memcpy(&fv, &u, 4);
        out.channels[c][i] = static_cast<double>(fv);
      }
    }
  }
  return out;
}

enum class WavFormat { kFloat32, kPcm16 };

inline void write_wav(const std::string& path, const MultichannelAudio& audio,
                      WavFormat format = WavFormat::kFloat32) {
  using namespace wav_detail;
  const int channels = audio.num_channels();
  if (channels == 0) throw IoError("write_wav: no channels");
  const std::size_t frames = audio.size();
  const std::uint16_t bits = format == WavFormat::kFloat32 ? 32 : 16;
  const std::uint16_t tag = format == WavFormat::kFloat32 ? 3 : 1;
  const std::uint32_t byte_rate = audio.sample_rate * channels * bits / 8;
  const std::uint16_t block_align = channels * bits / 8;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(frames * channels * bits / 8);
  const bool fact = tag == 3;  // fact chunk expected for non-PCM

  std::string s;
  s.reserve(60 + data_len);
  s += "RIFF";
  wr_u32(s, 4 + (8 + 16) + (fact ? 12 : 0) + 8 + data_len);
  s += "WAVEfmt ";
  wr_u32(s, 16);
  wr_u16(s, tag);
  wr_u16(s, static_cast<std::uint16_t>(channels));
  wr_u32(s, static_cast<std::uint32_t>(audio.sample_rate));
  wr_u32(s, byte_rate);
  wr_u16(s, block_align);
  wr_u16(s, bits);
  if (fact) {
    s += "fact";
    wr_u32(s, 4);
    wr_u32(s, static_cast<std::uint32_t>(frames));
  }
  s += "data";
  wr_u32(s, data_len);
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      double v = audio.channels[c][i];
      if (tag == 3) {
        float fv = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &fv, 4);
        wr_u32(s, u);
      } else {
        double scaled = v * 32768.0;
        if (scaled > 32767.0) scaled = 32767.0;
        if (scaled < -32768.0) scaled = -32768.0;
        wr_u16(s, static_cast<std::uint16_t>(
                      static_cast<std::int16_t>(std::lrint(scaled))));
      }
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("short write to " + path);
}

inline void write_wav(const std::string& path, const AudioSignal& mono,
                      WavFormat format = WavFormat::kFloat32) {
  MultichannelAudio m;
  m.sample_rate = mono.sample_rate;
  m.channels.push_back(mono.samples);
  write_wav(path, m, format);
}

}  // namespace nssf
