// tfsep/wav_io.cpp

// Copyright 2026  tfsep authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "tfsep/wav_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace tfsep::io {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

void put_tag(std::vector<uint8_t>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: " + path + " is not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const uint8_t* hdr = buf.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    const uint8_t* body = hdr + 8;
    if (pos + 8 + chunk_len > buf.size())
      chunk_len = static_cast<uint32_t>(buf.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (data == nullptr) throw std::runtime_error("read_wav: " + path + " has no data chunk");
  if (channels != 1)
    throw std::runtime_error("read_wav: " + path + " has " +
                             std::to_string(channels) +
                             " channels; only mono input is supported");

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    size_t n = data_len / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t s;
      std::memcpy(&s, data + 2 * i, 2);
      w.samples[i] = static_cast<double>(s) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    size_t n = data_len / 4;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      float s;
      std::memcpy(&s, data + 4 * i, 4);
      w.samples[i] = static_cast<double>(s);
    }
  } else {
    throw std::runtime_error("read_wav: " + path + ": unsupported format (tag " +
                             std::to_string(format) + ", " + std::to_string(bits) +
                             " bits); expected PCM16 or float32");
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& wave, WavFormat format) {
  const size_t n = wave.samples.size();
  const bool f32 = format == WavFormat::kFloat32;
  const uint16_t bytes_per = f32 ? 4 : 2;
  const uint32_t data_len = static_cast<uint32_t>(n * bytes_per);

  std::vector<uint8_t> b;
  b.reserve(44 + data_len);
  put_tag(b, "RIFF");
  put_u32(b, 36 + data_len);
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, f32 ? kFormatFloat : kFormatPcm);
  put_u16(b, 1);  // mono
  put_u32(b, static_cast<uint32_t>(wave.sample_rate));
  put_u32(b, static_cast<uint32_t>(wave.sample_rate) * bytes_per);
  put_u16(b, bytes_per);
  put_u16(b, f32 ? 32 : 16);
  put_tag(b, "data");
  put_u32(b, data_len);

  if (f32) {
    for (size_t i = 0; i < n; ++i) {
      float s = static_cast<float>(wave.samples[i]);
      uint8_t raw[4];
      std::memcpy(raw, &s, 4);
      b.insert(b.end(), raw, raw + 4);
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      double x = wave.samples[i];
      if (x > 1.0) x = 1.0;
      if (x < -1.0) x = -1.0;
      int32_t q = static_cast<int32_t>(std::lrint(x * 32767.0));
      int16_t s = static_cast<int16_t>(q);
      uint8_t raw[2];
      std::memcpy(raw, &s, 2);
      b.insert(b.end(), raw, raw + 2);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("write_wav: short write to " + path);
}

}  // namespace tfsep::io
