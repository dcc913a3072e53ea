// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dkws {

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("AudioBuffer: sample_rate must be > 0");
  for (double s : samples)
    if (!std::isfinite(s)) throw std::invalid_argument("AudioBuffer: non-finite sample");
}

double power(const AudioBuffer& a) {
  if (a.samples.empty()) return 0.0;
  double s = 0.0;
  for (double x : a.samples) s += x * x;
  return s / static_cast<double>(a.samples.size());
}

double peak(const AudioBuffer& a) {
  double p = 0.0;
  for (double x : a.samples) p = std::max(p, std::fabs(x));
  return p;
}

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::ofstream& f, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}
void wr_u16(std::ofstream& f, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

AudioBuffer ReadWav(const std::string& path, int expected_rate) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("ReadWav: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("ReadWav: not a RIFF/WAVE file: " + path);

  uint16_t fmt = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    uint32_t len = rd_u32(&buf[pos + 4]);
    if (std::memcmp(&buf[pos], "fmt ", 4) == 0 && len >= 16) {
      fmt = rd_u16(&buf[pos + 8]);
      channels = rd_u16(&buf[pos + 10]);
      rate = rd_u32(&buf[pos + 12]);
      bits = rd_u16(&buf[pos + 22]);
    } else if (std::memcmp(&buf[pos], "data", 4) == 0) {
      data = &buf[pos + 8];
      data_len = std::min<uint32_t>(len, static_cast<uint32_t>(buf.size() - pos - 8));
    }
    pos += 8 + len + (len & 1);
  }
  if (!data) throw std::runtime_error("ReadWav: no data chunk in " + path);
  if (channels != 1) throw std::runtime_error("ReadWav: mono only, got " +
                                              std::to_string(channels) + " channels: " + path);
  if (expected_rate != 0 && static_cast<int>(rate) != expected_rate)
    throw std::runtime_error("ReadWav: sample rate " + std::to_string(rate) + " != expected " +
                             std::to_string(expected_rate) + " (resampling unsupported): " + path);

  AudioBuffer a;
  a.sample_rate = static_cast<int>(rate);
  if (fmt == 1 && bits == 16) {
    size_t n = data_len / 2;
    a.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t s = static_cast<int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
      a.samples[i] = static_cast<double>(s) / 32768.0;
    }
  } else if (fmt == 3 && bits == 32) {
    size_t n = data_len / 4;
    a.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = rd_u32(&data[4 * i]);
      float fl;
      std::memcpy(&fl, &u, 4);
      a.samples[i] = static_cast<double>(fl);
    }
  } else {
    throw std::runtime_error("ReadWav: unsupported format (need PCM16 or float32): " + path);
  }
  return a;
}

void WriteWav(const std::string& path, const AudioBuffer& a) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("WriteWav: cannot open " + path);
  uint32_t data_len = static_cast<uint32_t>(a.samples.size() * 4);
  f.write("RIFF", 4);
  wr_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 3);  // IEEE float
  wr_u16(f, 1);
  wr_u32(f, static_cast<uint32_t>(a.sample_rate));
  wr_u32(f, static_cast<uint32_t>(a.sample_rate) * 4);
  wr_u16(f, 4);
  wr_u16(f, 32);
  f.write("data", 4);
  wr_u32(f, data_len);
  for (double s : a.samples) {
    float fl = static_cast<float>(s);
    uint32_t u;
    std::memcpy(&u, &fl, 4);
    uint8_t b[4] = {static_cast<uint8_t>(u), static_cast<uint8_t>(u >> 8),
                    static_cast<uint8_t>(u >> 16), static_cast<uint8_t>(u >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  }
}

}  // namespace dkws
