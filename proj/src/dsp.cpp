// tfsep/dsp.cpp

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

#include "tfsep/dsp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tfsep::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate(const StftConfig& cfg) {
  if (cfg.frame_len <= 0) throw std::invalid_argument("StftConfig: frame_len must be positive");
  if (cfg.hop <= 0 || cfg.hop > cfg.frame_len)
    throw std::invalid_argument("StftConfig: hop must satisfy 0 < hop <= frame_len");
}

// Tables of cos/sin(2*pi*k*n/L) for the one-sided transform, [bins x L].
struct DftTables {
  int len;
  int bins;
  std::vector<double> cos_t;
  std::vector<double> sin_t;

  explicit DftTables(int L) : len(L), bins(L / 2 + 1) {
    cos_t.resize(static_cast<size_t>(bins) * L);
    sin_t.resize(static_cast<size_t>(bins) * L);
    for (int k = 0; k < bins; ++k) {
      for (int n = 0; n < L; ++n) {
        double a = 2.0 * kPi * k * n / L;
        cos_t[static_cast<size_t>(k) * L + n] = std::cos(a);
        sin_t[static_cast<size_t>(k) * L + n] = std::sin(a);
      }
    }
  }
};

}  // namespace

std::vector<double> sqrt_hann_window(int len) {
  std::vector<double> w(static_cast<size_t>(len));
  for (int n = 0; n < len; ++n) w[static_cast<size_t>(n)] = std::sin(kPi * n / len);
  return w;
}

int frame_count(size_t len, const StftConfig& cfg) {
  validate(cfg);
  if (len < static_cast<size_t>(cfg.frame_len))
    throw std::invalid_argument("frame_count: signal shorter than one frame (" +
                                std::to_string(len) + " < " +
                                std::to_string(cfg.frame_len) + " samples)");
  return static_cast<int>((len - cfg.frame_len) / cfg.hop) + 1;
}

Tensor frame_signal(const Waveform& wave, const StftConfig& cfg) {
  int t_frames = frame_count(wave.size(), cfg);
  Tensor out({t_frames, cfg.frame_len});
  for (int t = 0; t < t_frames; ++t) {
    const double* src = wave.samples.data() + static_cast<size_t>(t) * cfg.hop;
    double* dst = out.data() + static_cast<int64_t>(t) * cfg.frame_len;
    for (int n = 0; n < cfg.frame_len; ++n) dst[n] = src[n];
  }
  return out;
}

Spectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  Tensor frames = frame_signal(wave, cfg);
  const int t_frames = static_cast<int>(frames.rows());
  const int L = cfg.frame_len;
  const std::vector<double> win = sqrt_hann_window(L);
  const DftTables dft(L);

  Spectrogram spec;
  spec.frames = t_frames;
  spec.bins = cfg.bins();
  spec.frame_len = L;
  spec.hop = cfg.hop;
  spec.sample_rate = wave.sample_rate;
  spec.values.resize(static_cast<size_t>(t_frames) * spec.bins);

  std::vector<double> wx(static_cast<size_t>(L));
  for (int t = 0; t < t_frames; ++t) {
    const double* f = frames.data() + static_cast<int64_t>(t) * L;
    for (int n = 0; n < L; ++n) wx[static_cast<size_t>(n)] = f[n] * win[static_cast<size_t>(n)];
    for (int k = 0; k < spec.bins; ++k) {
      const double* ct = dft.cos_t.data() + static_cast<size_t>(k) * L;
      const double* st = dft.sin_t.data() + static_cast<size_t>(k) * L;
      double re = 0.0, im = 0.0;
      for (int n = 0; n < L; ++n) {
        re += wx[static_cast<size_t>(n)] * ct[n];
        im -= wx[static_cast<size_t>(n)] * st[n];
      }
      spec.at(t, k) = {re, im};
    }
  }
  return spec;
}

Tensor log_magnitude(const Spectrogram& spec, double floor_value) {
  if (!(floor_value > 0.0))
    throw std::invalid_argument("log_magnitude: floor must be > 0");
  Tensor out({spec.frames, spec.bins});
  for (int t = 0; t < spec.frames; ++t)
    for (int k = 0; k < spec.bins; ++k) {
      double m = std::abs(spec.at(t, k));
      out.at(t, k) = std::log(m > floor_value ? m : floor_value);
    }
  return out;
}

Tensor magnitude(const Spectrogram& spec) {
  Tensor out({spec.frames, spec.bins});
  for (int t = 0; t < spec.frames; ++t)
    for (int k = 0; k < spec.bins; ++k) out.at(t, k) = std::abs(spec.at(t, k));
  return out;
}

Tensor phase(const Spectrogram& spec) {
  Tensor out({spec.frames, spec.bins});
  for (int t = 0; t < spec.frames; ++t)
    for (int k = 0; k < spec.bins; ++k)
      out.at(t, k) = std::arg(spec.at(t, k));
  return out;
}

Waveform istft(const Tensor& mag, const Tensor& phase, const StftConfig& cfg,
               size_t out_len, int sample_rate) {
  validate(cfg);
  if (mag.ndim() != 2 || !mag.same_shape(phase))
    throw std::invalid_argument("istft: magnitude/phase shape mismatch");
  const int bins = cfg.bins();
  if (mag.cols() != bins)
    throw std::invalid_argument("istft: expected " + std::to_string(bins) +
                                " bins, got " + std::to_string(mag.cols()));
  const int t_frames = static_cast<int>(mag.rows());
  const int L = cfg.frame_len;
  const std::vector<double> win = sqrt_hann_window(L);

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(out_len, 0.0);

  // One-sided expansion: interior bins carry conjugate pairs, so weight 2;
  // DC and Nyquist weight 1.
  std::vector<double> weight(static_cast<size_t>(bins), 2.0);
  weight.front() = 1.0;
  if (L % 2 == 0) weight.back() = 1.0;

  std::vector<double> frame(static_cast<size_t>(L));
  for (int t = 0; t < t_frames; ++t) {
    for (int n = 0; n < L; ++n) {
      double acc = 0.0;
      for (int k = 0; k < bins; ++k) {
        double ang = 2.0 * kPi * k * n / L + phase.at(t, k);
        acc += weight[static_cast<size_t>(k)] * mag.at(t, k) * std::cos(ang);
      }
      frame[static_cast<size_t>(n)] = acc / L * win[static_cast<size_t>(n)];
    }
    size_t base = static_cast<size_t>(t) * cfg.hop;
    for (int n = 0; n < L; ++n) {
      size_t idx = base + static_cast<size_t>(n);
      if (idx < out_len) out.samples[idx] += frame[static_cast<size_t>(n)];
    }
  }
  return out;
}

Waveform overlap_add(const Tensor& frames, int hop, size_t out_len,
                     int sample_rate) {
  if (frames.ndim() != 2) throw std::invalid_argument("overlap_add: frames must be 2-D");
  if (hop <= 0) throw std::invalid_argument("overlap_add: hop must be positive");
  const int t_frames = static_cast<int>(frames.rows());
  const int L = static_cast<int>(frames.cols());

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(out_len, 0.0);
  for (int t = 0; t < t_frames; ++t) {
    size_t base = static_cast<size_t>(t) * static_cast<size_t>(hop);
    const double* f = frames.data() + static_cast<int64_t>(t) * L;
    for (int n = 0; n < L; ++n) {
      size_t idx = base + static_cast<size_t>(n);
      if (idx < out_len) out.samples[idx] += f[n];
    }
  }
  return out;
}

}  // namespace tfsep::dsp
