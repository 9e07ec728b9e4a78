// tfsep/tests/support.hpp

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

// Shared helpers for the test binaries: toy signals, a tiny synthetic
// two-speaker corpus, temp dirs, and finite-difference gradient checking.

#ifndef TFSEP_TESTS_SUPPORT_H_
#define TFSEP_TESTS_SUPPORT_H_

#include <cmath>
#include <cstdint>
#include <unistd.h>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tfsep/rng.hpp"
#include "tfsep/tape.hpp"
#include "tfsep/tensor.hpp"
#include "tfsep/wav_io.hpp"
#include "tfsep/waveform.hpp"

namespace tfsep {
namespace testing {

inline Waveform make_tone(double freq, double seconds, int rate = 8000,
                          double amp = 0.3, double phase = 0.0) {
  Waveform w;
  w.sample_rate = rate;
  size_t n = static_cast<size_t>(seconds * rate);
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    w.samples[i] =
        amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate +
                       phase);
  return w;
}

inline Waveform make_white_noise(uint64_t seed, double seconds,
                                 int rate = 8000, double amp = 0.3) {
  Waveform w;
  w.sample_rate = rate;
  size_t n = static_cast<size_t>(seconds * rate);
  w.samples.resize(n);
  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) w.samples[i] = amp * rng.normal();
  return w;
}

// Gaussian noise filtered to [f_lo, f_hi] by zeroing DFT bins outside the
// band.  Slow O(n^2) but only used on short test signals.
inline Waveform make_band_noise(uint64_t seed, double seconds, double f_lo,
                                double f_hi, int rate = 8000,
                                double amp = 0.3) {
  Waveform w = make_white_noise(seed, seconds, rate, 1.0);
  size_t n = w.samples.size();
  size_t half = n / 2;
  std::vector<double> re(half + 1, 0.0), im(half + 1, 0.0);
  for (size_t k = 0; k <= half; ++k) {
    double fk = static_cast<double>(k) * rate / static_cast<double>(n);
    if (fk < f_lo || fk > f_hi) continue;
    for (size_t i = 0; i < n; ++i) {
      double ang = -2.0 * M_PI * static_cast<double>(k) *
                   static_cast<double>(i) / static_cast<double>(n);
      re[k] += w.samples[i] * std::cos(ang);
      im[k] += w.samples[i] * std::sin(ang);
    }
  }
  std::vector<double> out(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (size_t k = 0; k <= half; ++k) {
      if (re[k] == 0.0 && im[k] == 0.0) continue;  // out of band
      double kappa = (k == 0 || (n % 2 == 0 && k == half)) ? 1.0 : 2.0;
      double ang = 2.0 * M_PI * static_cast<double>(k) *
                   static_cast<double>(i) / static_cast<double>(n);
      acc += kappa * (re[k] * std::cos(ang) - im[k] * std::sin(ang));
    }
    out[i] = acc / static_cast<double>(n);
  }
  // Normalize to the requested peak.
  double peak = 0.0;
  for (double x : out) peak = std::max(peak, std::fabs(x));
  if (peak > 0.0)
    for (double& x : out) x *= amp / peak;
  w.samples = std::move(out);
  return w;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("tfsep_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& rel) const {
    return (path_ / rel).string();
  }

 private:
  std::filesystem::path path_;
};

// Writes a tiny corpus under root: n_speakers directories, each with
// files_per_speaker one-second-ish utterances.  Even speakers are harmonic
// tones in a low band, odd speakers band-limited noise higher up, so a
// separator can tell them apart quickly.
inline std::vector<std::string> write_toy_corpus(
    const std::filesystem::path& root, int n_speakers, int files_per_speaker,
    double seconds = 1.0, uint64_t seed = 77, int rate = 8000) {
  std::vector<std::string> speaker_dirs;
  Rng rng(mix_seed(seed));
  for (int s = 0; s < n_speakers; ++s) {
    std::filesystem::path dir =
        root / ("spk" + std::string(1, static_cast<char>('a' + s)));
    std::filesystem::create_directories(dir);
    speaker_dirs.push_back(dir.string());
    for (int f = 0; f < files_per_speaker; ++f) {
      Waveform w;
      if (s % 2 == 0) {
        double base = 160.0 + 140.0 * s + rng.uniform(0.0, 120.0);
        w = make_tone(base, seconds, rate, 0.25, rng.uniform(0.0, 6.28));
        Waveform h = make_tone(2.0 * base, seconds, rate, 0.12,
                               rng.uniform(0.0, 6.28));
        for (size_t i = 0; i < w.samples.size(); ++i)
          w.samples[i] += h.samples[i];
      } else {
        double lo = 1200.0 + 500.0 * s + rng.uniform(0.0, 200.0);
        w = make_band_noise(rng.next_u64(), seconds, lo, lo + 900.0, rate,
                            0.3);
      }
      io::write_wav((dir / ("utt_" + std::to_string(f) + ".wav")).string(), w);
    }
  }
  return speaker_dirs;
}

// Central-difference gradient check.  compute_grads must zero the params'
// gradients, run a fresh forward, and call backward; loss runs a fresh
// forward only.  Samples up to max_per_param entries of each param.
struct FdReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

inline FdReport fd_check(const std::function<double()>& loss,
                         const std::function<void()>& compute_grads,
                         std::vector<nn::Param*> params, int max_per_param,
                         double h = 1e-5, uint64_t seed = 42) {
  compute_grads();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (nn::Param* p : params) analytic.push_back(p->grad);

  FdReport rep;
  Rng rng(seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    nn::Param* p = params[pi];
    int64_t n = p->value.numel();
    std::vector<int64_t> picks;
    if (n <= max_per_param) {
      for (int64_t i = 0; i < n; ++i) picks.push_back(i);
    } else {
      for (int i = 0; i < max_per_param; ++i)
        picks.push_back(static_cast<int64_t>(
            rng.uniform_int(static_cast<uint64_t>(n))));
    }
    for (int64_t idx : picks) {
      double old = p->value.data()[idx];
      double step = h * std::max(1.0, std::fabs(old));
      p->value.data()[idx] = old + step;
      double up = loss();
      p->value.data()[idx] = old - step;
      double dn = loss();
      p->value.data()[idx] = old;
      double fd = (up - dn) / (2.0 * step);
      double an = analytic[pi].data()[idx];
      double rel = std::fabs(fd - an) / std::max(std::fabs(fd) + std::fabs(an),
                                                 1e-6);
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace testing
}  // namespace tfsep

#endif  // TFSEP_TESTS_SUPPORT_H_
