// tfsep/waveform.hpp

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

#pragma once

#include <cstddef>
#include <vector>

namespace tfsep {

/// Mono sampled audio, linear amplitude nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;

  size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

/// Mean squared amplitude.
inline double signal_power(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double s = 0.0;
  for (double x : w.samples) s += x * x;
  return s / static_cast<double>(w.samples.size());
}

inline double peak_abs(const Waveform& w) {
  double p = 0.0;
  for (double x : w.samples) {
    double a = x < 0 ? -x : x;
    if (a > p) p = a;
  }
  return p;
}

}  // namespace tfsep
