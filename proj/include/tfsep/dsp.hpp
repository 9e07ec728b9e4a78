// tfsep/dsp.hpp

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

#include <complex>
#include <cstddef>
#include <vector>

#include "tfsep/tensor.hpp"
#include "tfsep/waveform.hpp"

namespace tfsep::dsp {

/// Analysis/synthesis framing parameters. The window is fixed to the
/// square-root Hann (periodic form), whose square satisfies constant
/// overlap-add at hop = frame_len / 2.
struct StftConfig {
  int frame_len = 20;  // 2.5 ms at 8 kHz
  int hop = 10;

  int bins() const { return frame_len / 2 + 1; }  // one-sided spectrum
};

/// Complex one-sided spectrogram, row-major [frames x bins].
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  int frame_len = 0;
  int hop = 0;
  int sample_rate = 0;
  std::vector<std::complex<double>> values;

  std::complex<double>& at(int t, int k) {
    return values[static_cast<size_t>(t) * bins + k];
  }
  std::complex<double> at(int t, int k) const {
    return values[static_cast<size_t>(t) * bins + k];
  }
};

/// Periodic square-root Hann: w[n] = sin(pi * n / len).
std::vector<double> sqrt_hann_window(int len);

/// Number of whole frames: floor((len - frame_len) / hop) + 1.
/// Throws std::invalid_argument when the signal is shorter than one frame.
int frame_count(size_t len, const StftConfig& cfg);

/// Slice into overlapping unwindowed frames, [T x frame_len]. Frame t starts
/// at sample t * hop; trailing samples that do not fill a frame are dropped.
Tensor frame_signal(const Waveform& wave, const StftConfig& cfg);

/// Windowed one-sided DFT of each frame (unnormalized forward transform).
Spectrogram stft(const Waveform& wave, const StftConfig& cfg);

/// Elementwise log(max(|value|, floor)); natural log. floor must be > 0.
Tensor log_magnitude(const Spectrogram& spec, double floor_value);

/// Magnitude and phase of a spectrogram, each [T x bins].
Tensor magnitude(const Spectrogram& spec);
Tensor phase(const Spectrogram& spec);

/// Inverse one-sided DFT of mag .* exp(i*phase) per frame (1/frame_len
/// normalization), synthesis-windowed with the square-root Hann and
/// overlap-added at the hop. Output is truncated or zero-padded to out_len.
Waveform istft(const Tensor& mag, const Tensor& phase, const StftConfig& cfg,
               size_t out_len, int sample_rate);

/// Sum frames [T x frame_len] at stride hop into a waveform of length out_len.
Waveform overlap_add(const Tensor& frames, int hop, size_t out_len,
                     int sample_rate);

}  // namespace tfsep::dsp
