// tfsep/wav_io.hpp

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

#include <string>

#include "tfsep/waveform.hpp"

namespace tfsep::io {

enum class WavFormat { kPcm16, kFloat32 };

/// Reads a mono RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit).
/// Multi-channel input is rejected with an explicit error.
Waveform read_wav(const std::string& path);

/// Writes a mono WAV file in the requested sample format.
void write_wav(const std::string& path, const Waveform& wave,
               WavFormat format = WavFormat::kFloat32);

}  // namespace tfsep::io
