// tfsep/mixer.hpp

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

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tfsep/waveform.hpp"

namespace tfsep::mix {

/// Sentinel for "no noise": requested noise SNR of +infinity.
inline constexpr double kNoiseDisabled = std::numeric_limits<double>::infinity();

/// Provenance of one synthetic mixture. Gains are the final linear scales
/// applied to each source (peak normalization folded in), so the emitted
/// audio is reproducible from the record alone.
struct MixtureRecord {
  std::vector<std::string> source_paths;
  std::vector<double> gains;
  double pair_snr_db = 0.0;
  std::string noise_path;                 // empty when no noise
  double noise_snr_db = kNoiseDisabled;
  uint64_t seed = 0;
  int64_t out_len = 0;
};

struct Manifest {
  int sample_rate = 8000;
  std::string split = "train";
  std::vector<MixtureRecord> records;
};

struct MixPairResult {
  Waveform mixture;
  std::array<Waveform, 2> sources;  // already scaled; they sum to the mixture
  double gain2 = 1.0;               // scale applied to the second source
};

/// Rescales s2 so the post-mix SNR of s1 vs the scaled s2 equals snr_db,
/// then sums. Inputs longer than the other are truncated to the common
/// (minimum) length. Throws on zero-power sources or sample-rate mismatch.
MixPairResult mix_pair(const Waveform& s1, const Waveform& s2, double snr_db);

/// Adds a noise segment at the requested SNR. The segment offset within
/// `noise` is drawn from `seed`. snr_db == kNoiseDisabled returns the
/// mixture unchanged. Throws when the noise is shorter than the mixture or
/// the chosen segment has zero power.
Waveform add_noise(const Waveform& mixture, const Waveform& noise,
                   double snr_db, uint64_t seed);

/// Band-limited (windowed-sinc) resampling.
/// Output length = round(len * target_rate / source_rate).
Waveform resample(const Waveform& wave, int target_rate);

struct BuildOptions {
  int count = 0;
  std::string split = "train";
  uint64_t seed = 0;
  double snr_lo_db = -5.0;
  double snr_hi_db = 5.0;
  std::string noise_dir;                  // empty = clean mixtures
  double noise_snr_db = kNoiseDisabled;
  int sample_rate = 8000;
};

/// Plans `count` two-speaker mixtures from the corpus directories. Speaker
/// labels come from the immediate parent directory of each file (or, for
/// flat corpora, the filename prefix before the first '_'). The same seed
/// across splits keeps test-split speakers disjoint from train/valid when
/// the corpus has at least four speakers. Deterministic given the corpus
/// listing and seed.
Manifest build_manifest(const std::vector<std::string>& corpus_dirs,
                        const BuildOptions& options);

struct RecordAudio {
  Waveform mixture;
  std::vector<Waveform> sources;
};

/// Regenerates the audio of one record exactly as it was planned: load,
/// resample, truncate to out_len, apply the recorded gains, sum, and add
/// seeded noise when the record carries one.
RecordAudio synthesize_record(const MixtureRecord& record, int sample_rate);

/// JSON-lines manifest serialization. The first line is a header object
/// (format version, sample rate, split); each following line is one record.
void write_manifest(const Manifest& manifest, const std::string& path);
Manifest read_manifest(const std::string& path);

/// Basename stem for the emitted audio of record `index`
/// (e.g. "train_00003"); audio files live next to the manifest as
/// <stem>_mix.wav and <stem>_s<i>.wav.
std::string record_stem(const Manifest& manifest, int index);

/// Loads the emitted audio for a record, falling back to synthesize_record
/// when the audio files are not present next to the manifest.
RecordAudio load_record_audio(const Manifest& manifest,
                              const std::string& manifest_dir, int index);

}  // namespace tfsep::mix
