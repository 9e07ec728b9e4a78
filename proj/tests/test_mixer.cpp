// tfsep/tests/test_mixer.cpp

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

#include "tfsep/mixer.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "tfsep/rng.hpp"
#include "tfsep/wav_io.hpp"
#include "tfsep/waveform.hpp"

using namespace tfsep;
using namespace tfsep::testing;

namespace {

double snr_db_of(const Waveform& sig, const Waveform& ref) {
  return 10.0 * std::log10(signal_power(sig) / signal_power(ref));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("mix_pair hits the requested SNR exactly") {
  Waveform a = make_tone(440.0, 0.5);
  Waveform b = make_white_noise(9, 0.5);
  for (double snr : {-5.0, 0.0, 2.5, 5.0}) {
    mix::MixPairResult r = mix::mix_pair(a, b, snr);
    CHECK(snr_db_of(r.sources[0], r.sources[1]) == doctest::Approx(snr).epsilon(1e-12));
    // Sources sum to the mixture sample for sample.
    REQUIRE(r.mixture.size() == r.sources[0].size());
    for (size_t i = 0; i < r.mixture.size(); ++i)
      CHECK(r.mixture.samples[i] ==
            doctest::Approx(r.sources[0].samples[i] + r.sources[1].samples[i])
                .epsilon(1e-15));
  }
}

TEST_CASE("mix_pair truncates to the shorter source") {
  Waveform a = make_tone(300.0, 0.5);   // 4000 samples
  Waveform b = make_tone(700.0, 0.3);   // 2400 samples
  mix::MixPairResult r = mix::mix_pair(a, b, 0.0);
  CHECK(r.mixture.size() == 2400);
  CHECK(r.sources[0].size() == 2400);
  // First source is passed through unscaled.
  for (size_t i = 0; i < 100; ++i)
    CHECK(r.sources[0].samples[i] == a.samples[i]);
}

TEST_CASE("mix_pair rejects bad input") {
  Waveform a = make_tone(300.0, 0.2);
  Waveform b = make_tone(500.0, 0.2, 16000);
  CHECK_THROWS_AS(mix::mix_pair(a, b, 0.0), std::invalid_argument);
  Waveform silent;
  silent.sample_rate = 8000;
  silent.samples.assign(1600, 0.0);
  CHECK_THROWS_AS(mix::mix_pair(a, silent, 0.0), std::invalid_argument);
  Waveform empty;
  CHECK_THROWS_AS(mix::mix_pair(empty, empty, 0.0), std::invalid_argument);
}

TEST_CASE("add_noise reaches the target SNR and is seed-deterministic") {
  Waveform mixture = make_tone(520.0, 0.5);
  Waveform noise = make_white_noise(3, 2.0);

  Waveform noisy = mix::add_noise(mixture, noise, 10.0, 123);
  REQUIRE(noisy.size() == mixture.size());
  Waveform residual;
  residual.sample_rate = 8000;
  residual.samples.resize(mixture.size());
  for (size_t i = 0; i < mixture.size(); ++i)
    residual.samples[i] = noisy.samples[i] - mixture.samples[i];
  CHECK(snr_db_of(mixture, residual) == doctest::Approx(10.0).epsilon(1e-12));

  Waveform again = mix::add_noise(mixture, noise, 10.0, 123);
  for (size_t i = 0; i < noisy.size(); ++i)
    CHECK(again.samples[i] == noisy.samples[i]);

  // A different seed picks a different segment (overwhelmingly likely).
  Waveform other = mix::add_noise(mixture, noise, 10.0, 124);
  double diff = 0.0;
  for (size_t i = 0; i < noisy.size(); ++i)
    diff += std::fabs(other.samples[i] - noisy.samples[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("add_noise disabled sentinel and error paths") {
  Waveform mixture = make_tone(520.0, 0.5);
  Waveform noise = make_white_noise(3, 2.0);
  Waveform same = mix::add_noise(mixture, noise, mix::kNoiseDisabled, 1);
  for (size_t i = 0; i < mixture.size(); ++i)
    CHECK(same.samples[i] == mixture.samples[i]);

  Waveform short_noise = make_white_noise(3, 0.1);
  CHECK_THROWS_AS(mix::add_noise(mixture, short_noise, 10.0, 1),
                  std::invalid_argument);
}

TEST_CASE("resample preserves an in-band tone") {
  Waveform hi = make_tone(500.0, 0.5, 16000);
  Waveform lo = mix::resample(hi, 8000);
  REQUIRE(lo.sample_rate == 8000);
  REQUIRE(lo.size() == 4000);
  // Compare against the analytic tone away from the edges where the sinc
  // kernel is truncated.
  Waveform want = make_tone(500.0, 0.5, 8000);
  double err = 0.0;
  int n = 0;
  for (size_t i = 200; i + 200 < lo.size(); ++i, ++n)
    err += (lo.samples[i] - want.samples[i]) * (lo.samples[i] - want.samples[i]);
  CHECK(std::sqrt(err / n) < 1e-3);
}

TEST_CASE("resample length rule and passthrough") {
  Waveform w = make_tone(300.0, 0.1, 8000);  // 800 samples
  CHECK(mix::resample(w, 12000).size() == 1200);
  CHECK(mix::resample(w, 11025).size() == 1103);  // round(800*11025/8000)
  Waveform same = mix::resample(w, 8000);
  REQUIRE(same.size() == w.size());
  for (size_t i = 0; i < w.size(); ++i) CHECK(same.samples[i] == w.samples[i]);
  CHECK_THROWS_AS(mix::resample(w, 0), std::invalid_argument);
}

TEST_CASE("build_manifest is deterministic and round-trips through JSON") {
  TempDir tmp("mixdet");
  write_toy_corpus(tmp.path() / "corpus", 4, 2, 0.4);

  mix::BuildOptions opt;
  opt.count = 6;
  opt.split = "train";
  opt.seed = 2024;
  mix::Manifest m1 = mix::build_manifest({tmp.file("corpus")}, opt);
  mix::Manifest m2 = mix::build_manifest({tmp.file("corpus")}, opt);
  REQUIRE(m1.records.size() == 6);

  mix::write_manifest(m1, tmp.file("a.jsonl"));
  mix::write_manifest(m2, tmp.file("b.jsonl"));
  CHECK(slurp(tmp.file("a.jsonl")) == slurp(tmp.file("b.jsonl")));

  mix::Manifest back = mix::read_manifest(tmp.file("a.jsonl"));
  REQUIRE(back.records.size() == m1.records.size());
  CHECK(back.sample_rate == m1.sample_rate);
  CHECK(back.split == m1.split);
  for (size_t i = 0; i < back.records.size(); ++i) {
    const auto& r = back.records[i];
    const auto& w = m1.records[i];
    CHECK(r.source_paths == w.source_paths);
    CHECK(r.gains == w.gains);
    CHECK(r.pair_snr_db == w.pair_snr_db);
    CHECK(r.seed == w.seed);
    CHECK(r.out_len == w.out_len);
    CHECK(r.noise_path.empty());
    CHECK(std::isinf(r.noise_snr_db));
  }

  // Pair SNRs stay inside the requested range and use both speakers.
  for (const auto& r : m1.records) {
    CHECK(r.pair_snr_db >= -5.0);
    CHECK(r.pair_snr_db <= 5.0);
    REQUIRE(r.source_paths.size() == 2);
    CHECK(r.source_paths[0] != r.source_paths[1]);
  }
}

TEST_CASE("build_manifest keeps test speakers out of the training pool") {
  TempDir tmp("mixsplit");
  write_toy_corpus(tmp.path() / "corpus", 5, 2, 0.4);

  auto speakers_used = [](const mix::Manifest& m) {
    std::set<std::string> out;
    for (const auto& r : m.records)
      for (const auto& p : r.source_paths)
        out.insert(std::filesystem::path(p).parent_path().filename().string());
    return out;
  };

  mix::BuildOptions opt;
  opt.count = 12;
  opt.seed = 7;
  opt.split = "train";
  std::set<std::string> train_spk =
      speakers_used(mix::build_manifest({tmp.file("corpus")}, opt));
  opt.split = "test";
  std::set<std::string> test_spk =
      speakers_used(mix::build_manifest({tmp.file("corpus")}, opt));

  CHECK(!train_spk.empty());
  CHECK(!test_spk.empty());
  for (const std::string& s : test_spk) CHECK(train_spk.count(s) == 0);
}

TEST_CASE("synthesize_record reproduces the planned mixture") {
  TempDir tmp("mixsynth");
  write_toy_corpus(tmp.path() / "corpus", 4, 2, 0.4);

  mix::BuildOptions opt;
  opt.count = 20;
  opt.seed = 99;
  mix::Manifest m = mix::build_manifest({tmp.file("corpus")}, opt);

  for (const auto& rec : m.records) {
    mix::RecordAudio audio = mix::synthesize_record(rec, m.sample_rate);
    REQUIRE(audio.sources.size() == 2);
    CHECK(static_cast<int64_t>(audio.mixture.size()) == rec.out_len);
    // Mixture is exactly the sum of the emitted sources.
    for (size_t i = 0; i < audio.mixture.size(); ++i)
      CHECK(audio.mixture.samples[i] ==
            doctest::Approx(audio.sources[0].samples[i] +
                            audio.sources[1].samples[i])
                .epsilon(1e-15));
    // The recorded gains preserve the planned pair SNR (peak normalization
    // rescales both sources together, so the ratio is untouched).
    CHECK(snr_db_of(audio.sources[0], audio.sources[1]) ==
          doctest::Approx(rec.pair_snr_db).epsilon(1e-9));
    CHECK(peak_abs(audio.mixture) <= 1.0);
  }
}

TEST_CASE("seeded noise in records is reproducible") {
  TempDir tmp("mixnoise");
  write_toy_corpus(tmp.path() / "corpus", 4, 2, 0.4);
  std::filesystem::create_directories(tmp.path() / "noise");
  io::write_wav(tmp.file("noise/hiss.wav"), make_white_noise(5, 1.5));

  mix::BuildOptions opt;
  opt.count = 4;
  opt.seed = 31;
  opt.noise_dir = tmp.file("noise");
  opt.noise_snr_db = 12.0;
  mix::Manifest m = mix::build_manifest({tmp.file("corpus")}, opt);

  for (const auto& rec : m.records) {
    REQUIRE(!rec.noise_path.empty());
    CHECK(rec.noise_snr_db == 12.0);
    mix::RecordAudio a = mix::synthesize_record(rec, m.sample_rate);
    mix::RecordAudio b = mix::synthesize_record(rec, m.sample_rate);
    for (size_t i = 0; i < a.mixture.size(); ++i)
      CHECK(a.mixture.samples[i] == b.mixture.samples[i]);

    // Noise residual sits at the requested SNR against the clean sum.
    Waveform clean = a.sources[0];
    for (size_t i = 0; i < clean.size(); ++i)
      clean.samples[i] += a.sources[1].samples[i];
    Waveform residual = a.mixture;
    for (size_t i = 0; i < residual.size(); ++i)
      residual.samples[i] -= clean.samples[i];
    CHECK(snr_db_of(clean, residual) == doctest::Approx(12.0).epsilon(1e-9));
  }
}

TEST_CASE("record_stem format") {
  mix::Manifest m;
  m.split = "train";
  CHECK(mix::record_stem(m, 3) == "train_00003");
  m.split = "valid";
  CHECK(mix::record_stem(m, 12345) == "valid_12345");
}

TEST_CASE("load_record_audio prefers emitted wavs, falls back to synthesis") {
  TempDir tmp("mixload");
  write_toy_corpus(tmp.path() / "corpus", 4, 2, 0.4);

  mix::BuildOptions opt;
  opt.count = 2;
  opt.seed = 11;
  mix::Manifest m = mix::build_manifest({tmp.file("corpus")}, opt);
  mix::write_manifest(m, tmp.file("mix.jsonl"));

  // No wavs emitted: falls back to synthesis.
  mix::RecordAudio synth = mix::load_record_audio(m, tmp.str(), 0);
  mix::RecordAudio direct = mix::synthesize_record(m.records[0], m.sample_rate);
  REQUIRE(synth.mixture.size() == direct.mixture.size());
  for (size_t i = 0; i < synth.mixture.size(); ++i)
    CHECK(synth.mixture.samples[i] == direct.mixture.samples[i]);

  // Emit wavs for record 1 and confirm they win over synthesis.
  std::string stem = mix::record_stem(m, 1);
  Waveform marker = make_tone(111.0, 0.05);
  io::write_wav(tmp.file(stem + "_mix.wav"), marker);
  io::write_wav(tmp.file(stem + "_s1.wav"), marker);
  io::write_wav(tmp.file(stem + "_s2.wav"), marker);
  mix::RecordAudio loaded = mix::load_record_audio(m, tmp.str(), 1);
  CHECK(loaded.mixture.size() == marker.size());
  REQUIRE(loaded.sources.size() == 2);
  CHECK(loaded.sources[0].size() == marker.size());
}
