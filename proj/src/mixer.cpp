// tfsep/mixer.cpp

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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "tfsep/rng.hpp"
#include "tfsep/wav_io.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace tfsep::mix {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPeakLimit = 0.999;

double power_or_throw(const Waveform& w, const char* what) {
  double p = signal_power(w);
  if (!(p > 0.0))
    throw std::invalid_argument(std::string(what) + ": zero-power signal");
  return p;
}

struct CorpusEntry {
  std::string path;
  std::string speaker;
};

std::string speaker_of(const fs::path& file, const fs::path& root) {
  fs::path parent = file.parent_path();
  if (parent != root) return parent.filename().string();
  std::string stem = file.stem().string();
  size_t us = stem.find('_');
  return us == std::string::npos ? stem : stem.substr(0, us);
}

bool is_wav(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::vector<CorpusEntry> scan_corpus(const std::vector<std::string>& dirs) {
  std::vector<CorpusEntry> entries;
  for (const std::string& dir : dirs) {
    fs::path root(dir);
    if (!fs::is_directory(root))
      throw std::runtime_error("corpus directory not found: " + dir);
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file() && is_wav(e.path()))
        entries.push_back({e.path().string(), speaker_of(e.path(), root)});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.path < b.path; });
  return entries;
}

Waveform load_resampled(const std::string& path, int sample_rate) {
  Waveform w = io::read_wav(path);
  if (w.sample_rate != sample_rate) w = resample(w, sample_rate);
  return w;
}

}  // namespace

MixPairResult mix_pair(const Waveform& s1, const Waveform& s2, double snr_db) {
  if (s1.sample_rate != s2.sample_rate)
    throw std::invalid_argument("mix_pair: sample-rate mismatch");
  size_t len = std::min(s1.size(), s2.size());
  if (len == 0) throw std::invalid_argument("mix_pair: empty source");

  MixPairResult r;
  r.sources[0].sample_rate = s1.sample_rate;
  r.sources[1].sample_rate = s1.sample_rate;
  r.sources[0].samples.assign(s1.samples.begin(), s1.samples.begin() + len);
  r.sources[1].samples.assign(s2.samples.begin(), s2.samples.begin() + len);

  double p1 = power_or_throw(r.sources[0], "mix_pair source 1");
  double p2 = power_or_throw(r.sources[1], "mix_pair source 2");
  double g = std::sqrt(p1 / (p2 * std::pow(10.0, snr_db / 10.0)));
  r.gain2 = g;
  for (double& x : r.sources[1].samples) x *= g;

  r.mixture.sample_rate = s1.sample_rate;
  r.mixture.samples.resize(len);
  for (size_t i = 0; i < len; ++i)
    r.mixture.samples[i] = r.sources[0].samples[i] + r.sources[1].samples[i];
  return r;
}

Waveform add_noise(const Waveform& mixture, const Waveform& noise,
                   double snr_db, uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return mixture;
  if (noise.size() < mixture.size())
    throw std::invalid_argument("add_noise: noise shorter than mixture (" +
                                std::to_string(noise.size()) + " < " +
                                std::to_string(mixture.size()) + ")");
  Rng rng(seed);
  size_t span = noise.size() - mixture.size() + 1;
  size_t offset = static_cast<size_t>(rng.uniform_int(span));

  Waveform segment;
  segment.sample_rate = noise.sample_rate;
  segment.samples.assign(noise.samples.begin() + offset,
                         noise.samples.begin() + offset + mixture.size());
  double pn = signal_power(segment);
  if (!(pn > 0.0)) throw std::invalid_argument("add_noise: zero-power noise segment");
  double pm = power_or_throw(mixture, "add_noise mixture");
  double g = std::sqrt(pm / (pn * std::pow(10.0, snr_db / 10.0)));

  Waveform out = mixture;
  for (size_t i = 0; i < out.size(); ++i) out.samples[i] += g * segment.samples[i];
  return out;
}

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (wave.sample_rate == target_rate) return wave;

  const double ratio = static_cast<double>(target_rate) / wave.sample_rate;
  const int64_t out_len =
      llround(static_cast<double>(wave.size()) * target_rate / wave.sample_rate);

  // Cutoff in cycles per source sample, with a little rolloff headroom.
  const double fc = 0.5 * std::min(1.0, ratio) * 0.945;
  const double half_width = 32.0 / (2.0 * fc);
  const int64_t hw = static_cast<int64_t>(std::ceil(half_width));

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<size_t>(out_len), 0.0);
  const int64_t n = static_cast<int64_t>(wave.size());

  for (int64_t j = 0; j < out_len; ++j) {
    double p = static_cast<double>(j) / ratio;
    int64_t m0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(p)) - hw);
    int64_t m1 = std::min<int64_t>(n - 1, static_cast<int64_t>(std::floor(p)) + hw);
    double acc = 0.0;
    for (int64_t m = m0; m <= m1; ++m) {
      double d = static_cast<double>(m) - p;
      double x = 2.0 * fc * d;
      double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
      double hann = 0.5 * (1.0 + std::cos(kPi * d / half_width));
      acc += wave.samples[static_cast<size_t>(m)] * 2.0 * fc * sinc * hann;
    }
    out.samples[static_cast<size_t>(j)] = acc;
  }
  return out;
}

Manifest build_manifest(const std::vector<std::string>& corpus_dirs,
                        const BuildOptions& options) {
  std::vector<CorpusEntry> entries = scan_corpus(corpus_dirs);
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const CorpusEntry& e : entries) by_speaker[e.speaker].push_back(e.path);
  if (by_speaker.size() < 2)
    throw std::runtime_error("build_manifest: corpus has fewer than 2 speakers");

  std::vector<std::string> speakers;
  for (const auto& [spk, files] : by_speaker) speakers.push_back(spk);

  // Speaker partition: test-split speakers disjoint from the train/valid
  // pool when the corpus is big enough. The partition depends only on the
  // seed, so any split built with the same seed agrees on it.
  std::vector<std::string> pool;
  if (speakers.size() >= 4) {
    std::vector<std::string> shuffled = speakers;
    Rng partition_rng(mix_seed(options.seed ^ hash_string("speaker-partition")));
    partition_rng.shuffle(shuffled);
    size_t n_test = std::max<size_t>(2, llround(0.2 * shuffled.size()));
    std::set<std::string> test_set(shuffled.begin(), shuffled.begin() + n_test);
    for (const std::string& s : speakers) {
      bool in_test = test_set.count(s) > 0;
      if ((options.split == "test") == in_test) pool.push_back(s);
    }
  } else {
    pool = speakers;
  }
  if (pool.size() < 2)
    throw std::runtime_error("build_manifest: split '" + options.split +
                             "' has fewer than 2 speakers");

  std::vector<std::string> noise_files;
  if (!options.noise_dir.empty()) {
    for (const CorpusEntry& e : scan_corpus({options.noise_dir}))
      noise_files.push_back(e.path);
    if (noise_files.empty())
      throw std::runtime_error("build_manifest: no noise files in " + options.noise_dir);
  }

  Manifest manifest;
  manifest.sample_rate = options.sample_rate;
  manifest.split = options.split;

  Rng rng(mix_seed(options.seed ^ hash_string("records:" + options.split)));
  for (int i = 0; i < options.count; ++i) {
    MixtureRecord rec;
    rec.seed = mix_seed(options.seed ^ (0x5851f42d4c957f2dULL * (i + 1)));

    size_t a = static_cast<size_t>(rng.uniform_int(pool.size()));
    size_t b = static_cast<size_t>(rng.uniform_int(pool.size() - 1));
    if (b >= a) ++b;
    const auto& files_a = by_speaker[pool[a]];
    const auto& files_b = by_speaker[pool[b]];
    rec.source_paths = {files_a[rng.uniform_int(files_a.size())],
                        files_b[rng.uniform_int(files_b.size())]};
    rec.pair_snr_db = rng.uniform(options.snr_lo_db, options.snr_hi_db);

    Waveform s1 = load_resampled(rec.source_paths[0], options.sample_rate);
    Waveform s2 = load_resampled(rec.source_paths[1], options.sample_rate);
    MixPairResult mixed = mix_pair(s1, s2, rec.pair_snr_db);
    rec.out_len = static_cast<int64_t>(mixed.mixture.size());

    double scale = 1.0;
    double peak = peak_abs(mixed.mixture);
    if (peak > 1.0) scale = kPeakLimit / peak;
    rec.gains = {scale, mixed.gain2 * scale};

    if (!noise_files.empty()) {
      rec.noise_path = noise_files[Rng(rec.seed).uniform_int(noise_files.size())];
      rec.noise_snr_db = options.noise_snr_db;
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

RecordAudio synthesize_record(const MixtureRecord& record, int sample_rate) {
  if (record.source_paths.size() != record.gains.size())
    throw std::invalid_argument("synthesize_record: gains/source count mismatch");
  RecordAudio out;
  size_t len = static_cast<size_t>(record.out_len);
  for (size_t i = 0; i < record.source_paths.size(); ++i) {
    Waveform s = load_resampled(record.source_paths[i], sample_rate);
    if (s.size() < len)
      throw std::runtime_error("synthesize_record: " + record.source_paths[i] +
                               " shorter than recorded out_len");
    s.samples.resize(len);
    for (double& x : s.samples) x *= record.gains[i];
    out.sources.push_back(std::move(s));
  }
  out.mixture.sample_rate = sample_rate;
  out.mixture.samples.assign(len, 0.0);
  for (const Waveform& s : out.sources)
    for (size_t i = 0; i < len; ++i) out.mixture.samples[i] += s.samples[i];

  if (!record.noise_path.empty()) {
    Waveform noise = load_resampled(record.noise_path, sample_rate);
    out.mixture = add_noise(out.mixture, noise, record.noise_snr_db, record.seed);
  }
  return out;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);

  ordered_json header;
  header["type"] = "tfsep-manifest";
  header["version"] = 1;
  header["sample_rate"] = manifest.sample_rate;
  header["split"] = manifest.split;
  out << header.dump() << "\n";

  for (const MixtureRecord& r : manifest.records) {
    ordered_json j;
    j["source_paths"] = r.source_paths;
    j["gains"] = r.gains;
    j["pair_snr_db"] = r.pair_snr_db;
    if (r.noise_path.empty()) {
      j["noise_path"] = nullptr;
      j["noise_snr_db"] = nullptr;
    } else {
      j["noise_path"] = r.noise_path;
      j["noise_snr_db"] = r.noise_snr_db;
    }
    j["seed"] = r.seed;
    j["out_len"] = r.out_len;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write_manifest: short write to " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_manifest: " + path + " is empty");

  ordered_json header = ordered_json::parse(line);
  if (header.value("type", "") != "tfsep-manifest")
    throw std::runtime_error("read_manifest: " + path + " is not a tfsep manifest");

  Manifest m;
  m.sample_rate = header.at("sample_rate").get<int>();
  m.split = header.at("split").get<std::string>();

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    MixtureRecord r;
    r.source_paths = j.at("source_paths").get<std::vector<std::string>>();
    r.gains = j.at("gains").get<std::vector<double>>();
    r.pair_snr_db = j.at("pair_snr_db").get<double>();
    if (!j.at("noise_path").is_null()) {
      r.noise_path = j.at("noise_path").get<std::string>();
      r.noise_snr_db = j.at("noise_snr_db").get<double>();
    }
    r.seed = j.at("seed").get<uint64_t>();
    r.out_len = j.at("out_len").get<int64_t>();
    m.records.push_back(std::move(r));
  }
  return m;
}

std::string record_stem(const Manifest& manifest, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d", manifest.split.c_str(), index);
  return buf;
}

RecordAudio load_record_audio(const Manifest& manifest,
                              const std::string& manifest_dir, int index) {
  const MixtureRecord& rec = manifest.records.at(static_cast<size_t>(index));
  fs::path dir(manifest_dir);
  std::string stem = record_stem(manifest, index);
  fs::path mix_path = dir / (stem + "_mix.wav");

  if (fs::exists(mix_path)) {
    RecordAudio out;
    out.mixture = io::read_wav(mix_path.string());
    for (size_t i = 0; i < rec.source_paths.size(); ++i) {
      fs::path sp = dir / (stem + "_s" + std::to_string(i + 1) + ".wav");
      out.sources.push_back(io::read_wav(sp.string()));
    }
    return out;
  }
  return synthesize_record(rec, manifest.sample_rate);
}

}  // namespace tfsep::mix
