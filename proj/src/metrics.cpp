// tfsep/metrics.cpp

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

#include "tfsep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tfsep/rng.hpp"
#include "tfsep/train.hpp"
#include "tfsep/wav_io.hpp"

namespace tfsep {
namespace metrics {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

double clamp_db(double v) {
  return std::max(-kClampDb, std::min(kClampDb, v));
}

}  // namespace

double si_snr_db(const Waveform& ref, const Waveform& est) {
  if (ref.samples.size() != est.samples.size())
    throw std::invalid_argument("si_snr: length mismatch");
  size_t n = ref.samples.size();
  if (n == 0) throw std::invalid_argument("si_snr: empty signals");
  double ms = 0.0, me = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ms += ref.samples[i];
    me += est.samples[i];
  }
  ms /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double dot = 0.0, ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double s = ref.samples[i] - ms;
    double e = est.samples[i] - me;
    dot += s * e;
    ss += s * s;
  }
  if (ss == 0.0)
    throw std::invalid_argument("si_snr: all-zero reference signal");
  double scale = dot / ss;
  double pt = 0.0, pn = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double s = ref.samples[i] - ms;
    double e = est.samples[i] - me;
    double t = scale * s;
    pt += t * t;
    double r = e - t;
    pn += r * r;
  }
  double v = 10.0 * std::log10((pt + 1e-30) / (pn + 1e-30));
  return clamp_db(v);
}

double sdr_db(const Waveform& ref, const Waveform& est) {
  return clamp_db(train::sdr_db(ref, est));
}

namespace {

double metric_value(Metric metric, const Waveform& ref, const Waveform& est) {
  return metric == Metric::kSiSnr ? si_snr_db(ref, est) : sdr_db(ref, est);
}

}  // namespace

double improvement(Metric metric, const std::vector<Waveform>& references,
                   const std::vector<Waveform>& estimates,
                   const Waveform& mixture) {
  int n = static_cast<int>(references.size());
  if (static_cast<int>(estimates.size()) != n)
    throw std::invalid_argument("improvement: count mismatch");
  if (n == 0) throw std::invalid_argument("improvement: no references");
  // Best mean metric over estimate assignments.
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += metric_value(metric, references[i], estimates[perm[i]]);
    best = std::max(best, acc / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  double base = 0.0;
  for (int i = 0; i < n; ++i)
    base += metric_value(metric, references[i], mixture);
  base /= n;
  return best - base;
}

EvalReport evaluate(model::Model& m, const mix::Manifest& manifest,
                    const std::string& manifest_dir,
                    const std::vector<NoiseCondition>& conditions) {
  EvalReport report;
  report.sample_rate = manifest.sample_rate;
  for (const NoiseCondition& cond : conditions) {
    ConditionResult cr;
    cr.condition = cond;
    bool noisy = !cond.noise_dir.empty() &&
                 cond.snr_db != mix::kNoiseDisabled;
    std::vector<std::string> noise_files;
    if (noisy) {
      for (const auto& entry : fs::directory_iterator(cond.noise_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
          noise_files.push_back(entry.path().string());
      std::sort(noise_files.begin(), noise_files.end());
      if (noise_files.empty())
        throw std::runtime_error("no .wav files in noise dir: " +
                                 cond.noise_dir);
    }
    double si_acc = 0.0, sdr_acc = 0.0;
    for (size_t i = 0; i < manifest.records.size(); ++i) {
      UtteranceScore score;
      score.index = static_cast<int>(i);
      try {
        mix::RecordAudio audio =
            mix::load_record_audio(manifest, manifest_dir, static_cast<int>(i));
        Waveform input = audio.mixture;
        if (noisy) {
          uint64_t rs = mix_seed(cond.seed ^ manifest.records[i].seed);
          const std::string& nf = noise_files[rs % noise_files.size()];
          Waveform noise = io::read_wav(nf);
          input = mix::add_noise(input, noise, cond.snr_db, mix_seed(rs ^ 1));
        }
        std::vector<Waveform> ests = train::separate(m, input);
        score.si_snr_i =
            improvement(Metric::kSiSnr, audio.sources, ests, input);
        score.sdr_i = improvement(Metric::kSdr, audio.sources, ests, input);
        si_acc += score.si_snr_i;
        sdr_acc += score.sdr_i;
        ++cr.evaluated;
      } catch (const std::exception& e) {
        score.ok = false;
        score.error = e.what();
        ++cr.failed;
      }
      cr.utterances.push_back(std::move(score));
    }
    if (cr.evaluated > 0) {
      cr.mean_si_snr_i = si_acc / cr.evaluated;
      cr.mean_sdr_i = sdr_acc / cr.evaluated;
    }
    report.conditions.push_back(std::move(cr));
  }
  return report;
}

void write_report_json(const EvalReport& report, const std::string& path) {
  ordered_json root;
  root["manifest"] = report.manifest_path;
  root["sample_rate"] = report.sample_rate;
  root["conditions"] = ordered_json::array();
  for (const auto& cr : report.conditions) {
    ordered_json c;
    c["label"] = cr.condition.label;
    if (!cr.condition.noise_dir.empty() &&
        cr.condition.snr_db != mix::kNoiseDisabled) {
      c["noise_dir"] = cr.condition.noise_dir;
      c["noise_snr_db"] = cr.condition.snr_db;
    }
    c["evaluated"] = cr.evaluated;
    c["failed"] = cr.failed;
    c["mean_si_snr_i"] = cr.mean_si_snr_i;
    c["mean_sdr_i"] = cr.mean_sdr_i;
    c["utterances"] = ordered_json::array();
    for (const auto& u : cr.utterances) {
      ordered_json uj;
      uj["index"] = u.index;
      uj["ok"] = u.ok;
      if (!u.ok)
        uj["error"] = u.error;
      else {
        uj["si_snr_i"] = u.si_snr_i;
        uj["sdr_i"] = u.sdr_i;
      }
      c["utterances"].push_back(std::move(uj));
    }
    root["conditions"].push_back(std::move(c));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << root.dump(2) << "\n";
}

std::string render_table(const std::string& corner,
                         const std::vector<std::string>& columns,
                         const std::vector<TableRow>& rows) {
  size_t label_w = corner.size();
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
  std::vector<size_t> col_w(columns.size());
  for (size_t c = 0; c < columns.size(); ++c)
    col_w[c] = std::max<size_t>(columns[c].size(), 8);

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_w)) << corner << " |";
  for (size_t c = 0; c < columns.size(); ++c)
    out << " " << std::right << std::setw(static_cast<int>(col_w[c]))
        << columns[c];
  out << "\n";
  out << std::string(label_w, '-') << "-+";
  for (size_t c = 0; c < columns.size(); ++c)
    out << std::string(col_w[c] + 1, '-');
  out << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(label_w)) << r.label
        << " |";
    for (size_t c = 0; c < r.values.size() && c < columns.size(); ++c)
      out << " " << std::right << std::setw(static_cast<int>(col_w[c]))
          << std::fixed << std::setprecision(2) << r.values[c];
    out << "\n";
  }
  return out.str();
}

}  // namespace metrics
}  // namespace tfsep
