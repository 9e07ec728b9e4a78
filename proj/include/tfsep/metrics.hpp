// tfsep/metrics.hpp

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

#ifndef TFSEP_METRICS_H_
#define TFSEP_METRICS_H_

#include <string>
#include <vector>

#include "tfsep/mixer.hpp"
#include "tfsep/model.hpp"
#include "tfsep/waveform.hpp"

namespace tfsep {
namespace metrics {

// Reported values are clamped to +-80 dB so near-perfect reconstructions
// do not blow up averages.
constexpr double kClampDb = 80.0;

// Scale-invariant SNR: both signals are mean-removed, the estimate is scored
// against its projection onto the reference.
double si_snr_db(const Waveform& ref, const Waveform& est);
// Clamped reporting version of the training SDR.
double sdr_db(const Waveform& ref, const Waveform& est);

enum class Metric { kSiSnr, kSdr };

// Mean metric over references under the best permutation of estimates,
// minus the same metric with the mixture standing in for every estimate.
double improvement(Metric metric, const std::vector<Waveform>& references,
                   const std::vector<Waveform>& estimates,
                   const Waveform& mixture);

// One evaluation pass = the test manifest replayed under a noise condition.
// An empty noise_dir (or a disabled snr) means the clean condition.
struct NoiseCondition {
  std::string label;
  std::string noise_dir;
  double snr_db = mix::kNoiseDisabled;
  uint64_t seed = 0;
};

struct UtteranceScore {
  int index = 0;
  bool ok = true;
  std::string error;
  double si_snr_i = 0.0;
  double sdr_i = 0.0;
};

struct ConditionResult {
  NoiseCondition condition;
  std::vector<UtteranceScore> utterances;
  int evaluated = 0;
  int failed = 0;
  double mean_si_snr_i = 0.0;
  double mean_sdr_i = 0.0;
};

struct EvalReport {
  std::string manifest_path;
  int sample_rate = 0;
  std::vector<ConditionResult> conditions;
};

EvalReport evaluate(model::Model& m, const mix::Manifest& manifest,
                    const std::string& manifest_dir,
                    const std::vector<NoiseCondition>& conditions);

void write_report_json(const EvalReport& report, const std::string& path);

// Small fixed-width text table; one row label column then numeric columns.
struct TableRow {
  std::string label;
  std::vector<double> values;
};
std::string render_table(const std::string& corner,
                         const std::vector<std::string>& columns,
                         const std::vector<TableRow>& rows);

}  // namespace metrics
}  // namespace tfsep

#endif  // TFSEP_METRICS_H_
