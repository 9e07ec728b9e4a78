// tfsep/train.hpp

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

#ifndef TFSEP_TRAIN_H_
#define TFSEP_TRAIN_H_

#include <functional>
#include <string>
#include <vector>

#include "tfsep/checkpoint.hpp"
#include "tfsep/config.hpp"
#include "tfsep/mixer.hpp"
#include "tfsep/model.hpp"
#include "tfsep/tape.hpp"
#include "tfsep/waveform.hpp"

namespace tfsep {
namespace train {

// Scale-dependent SDR in dB.  Guarded so an exact reconstruction or an
// orthogonal estimate stays finite.
double sdr_db(const Waveform& ref, const Waveform& est);

// Tape version; returns a node holding -SDR(ref, est).
int build_neg_sdr(nn::Tape& tape, int est, const Tensor& ref);

struct PitResult {
  double loss = 0.0;            // mean over speakers of -SDR, best permutation
  std::vector<int> perm;        // perm[i] = estimate index assigned to ref i
};

// neg_sdr[i][j] = -SDR(ref_i, est_j).
PitResult pit_from_matrix(const Tensor& neg_sdr);
PitResult pit_loss(const std::vector<Waveform>& refs,
                   const std::vector<Waveform>& ests);

// Permutation-invariant loss node over per-speaker estimate nodes.
// forced_perm pins the assignment (finite-difference checks).
int build_pit_loss(nn::Tape& tape, const std::vector<int>& est_nodes,
                   const std::vector<Waveform>& refs, std::vector<int>* perm,
                   const std::vector<int>* forced_perm = nullptr);

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;
};
void adam_init(AdamState* st, const model::Model& m);
void adam_step(model::Model* m, AdamState* st, double lr, double beta1,
               double beta2, double eps);
// Scale all gradients so their global l2 norm is at most max_norm.
double clip_grad_norm(model::Model* m, double max_norm);

// Per-bin mean/std of the log-magnitude features over (up to max_records)
// training mixtures; stored on the model and frozen into checkpoints.
void fit_spectral_stats(model::Model* m, const mix::Manifest& manifest,
                        const std::string& manifest_dir, int max_records);

struct TrainOptions {
  std::string manifest_path;
  std::string valid_manifest_path;   // empty: no validation pass
  std::string out_dir;
  std::string resume_from;           // empty: fresh model
  // Called after every optimizer step; return true to stop early.
  std::function<bool(int64_t step, double loss, model::Model&)> step_hook;
};

struct TrainSummary {
  int64_t steps = 0;
  int64_t epochs = 0;
  double last_loss = 0.0;
  double best_valid = 0.0;
  std::string last_checkpoint;
  std::string best_checkpoint;
};

TrainSummary train(const RunConfig& cfg, const TrainOptions& opts);

// Run the separator on one mixture (hard cluster assignments).
std::vector<Waveform> separate(model::Model& m, const Waveform& mixture);

}  // namespace train
}  // namespace tfsep

#endif  // TFSEP_TRAIN_H_
