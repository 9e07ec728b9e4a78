// tfsep/checkpoint.hpp

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

#ifndef TFSEP_CHECKPOINT_H_
#define TFSEP_CHECKPOINT_H_

#include <memory>
#include <string>
#include <vector>

#include "tfsep/model.hpp"
#include "tfsep/tensor.hpp"

namespace tfsep {

// Optimizer and schedule state carried alongside the weights so a run can
// resume exactly where it stopped.
struct TrainState {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr = 0.0;
  double best_valid = 0.0;
  int64_t stall_epochs = 0;
  std::vector<Tensor> adam_m;   // aligned with Model::params
  std::vector<Tensor> adam_v;
  std::string data_rng;         // serialized generator state
};

// Binary, native-endian.  save(load(f)) reproduces f byte for byte.
void save_checkpoint(const std::string& path, const model::Model& m,
                     const TrainState* state);

struct LoadedCheckpoint {
  std::unique_ptr<model::Model> model;
  bool has_state = false;
  TrainState state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tfsep

#endif  // TFSEP_CHECKPOINT_H_
