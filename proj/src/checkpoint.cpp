// tfsep/checkpoint.cpp

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

#include "tfsep/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tfsep {

namespace {

constexpr char kMagic[8] = {'T', 'F', 'S', 'E', 'P', 'C', 'K', '1'};

void put_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u64(out, t.shape().size());
  for (int64_t d : t.shape()) put_u64(out, static_cast<uint64_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

uint64_t get_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& in) {
  uint64_t n = get_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

Tensor get_tensor(std::istream& in) {
  uint64_t nd = get_u64(in);
  std::vector<int64_t> shape(nd);
  for (uint64_t i = 0; i < nd; ++i)
    shape[i] = static_cast<int64_t>(get_u64(in));
  Tensor t = Tensor::zeros(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const model::Model& m,
                     const TrainState* state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  put_string(out, m.run_config.serialize());
  put_tensor(out, m.spec_mean);
  put_tensor(out, m.spec_std);
  put_u64(out, m.params.size());
  for (const auto& p : m.params) {
    put_string(out, p.name);
    put_tensor(out, p.value);
  }
  put_u64(out, state != nullptr ? 1 : 0);
  if (state != nullptr) {
    if (state->adam_m.size() != m.params.size() ||
        state->adam_v.size() != m.params.size())
      throw std::invalid_argument("checkpoint: optimizer state misaligned");
    put_u64(out, static_cast<uint64_t>(state->step));
    put_u64(out, static_cast<uint64_t>(state->epoch));
    put_f64(out, state->lr);
    put_f64(out, state->best_valid);
    put_u64(out, static_cast<uint64_t>(state->stall_epochs));
    for (const Tensor& t : state->adam_m) put_tensor(out, t);
    for (const Tensor& t : state->adam_v) put_tensor(out, t);
    put_string(out, state->data_rng);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  LoadedCheckpoint lc;
  RunConfig rc = RunConfig::parse(get_string(in));
  lc.model = std::make_unique<model::Model>(rc);
  lc.model->spec_mean = get_tensor(in);
  lc.model->spec_std = get_tensor(in);
  uint64_t np = get_u64(in);
  if (np != lc.model->params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (uint64_t i = 0; i < np; ++i) {
    std::string name = get_string(in);
    if (name != lc.model->params[i].name)
      throw std::runtime_error("checkpoint: unexpected parameter " + name);
    Tensor v = get_tensor(in);
    if (v.shape() != lc.model->params[i].value.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    lc.model->params[i].value = std::move(v);
    lc.model->params[i].grad = Tensor::zeros(lc.model->params[i].value.shape());
  }
  lc.has_state = get_u64(in) != 0;
  if (lc.has_state) {
    lc.state.step = static_cast<int64_t>(get_u64(in));
    lc.state.epoch = static_cast<int64_t>(get_u64(in));
    lc.state.lr = get_f64(in);
    lc.state.best_valid = get_f64(in);
    lc.state.stall_epochs = static_cast<int64_t>(get_u64(in));
    lc.state.adam_m.resize(np);
    lc.state.adam_v.resize(np);
    for (uint64_t i = 0; i < np; ++i) lc.state.adam_m[i] = get_tensor(in);
    for (uint64_t i = 0; i < np; ++i) lc.state.adam_v[i] = get_tensor(in);
    lc.state.data_rng = get_string(in);
  }
  return lc;
}

}  // namespace tfsep
