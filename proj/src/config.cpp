// tfsep/config.cpp

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

#include "tfsep/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tfsep {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::schema() {
  static const std::vector<std::pair<std::string, std::string>> kSchema = {
      {"sample_rate", "8000"},
      {"stft.frame_len", "20"},
      {"stft.hop", "10"},
      {"dsp.log_floor", "1e-8"},
      {"encoder.conv_channels", "256"},
      {"encoder.use_spectral", "true"},
      {"separator.bottleneck_channels", "256"},
      {"separator.hidden_channels", "512"},
      {"separator.kernel_size", "3"},
      {"separator.num_blocks", "8"},
      {"separator.num_repeats", "4"},
      {"separator.embed_dim", "20"},
      {"separator.norm", "global_layer"},
      {"separator.mode", "clustering"},
      {"separator.mask_normalization", "softmax"},
      {"cluster.num_centers", "4"},
      {"cluster.kmeans_iters", "1"},
      {"model.num_speakers", "2"},
      {"decoder.alpha", "1.0"},
      {"decoder.spectral_mask_domain", "linear"},
      {"train.segment_seconds", "4.0"},
      {"train.epochs", "100"},
      {"train.batch_size", "1"},
      {"train.lr", "0.001"},
      {"train.adam_beta1", "0.9"},
      {"train.adam_beta2", "0.999"},
      {"train.adam_eps", "1e-8"},
      {"train.grad_clip_norm", "5.0"},
      {"train.lr_halve_patience", "3"},
      {"train.seed", "1234"},
      {"train.max_steps", "0"},
      {"train.log_every", "10"},
      {"train.stats_records", "64"},
  };
  return kSchema;
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (const auto& kv : schema()) c.values_[kv.first] = kv.second;
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("unknown config key: " + key);
  it->second = value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    size_t eq = o.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must be key=value: " + o);
    set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

const std::string& RunConfig::gets(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("unknown config key: " + key);
  return it->second;
}

int64_t RunConfig::geti(const std::string& key) const {
  const std::string& v = gets(key);
  size_t pos = 0;
  int64_t r = std::stoll(v, &pos);
  if (pos != v.size())
    throw std::invalid_argument("config key " + key + ": not an integer: " + v);
  return r;
}

double RunConfig::getf(const std::string& key) const {
  const std::string& v = gets(key);
  size_t pos = 0;
  double r = std::stod(v, &pos);
  if (pos != v.size())
    throw std::invalid_argument("config key " + key + ": not a number: " + v);
  return r;
}

bool RunConfig::getb(const std::string& key) const {
  const std::string& v = gets(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: " + v);
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  for (const auto& kv : values_) out << kv.first << " = " << kv.second << "\n";
  return out.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c = defaults();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config parse: expected key = value: " + line);
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

void RunConfig::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << serialize();
}

}  // namespace tfsep
