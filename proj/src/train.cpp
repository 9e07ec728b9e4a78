// tfsep/train.cpp

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

#include "tfsep/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tfsep/dsp.hpp"
#include "tfsep/rng.hpp"

namespace tfsep {
namespace train {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kSdrNumGuard = 1e-30;
constexpr double kSdrDenGuard = 1e-8;

Tensor column(const std::vector<double>& v) {
  Tensor t = Tensor::zeros({static_cast<int64_t>(v.size()), 1});
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

std::vector<std::vector<int>> permutations(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(idx);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

}  // namespace

double sdr_db(const Waveform& ref, const Waveform& est) {
  if (ref.samples.size() != est.samples.size())
    throw std::invalid_argument("sdr: length mismatch");
  if (ref.samples.empty()) throw std::invalid_argument("sdr: empty signals");
  double d = 0.0, ps = 0.0, pe = 0.0;
  for (size_t i = 0; i < ref.samples.size(); ++i) {
    d += ref.samples[i] * est.samples[i];
    ps += ref.samples[i] * ref.samples[i];
    pe += est.samples[i] * est.samples[i];
  }
  if (ps == 0.0)
    throw std::invalid_argument("sdr: all-zero reference signal");
  double u = d * d + kSdrNumGuard;
  double v = ps * pe - d * d + kSdrDenGuard;
  return 10.0 * (std::log10(u) - std::log10(v));
}

int build_neg_sdr(nn::Tape& tape, int est, const Tensor& ref) {
  double ps = 0.0;
  for (int64_t i = 0; i < ref.numel(); ++i)
    ps += ref.data()[i] * ref.data()[i];
  if (ps == 0.0)
    throw std::invalid_argument("sdr: all-zero reference signal");
  int d = tape.dot_const(est, ref);
  int d2 = tape.mul(d, d);
  int u = tape.affine(d2, 1.0, kSdrNumGuard);
  int pe = tape.sumsq(est);
  int pspe = tape.affine(pe, ps, 0.0);
  int v = tape.affine(tape.sub(pspe, d2), 1.0, kSdrDenGuard);
  const double c = 10.0 / std::log(10.0);
  // -SDR = c * (ln v - ln u)
  return tape.affine(tape.sub(tape.log_(v), tape.log_(u)), c, 0.0);
}

PitResult pit_from_matrix(const Tensor& neg_sdr) {
  int n = static_cast<int>(neg_sdr.rows());
  if (neg_sdr.cols() != n)
    throw std::invalid_argument("pit: matrix must be square");
  PitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  std::vector<double> terms(n);
  for (const auto& perm : permutations(n)) {
    for (int i = 0; i < n; ++i) terms[i] = neg_sdr.at(i, perm[i]);
    // Accumulate in value order: the loss then comes out bit-identical under
    // any relabeling of references or estimates.
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    acc /= n;
    // First candidate always wins so a non-finite matrix still yields a
    // (non-finite) loss instead of an empty result.
    if (best.perm.empty() || acc < best.loss) {
      best.loss = acc;
      best.perm = perm;
    }
  }
  return best;
}

PitResult pit_loss(const std::vector<Waveform>& refs,
                   const std::vector<Waveform>& ests) {
  int n = static_cast<int>(refs.size());
  if (static_cast<int>(ests.size()) != n)
    throw std::invalid_argument("pit: reference/estimate count mismatch");
  Tensor m = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.at(i, j) = -sdr_db(refs[i], ests[j]);
  return pit_from_matrix(m);
}

int build_pit_loss(nn::Tape& tape, const std::vector<int>& est_nodes,
                   const std::vector<Waveform>& refs, std::vector<int>* perm,
                   const std::vector<int>* forced_perm) {
  int n = static_cast<int>(refs.size());
  if (static_cast<int>(est_nodes.size()) != n)
    throw std::invalid_argument("pit: reference/estimate count mismatch");
  // neg[i][j] node: -SDR(ref_i, est_j)
  std::vector<std::vector<int>> neg(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i) {
    Tensor ref = column(refs[i].samples);
    for (int j = 0; j < n; ++j)
      neg[i][j] = build_neg_sdr(tape, est_nodes[j], ref);
  }
  auto perms = permutations(n);
  int best_node = -1;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<int> best_perm;
  for (const auto& pm : perms) {
    if (forced_perm != nullptr && pm != *forced_perm) continue;
    int acc = neg[0][pm[0]];
    for (int i = 1; i < n; ++i) acc = tape.add(acc, neg[i][pm[i]]);
    int mean = tape.affine(acc, 1.0 / n, 0.0);
    double val = tape.val(mean).data()[0];
    if (best_node < 0 || val < best_val) {
      best_val = val;
      best_node = mean;
      best_perm = pm;
    }
  }
  if (best_node < 0) throw std::invalid_argument("pit: no permutation matched");
  if (perm != nullptr) *perm = best_perm;
  return best_node;
}

void adam_init(AdamState* st, const model::Model& m) {
  st->t = 0;
  st->m.clear();
  st->v.clear();
  for (const auto& p : m.params) {
    st->m.push_back(Tensor::zeros(p.value.shape()));
    st->v.push_back(Tensor::zeros(p.value.shape()));
  }
}

double clip_grad_norm(model::Model* m, double max_norm) {
  double sq = 0.0;
  for (const auto& p : m->params)
    for (int64_t i = 0; i < p.grad.numel(); ++i)
      sq += p.grad.data()[i] * p.grad.data()[i];
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double scale = max_norm / norm;
    for (auto& p : m->params)
      for (int64_t i = 0; i < p.grad.numel(); ++i) p.grad.data()[i] *= scale;
  }
  return norm;
}

void adam_step(model::Model* m, AdamState* st, double lr, double beta1,
               double beta2, double eps) {
  if (st->m.size() != m->params.size())
    throw std::invalid_argument("adam: state misaligned");
  ++st->t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st->t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st->t));
  for (size_t k = 0; k < m->params.size(); ++k) {
    nn::Param& p = m->params[k];
    Tensor& mm = st->m[k];
    Tensor& vv = st->v[k];
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      double g = p.grad.data()[i];
      mm.data()[i] = beta1 * mm.data()[i] + (1.0 - beta1) * g;
      vv.data()[i] = beta2 * vv.data()[i] + (1.0 - beta2) * g * g;
      double mhat = mm.data()[i] / bc1;
      double vhat = vv.data()[i] / bc2;
      p.value.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void fit_spectral_stats(model::Model* m, const mix::Manifest& manifest,
                        const std::string& manifest_dir, int max_records) {
  int f = m->cfg.f_spec();
  std::vector<double> sum(f, 0.0), sumsq(f, 0.0);
  int64_t frames = 0;
  int used = 0;
  int total = static_cast<int>(manifest.records.size());
  for (int i = 0; i < total && used < max_records; ++i) {
    mix::RecordAudio audio = mix::load_record_audio(manifest, manifest_dir, i);
    dsp::Spectrogram spec = dsp::stft(audio.mixture, m->cfg.stft);
    Tensor lm = dsp::log_magnitude(spec, m->cfg.log_floor);
    for (int64_t t = 0; t < lm.rows(); ++t)
      for (int64_t c = 0; c < f; ++c) {
        sum[c] += lm.at(t, c);
        sumsq[c] += lm.at(t, c) * lm.at(t, c);
      }
    frames += lm.rows();
    ++used;
  }
  if (frames == 0)
    throw std::runtime_error("fit_spectral_stats: no frames in manifest");
  for (int c = 0; c < f; ++c) {
    double mean = sum[c] / static_cast<double>(frames);
    double var = sumsq[c] / static_cast<double>(frames) - mean * mean;
    m->spec_mean.data()[c] = mean;
    m->spec_std.data()[c] = std::sqrt(std::max(var, 0.0)) < 1e-8
                                ? 1e-8
                                : std::sqrt(std::max(var, 0.0));
  }
}

namespace {

struct CroppedItem {
  Waveform mixture;
  std::vector<Waveform> sources;
};

CroppedItem crop_item(const mix::RecordAudio& audio, int64_t seg, Rng* rng) {
  CroppedItem item;
  int64_t len = static_cast<int64_t>(audio.mixture.samples.size());
  int64_t off = 0;
  int64_t take = len;
  if (seg > 0 && len > seg) {
    off = static_cast<int64_t>(
        rng->uniform_int(static_cast<uint64_t>(len - seg + 1)));
    take = seg;
  }
  auto cut = [&](const Waveform& w) {
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(w.samples.begin() + off, w.samples.begin() + off + take);
    return out;
  };
  item.mixture = cut(audio.mixture);
  for (const auto& s : audio.sources) item.sources.push_back(cut(s));
  return item;
}

}  // namespace

TrainSummary train(const RunConfig& cfg, const TrainOptions& opts) {
  model::Model* m = nullptr;
  std::unique_ptr<model::Model> owned;
  AdamState adam;
  Rng data_rng(mix_seed(static_cast<uint64_t>(cfg.geti("train.seed")) ^
                        hash_string("train-data")));
  double lr = cfg.getf("train.lr");
  double best_valid = std::numeric_limits<double>::infinity();
  int64_t stall = 0;
  int64_t step = 0;
  int64_t start_epoch = 0;

  if (!opts.resume_from.empty()) {
    LoadedCheckpoint lc = load_checkpoint(opts.resume_from);
    if (!lc.has_state)
      throw std::runtime_error("cannot resume: checkpoint has no optimizer state");
    owned = std::move(lc.model);
    m = owned.get();
    adam.m = std::move(lc.state.adam_m);
    adam.v = std::move(lc.state.adam_v);
    adam.t = lc.state.step;
    step = lc.state.step;
    start_epoch = lc.state.epoch;
    lr = lc.state.lr;
    best_valid = lc.state.best_valid;
    stall = lc.state.stall_epochs;
    data_rng.set_state(lc.state.data_rng);
  } else {
    owned = std::make_unique<model::Model>(cfg);
    m = owned.get();
    adam_init(&adam, *m);
  }

  mix::Manifest manifest = mix::read_manifest(opts.manifest_path);
  if (manifest.records.empty())
    throw std::runtime_error("training manifest has no records");
  std::string manifest_dir = fs::path(opts.manifest_path).parent_path().string();
  if (manifest_dir.empty()) manifest_dir = ".";

  mix::Manifest valid;
  std::string valid_dir;
  if (!opts.valid_manifest_path.empty()) {
    valid = mix::read_manifest(opts.valid_manifest_path);
    valid_dir = fs::path(opts.valid_manifest_path).parent_path().string();
    if (valid_dir.empty()) valid_dir = ".";
  }

  if (opts.resume_from.empty())
    fit_spectral_stats(m, manifest, manifest_dir,
                       static_cast<int>(cfg.geti("train.stats_records")));

  fs::create_directories(opts.out_dir);
  m->run_config.save_file((fs::path(opts.out_dir) / "config.resolved").string());
  std::ofstream log((fs::path(opts.out_dir) / "train_log.jsonl").string(),
                    std::ios::app);

  const int64_t epochs = cfg.geti("train.epochs");
  const int64_t batch_size = std::max<int64_t>(1, cfg.geti("train.batch_size"));
  const int64_t max_steps = cfg.geti("train.max_steps");
  const int64_t log_every = std::max<int64_t>(1, cfg.geti("train.log_every"));
  const int64_t patience = cfg.geti("train.lr_halve_patience");
  const double beta1 = cfg.getf("train.adam_beta1");
  const double beta2 = cfg.getf("train.adam_beta2");
  const double eps = cfg.getf("train.adam_eps");
  const double clip = cfg.getf("train.grad_clip_norm");
  const int64_t seg = static_cast<int64_t>(
      cfg.getf("train.segment_seconds") * m->cfg.sample_rate);

  std::string last_path = (fs::path(opts.out_dir) / "last.ckpt").string();
  std::string best_path = (fs::path(opts.out_dir) / "best.ckpt").string();

  TrainSummary summary;
  summary.best_valid = best_valid;

  auto save_state = [&](const std::string& path, int64_t epoch) {
    TrainState st;
    st.step = step;
    st.epoch = epoch;
    st.lr = lr;
    st.best_valid = best_valid;
    st.stall_epochs = stall;
    st.adam_m = adam.m;
    st.adam_v = adam.v;
    st.data_rng = data_rng.state();
    save_checkpoint(path, *m, &st);
  };

  bool stop = false;
  int64_t epoch = start_epoch;
  for (; epoch < epochs && !stop; ++epoch) {
    std::vector<int> order(manifest.records.size());
    std::iota(order.begin(), order.end(), 0);
    data_rng.shuffle(order);

    double epoch_loss = 0.0;
    int64_t epoch_items = 0;
    for (size_t pos = 0; pos < order.size() && !stop; pos += batch_size) {
      m->zero_grad();
      double batch_loss = 0.0;
      int64_t items = 0;
      for (size_t b = pos;
           b < std::min(pos + static_cast<size_t>(batch_size), order.size());
           ++b) {
        mix::RecordAudio audio =
            mix::load_record_audio(manifest, manifest_dir, order[b]);
        CroppedItem item = crop_item(audio, seg, &data_rng);
        nn::Tape tape;
        model::Forward fw = m->forward(tape, item.mixture, /*training=*/true);
        std::vector<int> perm;
        int loss = build_pit_loss(tape, fw.estimates, item.sources, &perm);
        double lv = tape.val(loss).data()[0];
        if (!std::isfinite(lv))
          throw std::runtime_error(
              "training diverged: non-finite loss at step " +
              std::to_string(step + 1) + " (epoch " + std::to_string(epoch) +
              ", record " + std::to_string(order[b]) + ")");
        // Scale so batch gradients average rather than sum.
        int scaled = tape.affine(loss, 1.0 / static_cast<double>(batch_size),
                                 0.0);
        tape.backward(scaled);
        batch_loss += lv;
        ++items;
      }
      if (items == 0) continue;
      clip_grad_norm(m, clip);
      adam_step(m, &adam, lr, beta1, beta2, eps);
      ++step;
      batch_loss /= static_cast<double>(items);
      epoch_loss += batch_loss * static_cast<double>(items);
      epoch_items += items;
      summary.last_loss = batch_loss;
      if (step % log_every == 0 && log) {
        ordered_json j;
        j["type"] = "step";
        j["epoch"] = epoch;
        j["step"] = step;
        j["loss"] = batch_loss;
        j["lr"] = lr;
        log << j.dump() << "\n" << std::flush;
      }
      if (opts.step_hook && opts.step_hook(step, batch_loss, *m)) stop = true;
      if (max_steps > 0 && step >= max_steps) stop = true;
    }
    if (stop) break;

    double valid_loss = std::numeric_limits<double>::quiet_NaN();
    double valid_sisnr = std::numeric_limits<double>::quiet_NaN();
    if (!valid.records.empty()) {
      double acc = 0.0;
      double snr_acc = 0.0;
      for (int vi = 0; vi < static_cast<int>(valid.records.size()); ++vi) {
        mix::RecordAudio audio = mix::load_record_audio(valid, valid_dir, vi);
        nn::Tape tape;
        model::Forward fw = m->forward(tape, audio.mixture, /*training=*/true);
        std::vector<Waveform> ests;
        for (int e : fw.estimates) {
          Waveform w;
          w.sample_rate = m->cfg.sample_rate;
          const Tensor& v = tape.val(e);
          w.samples.assign(v.data(), v.data() + v.numel());
          ests.push_back(std::move(w));
        }
        PitResult pit = pit_loss(audio.sources, ests);
        acc += pit.loss;
        snr_acc += -pit.loss;  // mean SDR under the best assignment
      }
      valid_loss = acc / static_cast<double>(valid.records.size());
      valid_sisnr = snr_acc / static_cast<double>(valid.records.size());
      if (valid_loss < best_valid - 1e-9) {
        best_valid = valid_loss;
        stall = 0;
        save_state(best_path, epoch + 1);
        summary.best_checkpoint = best_path;
      } else {
        ++stall;
        if (stall >= patience && patience > 0) {
          lr *= 0.5;
          stall = 0;
        }
      }
      summary.best_valid = best_valid;
    }

    if (log) {
      ordered_json j;
      j["type"] = "epoch";
      j["epoch"] = epoch + 1;
      j["step"] = step;
      j["train_loss"] =
          epoch_items > 0 ? epoch_loss / static_cast<double>(epoch_items) : 0.0;
      if (!valid.records.empty()) {
        j["valid_loss"] = valid_loss;
        j["valid_sdr"] = valid_sisnr;
      }
      j["lr"] = lr;
      log << j.dump() << "\n" << std::flush;
    }
    save_state(last_path, epoch + 1);
    summary.epochs = epoch + 1;
  }
  if (stop || summary.epochs == 0) save_state(last_path, epoch);
  summary.steps = step;
  summary.last_checkpoint = last_path;
  if (summary.best_checkpoint.empty()) summary.best_checkpoint = last_path;
  return summary;
}

std::vector<Waveform> separate(model::Model& m, const Waveform& mixture) {
  nn::Tape tape;
  model::Forward fw = m.forward(tape, mixture, /*training=*/false);
  std::vector<Waveform> out;
  for (int e : fw.estimates) {
    Waveform w;
    w.sample_rate = m.cfg.sample_rate;
    const Tensor& v = tape.val(e);
    w.samples.assign(v.data(), v.data() + v.numel());
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace train
}  // namespace tfsep
