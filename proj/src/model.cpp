// tfsep/model.cpp

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

#include "tfsep/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tfsep/rng.hpp"

namespace tfsep {
namespace model {

ModelConfig ModelConfig::from(const RunConfig& rc) {
  ModelConfig c;
  c.sample_rate = static_cast<int>(rc.geti("sample_rate"));
  c.stft.frame_len = static_cast<int>(rc.geti("stft.frame_len"));
  c.stft.hop = static_cast<int>(rc.geti("stft.hop"));
  c.log_floor = rc.getf("dsp.log_floor");
  c.conv_channels = static_cast<int>(rc.geti("encoder.conv_channels"));
  c.use_spectral = rc.getb("encoder.use_spectral");
  c.bottleneck = static_cast<int>(rc.geti("separator.bottleneck_channels"));
  c.hidden = static_cast<int>(rc.geti("separator.hidden_channels"));
  c.kernel_size = static_cast<int>(rc.geti("separator.kernel_size"));
  c.num_blocks = static_cast<int>(rc.geti("separator.num_blocks"));
  c.num_repeats = static_cast<int>(rc.geti("separator.num_repeats"));
  c.embed_dim = static_cast<int>(rc.geti("separator.embed_dim"));

  const std::string& norm = rc.gets("separator.norm");
  if (norm == "global_layer") c.norm = NormKind::kGlobalLayer;
  else if (norm == "none") c.norm = NormKind::kNone;
  else throw std::invalid_argument("separator.norm: unknown value: " + norm);

  const std::string& mode = rc.gets("separator.mode");
  if (mode == "clustering") c.mode = SeparatorMode::kClustering;
  else if (mode == "direct") c.mode = SeparatorMode::kDirect;
  else throw std::invalid_argument("separator.mode: unknown value: " + mode);

  const std::string& mn = rc.gets("separator.mask_normalization");
  if (mn == "softmax") c.mask_norm = MaskNorm::kSoftmax;
  else if (mn == "raw") c.mask_norm = MaskNorm::kRaw;
  else
    throw std::invalid_argument("separator.mask_normalization: unknown value: " +
                                mn);

  c.num_centers = static_cast<int>(rc.geti("cluster.num_centers"));
  c.kmeans_iters = static_cast<int>(rc.geti("cluster.kmeans_iters"));
  c.num_speakers = static_cast<int>(rc.geti("model.num_speakers"));
  c.alpha = rc.getf("decoder.alpha");

  const std::string& md = rc.gets("decoder.spectral_mask_domain");
  if (md == "linear") c.mask_domain = MaskDomain::kLinear;
  else if (md == "log") c.mask_domain = MaskDomain::kLog;
  else
    throw std::invalid_argument("decoder.spectral_mask_domain: unknown value: " +
                                md);

  if (c.stft.frame_len <= 0 || c.stft.hop <= 0 ||
      c.stft.frame_len % c.stft.hop != 0)
    throw std::invalid_argument("stft: frame_len must be a multiple of hop");
  if (c.kernel_size % 2 == 0)
    throw std::invalid_argument("separator.kernel_size must be odd");
  if (c.num_speakers < 1) throw std::invalid_argument("model.num_speakers < 1");
  if (c.mode == SeparatorMode::kClustering &&
      c.num_centers < c.num_speakers)
    throw std::invalid_argument(
        "cluster.num_centers must be >= model.num_speakers");
  if (c.alpha < 0.0 || c.alpha > 1.0)
    throw std::invalid_argument("decoder.alpha must lie in [0, 1]");
  return c;
}

std::vector<std::vector<int>> combinations(int k, int n) {
  std::vector<std::vector<int>> out;
  if (n < 0 || n > k) return out;
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    int i = n - 1;
    while (i >= 0 && idx[i] == k - n + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

double min_pairwise_distance(const Tensor& rows) {
  int64_t n = rows.rows(), d = rows.cols();
  if (n < 2) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        double diff = rows.at(i, c) - rows.at(j, c);
        acc += diff * diff;
      }
      best = std::min(best, std::sqrt(acc));
    }
  return best;
}

Tensor kmeans_step(const Tensor& points, const Tensor& centers,
                   KmeansMode mode) {
  int64_t p = points.rows(), d = points.cols(), m = centers.rows();
  if (centers.cols() != d)
    throw std::invalid_argument("kmeans_step: dimension mismatch");
  Tensor out = Tensor::zeros({m, d});
  if (mode == KmeansMode::kHard) {
    std::vector<double> count(m, 0.0);
    for (int64_t i = 0; i < p; ++i) {
      int64_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int64_t c = 0; c < d; ++c) {
          double diff = points.at(i, c) - centers.at(j, c);
          acc += diff * diff;
        }
        if (acc < bd) {
          bd = acc;
          best = j;
        }
      }
      count[best] += 1.0;
      for (int64_t c = 0; c < d; ++c) out.at(best, c) += points.at(i, c);
    }
    for (int64_t j = 0; j < m; ++j) {
      if (count[j] > 0.0) {
        for (int64_t c = 0; c < d; ++c) out.at(j, c) /= count[j];
      } else {
        // Empty cluster: keep where it was.
        for (int64_t c = 0; c < d; ++c) out.at(j, c) = centers.at(j, c);
      }
    }
    return out;
  }
  // Soft: responsibilities are a per-point softmax over -squared-distance.
  const double kTiny = 1e-30;
  std::vector<double> wsum(m, 0.0);
  std::vector<double> logits(m);
  for (int64_t i = 0; i < p; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        double diff = points.at(i, c) - centers.at(j, c);
        acc += diff * diff;
      }
      logits[j] = -acc;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (int64_t j = 0; j < m; ++j) {
      logits[j] = std::exp(logits[j] - mx);
      z += logits[j];
    }
    for (int64_t j = 0; j < m; ++j) {
      double w = logits[j] / z;
      wsum[j] += w;
      for (int64_t c = 0; c < d; ++c) out.at(j, c) += w * points.at(i, c);
    }
  }
  for (int64_t j = 0; j < m; ++j)
    for (int64_t c = 0; c < d; ++c) out.at(j, c) /= (wsum[j] + kTiny);
  return out;
}

namespace {

Tensor gather(const Tensor& src, const std::vector<int>& rows) {
  Tensor out = Tensor::zeros({static_cast<int64_t>(rows.size()), src.cols()});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int64_t c = 0; c < src.cols(); ++c)
      out.at(static_cast<int64_t>(i), c) = src.at(rows[i], c);
  return out;
}

}  // namespace

ClusterSelection cluster_select(const Tensor& points, const Tensor& centers,
                                int n, int iters, KmeansMode mode) {
  int k = static_cast<int>(centers.rows());
  if (n > k)
    throw std::invalid_argument("cluster_select: more speakers than centers");
  auto subsets = combinations(k, n);
  ClusterSelection best;
  for (size_t s = 0; s < subsets.size(); ++s) {
    Tensor c = gather(centers, subsets[s]);
    for (int it = 0; it < iters; ++it) c = kmeans_step(points, c, mode);
    double dist = min_pairwise_distance(c);
    // Strict > keeps the lowest lexicographic subset on ties.
    if (best.subset_index < 0 || dist > best.in_set_distance) {
      best.centroids = c;
      best.subset = subsets[s];
      best.subset_index = static_cast<int>(s);
      best.in_set_distance = dist;
    }
  }
  return best;
}

Tensor estimate_masks(const Tensor& points, const Tensor& centroids,
                      MaskNorm norm) {
  int64_t p = points.rows(), n = centroids.rows();
  if (points.cols() != centroids.cols())
    throw std::invalid_argument("estimate_masks: dimension mismatch");
  Tensor out = Tensor::zeros({p, n});
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t c = 0; c < points.cols(); ++c)
        acc += points.at(i, c) * centroids.at(j, c);
      out.at(i, j) = acc;
    }
  if (norm == MaskNorm::kSoftmax) {
    for (int64_t i = 0; i < p; ++i) {
      double mx = out.at(i, 0);
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, out.at(i, j));
      double z = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        out.at(i, j) = std::exp(out.at(i, j) - mx);
        z += out.at(i, j);
      }
      for (int64_t j = 0; j < n; ++j) out.at(i, j) /= z;
    }
  }
  return out;
}

Model::Model(const RunConfig& rc)
    : run_config(rc), cfg(ModelConfig::from(rc)) {
  int L = cfg.stft.frame_len;
  int F = cfg.feature_channels();
  int B = cfg.bottleneck;
  int H = cfg.hidden;
  int P = cfg.kernel_size;

  uint64_t seed =
      mix_seed(static_cast<uint64_t>(rc.geti("train.seed")) ^
               hash_string("model-init"));
  Rng rng(seed);

  auto uniform_init = [&](int64_t rows, int64_t cols, double bound) {
    Tensor t = Tensor::zeros({rows, cols});
    for (int64_t i = 0; i < t.numel(); ++i)
      t.data()[i] = rng.uniform(-bound, bound);
    return t;
  };

  add_param("encoder.kernel",
            uniform_init(cfg.conv_channels, L, std::sqrt(1.0 / L)));
  add_param("encoder.bias", Tensor::zeros({1, cfg.conv_channels}));

  add_param("sep.entry.w", uniform_init(F, B, std::sqrt(1.0 / F)));
  add_param("sep.entry.b", Tensor::zeros({1, B}));

  int nblocks = cfg.num_blocks * cfg.num_repeats;
  for (int i = 0; i < nblocks; ++i) {
    std::string pre = "sep.block" + std::to_string(i);
    add_param(pre + ".in.w", uniform_init(B, H, std::sqrt(1.0 / B)));
    add_param(pre + ".in.b", Tensor::zeros({1, H}));
    add_param(pre + ".prelu1", Tensor::full({1}, 0.25));
    if (cfg.norm == NormKind::kGlobalLayer) {
      add_param(pre + ".ln1.gamma", Tensor::full({1, H}, 1.0));
      add_param(pre + ".ln1.beta", Tensor::zeros({1, H}));
    }
    add_param(pre + ".dw.w", uniform_init(H, P, std::sqrt(1.0 / P)));
    add_param(pre + ".dw.b", Tensor::zeros({1, H}));
    add_param(pre + ".prelu2", Tensor::full({1}, 0.25));
    if (cfg.norm == NormKind::kGlobalLayer) {
      add_param(pre + ".ln2.gamma", Tensor::full({1, H}, 1.0));
      add_param(pre + ".ln2.beta", Tensor::zeros({1, H}));
    }
    add_param(pre + ".out.w", uniform_init(H, B, std::sqrt(1.0 / H)));
    add_param(pre + ".out.b", Tensor::zeros({1, B}));
  }

  if (cfg.mode == SeparatorMode::kClustering) {
    int D = cfg.embed_dim;
    add_param("sep.embed.w",
              uniform_init(B, static_cast<int64_t>(F) * D, std::sqrt(1.0 / B)));
    add_param("sep.embed.b", Tensor::zeros({1, static_cast<int64_t>(F) * D}));
    // Initial centers: unit Gaussian, then nudged apart until no pair sits
    // closer than 0.5 so the subset search starts distinguishable.
    Tensor centers = Tensor::zeros({cfg.num_centers, D});
    for (int64_t i = 0; i < centers.numel(); ++i)
      centers.data()[i] = rng.normal();
    for (int attempt = 0; attempt < 200; ++attempt) {
      if (min_pairwise_distance(centers) >= 0.5) break;
      // Push the closest pair apart along their difference.
      int bi = 0, bj = 1;
      double bd = std::numeric_limits<double>::infinity();
      for (int i = 0; i < cfg.num_centers; ++i)
        for (int j = i + 1; j < cfg.num_centers; ++j) {
          double acc = 0.0;
          for (int c = 0; c < D; ++c) {
            double diff = centers.at(i, c) - centers.at(j, c);
            acc += diff * diff;
          }
          if (acc < bd) {
            bd = acc;
            bi = i;
            bj = j;
          }
        }
      double norm = std::sqrt(bd);
      for (int c = 0; c < D; ++c) {
        double dir = (norm > 1e-12)
                         ? (centers.at(bi, c) - centers.at(bj, c)) / norm
                         : rng.normal();
        centers.at(bi, c) += 0.3 * dir;
        centers.at(bj, c) -= 0.3 * dir;
      }
    }
    add_param("cluster.centers", std::move(centers));
  } else {
    int N = cfg.num_speakers;
    add_param("sep.mask.w",
              uniform_init(B, static_cast<int64_t>(F) * N, std::sqrt(1.0 / B)));
    add_param("sep.mask.b", Tensor::zeros({1, static_cast<int64_t>(F) * N}));
  }

  add_param("decoder.kernel",
            uniform_init(cfg.conv_channels, L, std::sqrt(1.0 / cfg.conv_channels)));

  spec_mean = Tensor::zeros({1, cfg.f_spec()});
  spec_std = Tensor::full({1, cfg.f_spec()}, 1.0);
}

void Model::add_param(const std::string& name, Tensor init) {
  index_[name] = static_cast<int>(params.size());
  params.emplace_back(name, std::move(init));
}

nn::Param& Model::p(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("unknown parameter: " + name);
  return params[it->second];
}

const nn::Param& Model::p(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("unknown parameter: " + name);
  return params[it->second];
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const auto& pr : params) n += pr.value.numel();
  return n;
}

void Model::zero_grad() {
  for (auto& pr : params) pr.grad.zero();
}

int Model::build_encoder(nn::Tape& tape, const Waveform& mix,
                         EncoderAux* aux) {
  if (mix.sample_rate != cfg.sample_rate)
    throw std::invalid_argument(
        "sample-rate mismatch: model expects " +
        std::to_string(cfg.sample_rate) + " Hz, input is " +
        std::to_string(mix.sample_rate) + " Hz");
  dsp::Spectrogram spec = dsp::stft(mix, cfg.stft);
  aux->mix_mag = dsp::magnitude(spec);
  aux->mix_phase = dsp::phase(spec);
  Tensor logmag = dsp::log_magnitude(spec, cfg.log_floor);
  Tensor sf = logmag;
  for (int64_t t = 0; t < sf.rows(); ++t)
    for (int64_t f = 0; f < sf.cols(); ++f)
      sf.at(t, f) = (sf.at(t, f) - spec_mean.data()[f]) / spec_std.data()[f];
  aux->spec_feats = sf;
  aux->frames = dsp::frame_signal(mix, cfg.stft);

  int frames_c = tape.constant(aux->frames);
  int conv = tape.relu(
      tape.add_rowvec(tape.matmul_nt(frames_c, tape.param(&p("encoder.kernel"))),
                      tape.param(&p("encoder.bias"))));
  if (!cfg.use_spectral) return conv;
  return tape.concat_cols(conv, tape.constant(sf));
}

int Model::build_trunk(nn::Tape& tape, int feat_node) {
  int x = tape.add_rowvec(
      tape.matmul(feat_node, tape.param(&p("sep.entry.w"))),
      tape.param(&p("sep.entry.b")));
  int nblocks = cfg.num_blocks * cfg.num_repeats;
  for (int i = 0; i < nblocks; ++i) {
    int dil = 1 << (i % cfg.num_blocks);
    std::string pre = "sep.block" + std::to_string(i);
    int y = tape.add_rowvec(tape.matmul(x, tape.param(&p(pre + ".in.w"))),
                            tape.param(&p(pre + ".in.b")));
    y = tape.prelu(y, tape.param(&p(pre + ".prelu1")));
    if (cfg.norm == NormKind::kGlobalLayer)
      y = tape.global_layer_norm(y, tape.param(&p(pre + ".ln1.gamma")),
                                 tape.param(&p(pre + ".ln1.beta")));
    y = tape.depthwise_conv1d(y, tape.param(&p(pre + ".dw.w")),
                              tape.param(&p(pre + ".dw.b")), dil);
    y = tape.prelu(y, tape.param(&p(pre + ".prelu2")));
    if (cfg.norm == NormKind::kGlobalLayer)
      y = tape.global_layer_norm(y, tape.param(&p(pre + ".ln2.gamma")),
                                 tape.param(&p(pre + ".ln2.beta")));
    y = tape.add_rowvec(tape.matmul(y, tape.param(&p(pre + ".out.w"))),
                        tape.param(&p(pre + ".out.b")));
    x = tape.add(x, y);
  }
  return x;
}

int Model::build_decoder(nn::Tape& tape, int feat_node, int mask_tf,
                         const EncoderAux& aux, int64_t out_len) {
  int fc = cfg.conv_channels;
  int F = cfg.feature_channels();
  int m_conv = cfg.use_spectral ? tape.slice_cols(mask_tf, 0, fc) : mask_tf;
  int h_conv = cfg.use_spectral ? tape.slice_cols(feat_node, 0, fc) : feat_node;
  int masked = tape.mul(h_conv, m_conv);
  int frames = tape.matmul(masked, tape.param(&p("decoder.kernel")));
  int s_time = tape.overlap_add_frames(frames, cfg.stft.hop, out_len);
  if (!cfg.use_spectral || cfg.alpha >= 1.0) return s_time;

  int m_spec = tape.slice_cols(mask_tf, fc, F);
  int mag_i = -1;
  if (cfg.mask_domain == MaskDomain::kLinear) {
    mag_i = tape.mul_const(m_spec, aux.mix_mag);
  } else {
    int masked_std = tape.mul_const(m_spec, aux.spec_feats);
    int logmag = tape.rowvec_affine_const(masked_std, spec_std, spec_mean);
    mag_i = tape.exp_(logmag);
  }
  std::vector<double> win = dsp::sqrt_hann_window(cfg.stft.frame_len);
  int s_spec = tape.istft_mix_phase(mag_i, aux.mix_phase, win, cfg.stft.hop,
                                    out_len);
  if (cfg.alpha <= 0.0) return s_spec;
  return tape.add(tape.affine(s_time, cfg.alpha, 0.0),
                  tape.affine(s_spec, 1.0 - cfg.alpha, 0.0));
}

Forward Model::forward(nn::Tape& tape, const Waveform& mix, bool training,
                       int forced_subset) {
  EncoderAux aux;
  int feat = build_encoder(tape, mix, &aux);
  int trunk = build_trunk(tape, feat);
  int64_t T = tape.val(feat).rows();
  int F = cfg.feature_channels();
  int N = cfg.num_speakers;

  Forward fw;
  fw.feature_map = feat;
  fw.trunk_out = trunk;
  fw.frames = static_cast<int>(T);
  fw.out_len = static_cast<int64_t>(mix.samples.size());

  int masks = -1;
  if (cfg.mode == SeparatorMode::kClustering) {
    int D = cfg.embed_dim;
    int embed = tape.add_rowvec(
        tape.matmul(trunk, tape.param(&p("sep.embed.w"))),
        tape.param(&p("sep.embed.b")));
    int V = tape.reshape(embed, {T * F, D});
    fw.embeddings = V;
    int centers_node = tape.param(&p("cluster.centers"));

    int A = -1;
    if (training) {
      // Soft path: refine every subset on the tape so gradients flow through
      // the one we keep.
      auto subsets = combinations(cfg.num_centers, N);
      std::vector<int> cand(subsets.size());
      std::vector<double> score(subsets.size());
      for (size_t s = 0; s < subsets.size(); ++s) {
        std::vector<int64_t> rows(subsets[s].begin(), subsets[s].end());
        int c = tape.gather_rows(centers_node, rows);
        for (int it = 0; it < cfg.kmeans_iters; ++it) {
          int w = tape.softmax_rows(tape.negsqdist(V, c));
          c = tape.weighted_mean_rows(w, V);
        }
        cand[s] = c;
        score[s] = min_pairwise_distance(tape.val(c));
      }
      size_t best = 0;
      if (forced_subset >= 0) {
        best = static_cast<size_t>(forced_subset);
        if (best >= subsets.size())
          throw std::out_of_range("forced subset index");
      } else {
        for (size_t s = 1; s < subsets.size(); ++s)
          if (score[s] > score[best]) best = s;
      }
      A = cand[best];
      fw.subset_index = static_cast<int>(best);
    } else {
      ClusterSelection sel =
          cluster_select(tape.val(V), tape.val(centers_node), N,
                         cfg.kmeans_iters, KmeansMode::kHard);
      A = tape.constant(sel.centroids);
      fw.subset_index = sel.subset_index;
    }
    int logits = tape.matmul_nt(V, A);
    masks = (cfg.mask_norm == MaskNorm::kSoftmax) ? tape.softmax_rows(logits)
                                                  : logits;
  } else {
    int logits = tape.add_rowvec(
        tape.matmul(trunk, tape.param(&p("sep.mask.w"))),
        tape.param(&p("sep.mask.b")));
    // Columns are laid out speaker-fastest, so the flat buffer reads
    // directly as [T*F x N].
    int r = tape.reshape(logits, {T * F, N});
    masks = (cfg.mask_norm == MaskNorm::kSoftmax) ? tape.softmax_rows(r) : r;
  }
  fw.masks = masks;

  for (int i = 0; i < N; ++i) {
    int m_col = tape.slice_cols(masks, i, i + 1);
    int m_tf = tape.reshape(m_col, {T, F});
    fw.estimates.push_back(build_decoder(tape, feat, m_tf, aux, fw.out_len));
  }
  return fw;
}

Tensor Model::encode_features(const Waveform& mix) {
  nn::Tape tape;
  EncoderAux aux;
  int feat = build_encoder(tape, mix, &aux);
  return tape.val(feat);
}

Tensor Model::embed_features(const Tensor& feature_map) {
  if (cfg.mode != SeparatorMode::kClustering)
    throw std::logic_error("model was built without an embedding head");
  nn::Tape tape;
  int feat = tape.constant(feature_map);
  int trunk = build_trunk(tape, feat);
  int embed = tape.add_rowvec(tape.matmul(trunk, tape.param(&p("sep.embed.w"))),
                              tape.param(&p("sep.embed.b")));
  int V = tape.reshape(embed,
                       {feature_map.rows() * feature_map.cols(), cfg.embed_dim});
  return tape.val(V);
}

Tensor Model::direct_masks(const Tensor& feature_map) {
  if (cfg.mode != SeparatorMode::kDirect)
    throw std::logic_error("model was built without a direct mask head");
  nn::Tape tape;
  int feat = tape.constant(feature_map);
  int trunk = build_trunk(tape, feat);
  int logits = tape.add_rowvec(tape.matmul(trunk, tape.param(&p("sep.mask.w"))),
                               tape.param(&p("sep.mask.b")));
  int r = tape.reshape(logits, {feature_map.rows() * feature_map.cols(),
                                static_cast<int64_t>(cfg.num_speakers)});
  int masks =
      (cfg.mask_norm == MaskNorm::kSoftmax) ? tape.softmax_rows(r) : r;
  return tape.val(masks);
}

std::vector<Waveform> Model::decode(const Tensor& feature_map,
                                    const std::vector<Tensor>& masks,
                                    const dsp::Spectrogram& mix_spec,
                                    int64_t out_len) {
  nn::Tape tape;
  int feat = tape.constant(feature_map);
  EncoderAux aux;
  aux.mix_mag = dsp::magnitude(mix_spec);
  aux.mix_phase = dsp::phase(mix_spec);
  if (cfg.mask_domain == MaskDomain::kLog) {
    Tensor logmag = dsp::log_magnitude(mix_spec, cfg.log_floor);
    for (int64_t t = 0; t < logmag.rows(); ++t)
      for (int64_t f = 0; f < logmag.cols(); ++f)
        logmag.at(t, f) =
            (logmag.at(t, f) - spec_mean.data()[f]) / spec_std.data()[f];
    aux.spec_feats = logmag;
  }
  std::vector<Waveform> out;
  for (const Tensor& m : masks) {
    if (m.rows() != feature_map.rows() || m.cols() != feature_map.cols())
      throw std::invalid_argument("decode: mask shape mismatch");
    int mn = tape.constant(m);
    int est = build_decoder(tape, feat, mn, aux, out_len);
    Waveform w;
    w.sample_rate = cfg.sample_rate;
    const Tensor& v = tape.val(est);
    w.samples.assign(v.data(), v.data() + v.numel());
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace model
}  // namespace tfsep
