// tfsep/tests/test_model.cpp

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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "tfsep/config.hpp"
#include "tfsep/dsp.hpp"
#include "tfsep/rng.hpp"
#include "tfsep/tape.hpp"
#include "tfsep/tensor.hpp"

using namespace tfsep;
using namespace tfsep::testing;
using model::KmeansMode;

namespace {

// A model small enough that forward passes are cheap in unit tests.
RunConfig small_rc() {
  RunConfig rc = RunConfig::defaults();
  rc.set("encoder.conv_channels", "16");
  rc.set("separator.bottleneck_channels", "12");
  rc.set("separator.hidden_channels", "20");
  rc.set("separator.num_blocks", "2");
  rc.set("separator.num_repeats", "1");
  rc.set("separator.embed_dim", "6");
  return rc;
}

Tensor from_rows(const std::vector<std::vector<double>>& rows) {
  Tensor t = Tensor::zeros({static_cast<int64_t>(rows.size()),
                            static_cast<int64_t>(rows[0].size())});
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      t.at(static_cast<int64_t>(i), static_cast<int64_t>(j)) = rows[i][j];
  return t;
}

}  // namespace

TEST_CASE("default configuration lands on the published parameter budget") {
  model::Model m(RunConfig::defaults());
  CHECK(m.param_count() == 9995884);
  CHECK(m.param_count() >= 8500000);
  CHECK(m.param_count() <= 11500000);
}

TEST_CASE("combinations enumerates n-subsets in lexicographic order") {
  auto c42 = model::combinations(4, 2);
  std::vector<std::vector<int>> want = {{0, 1}, {0, 2}, {0, 3},
                                        {1, 2}, {1, 3}, {2, 3}};
  CHECK(c42 == want);
  CHECK(model::combinations(5, 3).size() == 10);
  CHECK(model::combinations(3, 3) == std::vector<std::vector<int>>{{0, 1, 2}});
}

TEST_CASE("min_pairwise_distance") {
  Tensor rows = from_rows({{0, 0}, {3, 4}, {0, 1}});
  CHECK(model::min_pairwise_distance(rows) == doctest::Approx(1.0));
  Tensor one = from_rows({{5, 5}});
  CHECK(model::min_pairwise_distance(one) == 0.0);
}

TEST_CASE("hard k-means step matches a hand assignment") {
  Tensor pts = from_rows({{0, 0}, {0.5, 0}, {10, 0}, {9, 1}});
  Tensor ctr = from_rows({{0, 1}, {9, 0}, {50, 50}});
  Tensor next = model::kmeans_step(pts, ctr, KmeansMode::kHard);
  CHECK(next.at(0, 0) == doctest::Approx(0.25));
  CHECK(next.at(0, 1) == doctest::Approx(0.0));
  CHECK(next.at(1, 0) == doctest::Approx(9.5));
  CHECK(next.at(1, 1) == doctest::Approx(0.5));
  // Center with no points keeps its position.
  CHECK(next.at(2, 0) == 50.0);
  CHECK(next.at(2, 1) == 50.0);
}

TEST_CASE("hard k-means ties go to the lower-index center") {
  Tensor pts = from_rows({{4.5, 0}});
  Tensor ctr = from_rows({{0, 0}, {9, 0}});
  Tensor next = model::kmeans_step(pts, ctr, KmeansMode::kHard);
  CHECK(next.at(0, 0) == doctest::Approx(4.5));
  CHECK(next.at(1, 0) == 9.0);  // untouched
}

TEST_CASE("soft k-means step matches the responsibility formula") {
  Tensor pts = from_rows({{0.0}, {1.0}});
  Tensor ctr = from_rows({{0.0}, {1.0}});
  Tensor next = model::kmeans_step(pts, ctr, KmeansMode::kSoft);
  // Each point: softmax over -squared-distance to the two centers.
  double w_near = 1.0 / (1.0 + std::exp(-1.0));
  double w_far = std::exp(-1.0) / (1.0 + std::exp(-1.0));
  double c0 = (w_near * 0.0 + w_far * 1.0) / (w_near + w_far + 1e-30);
  double c1 = (w_far * 0.0 + w_near * 1.0) / (w_near + w_far + 1e-30);
  CHECK(next.at(0, 0) == doctest::Approx(c0).epsilon(1e-12));
  CHECK(next.at(1, 0) == doctest::Approx(c1).epsilon(1e-12));
}

TEST_CASE("cluster_select picks the most spread refined subset") {
  // Two blobs plus four candidate centers: one near each blob, two clumped
  // in the middle.
  Rng rng(5);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 20; ++i)
    pts.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
  for (int i = 0; i < 20; ++i)
    pts.push_back({10.0 + rng.uniform(-0.5, 0.5),
                   10.0 + rng.uniform(-0.5, 0.5)});
  Tensor points = from_rows(pts);
  Tensor centers = from_rows({{0.5, 0.5}, {9.5, 9.5}, {5.0, 5.0}, {5.2, 5.2}});

  model::ClusterSelection sel =
      model::cluster_select(points, centers, 2, 1, KmeansMode::kHard);

  // Independent enumeration with the public primitives.
  auto subsets = model::combinations(4, 2);
  int best = -1;
  double best_dist = 0.0;
  for (size_t s = 0; s < subsets.size(); ++s) {
    Tensor c = Tensor::zeros({2, 2});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) c.at(i, j) = centers.at(subsets[s][i], j);
    c = model::kmeans_step(points, c, KmeansMode::kHard);
    double d = model::min_pairwise_distance(c);
    if (best < 0 || d > best_dist) {
      best = static_cast<int>(s);
      best_dist = d;
    }
  }
  CHECK(sel.subset_index == best);
  CHECK(sel.in_set_distance == doctest::Approx(best_dist));
  CHECK(sel.centroids.rows() == 2);
  // The winning refinement straddles both blobs.
  CHECK(sel.in_set_distance > 10.0);
}

TEST_CASE("cluster_select tie keeps the lowest lexicographic subset") {
  Tensor points = from_rows({{0, 0}, {0, 0}, {0, 0}});
  Tensor centers = from_rows({{0, 0}, {0, 0}, {0, 0}});
  model::ClusterSelection sel =
      model::cluster_select(points, centers, 2, 1, KmeansMode::kHard);
  CHECK(sel.subset_index == 0);
  CHECK(sel.subset == std::vector<int>{0, 1});
  CHECK(sel.in_set_distance == 0.0);
}

TEST_CASE("estimate_masks raw scores are attractor dot products") {
  Tensor v = from_rows({{1, 2}, {0, -1}, {3, 0}});
  Tensor c = from_rows({{1, 0}, {0, 1}});
  Tensor raw = model::estimate_masks(v, c, model::MaskNorm::kRaw);
  CHECK(raw.at(0, 0) == doctest::Approx(1.0));
  CHECK(raw.at(0, 1) == doctest::Approx(2.0));
  CHECK(raw.at(1, 1) == doctest::Approx(-1.0));
  CHECK(raw.at(2, 0) == doctest::Approx(3.0));

  Tensor soft = model::estimate_masks(v, c, model::MaskNorm::kSoftmax);
  for (int64_t i = 0; i < soft.rows(); ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < soft.cols(); ++j) {
      CHECK(soft.at(i, j) > 0.0);
      s += soft.at(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Softmax keeps the ordering of the raw scores.
  CHECK(soft.at(0, 1) > soft.at(0, 0));
  CHECK(soft.at(2, 0) > soft.at(2, 1));
}

TEST_CASE("forward produces well-formed masks and estimates") {
  model::Model m(small_rc());
  Waveform mixv = make_tone(440.0, 0.4);
  for (size_t i = 0; i < mixv.size(); ++i)
    mixv.samples[i] += 0.2 * std::sin(2.0 * M_PI * 1700.0 * i / 8000.0);

  for (bool training : {true, false}) {
    nn::Tape tape;
    model::Forward fw = m.forward(tape, mixv, training);
    int T = fw.frames;
    int F = m.cfg.feature_channels();
    CHECK(F == 16 + 11);
    CHECK(T == dsp::frame_count(mixv.size(), m.cfg.stft));

    REQUIRE(fw.estimates.size() == 2);
    for (int est : fw.estimates) {
      CHECK(tape.val(est).rows() == static_cast<int64_t>(mixv.size()));
      CHECK(tape.val(est).cols() == 1);
    }
    const Tensor& masks = tape.val(fw.masks);
    REQUIRE(masks.rows() == static_cast<int64_t>(T) * F);
    REQUIRE(masks.cols() == 2);
    for (int64_t r = 0; r < masks.rows(); ++r) {
      double s = masks.at(r, 0) + masks.at(r, 1);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(masks.at(r, 0) >= 0.0);
      CHECK(masks.at(r, 1) >= 0.0);
    }
    CHECK(tape.val(fw.embeddings).rows() == static_cast<int64_t>(T) * F);
    CHECK(tape.val(fw.embeddings).cols() == m.cfg.embed_dim);
    CHECK(fw.subset_index >= 0);
    CHECK(fw.subset_index < 6);  // C(4, 2)
  }
}

TEST_CASE("embeddings unroll the projection row-major, channel fastest") {
  model::Model m(small_rc());
  Waveform mixv = make_white_noise(8, 0.25);
  nn::Tape tape;
  model::Forward fw = m.forward(tape, mixv, true);

  const Tensor& trunk = tape.val(fw.trunk_out);
  const Tensor& V = tape.val(fw.embeddings);
  const Tensor& W = m.p("sep.embed.w").value;  // [B x F*D]
  const Tensor& b = m.p("sep.embed.b").value;
  int F = m.cfg.feature_channels();
  int D = m.cfg.embed_dim;

  for (int64_t t = 0; t < trunk.rows(); t += 37) {
    for (int f = 0; f < F; f += 7) {
      for (int d = 0; d < D; ++d) {
        double acc = b.data()[f * D + d];
        for (int64_t k = 0; k < trunk.cols(); ++k)
          acc += trunk.at(t, k) * W.at(k, f * D + d);
        CHECK(V.at(t * F + f, d) == doctest::Approx(acc).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("direct-mode mask logits are laid out speaker fastest") {
  RunConfig rc = small_rc();
  rc.set("separator.mode", "direct");
  rc.set("separator.mask_normalization", "raw");
  model::Model m(rc);
  Waveform mixv = make_white_noise(4, 0.25);

  nn::Tape tape;
  model::Forward fw = m.forward(tape, mixv, true);
  CHECK(fw.embeddings == -1);
  CHECK(fw.subset_index == -1);
  const Tensor& trunk = tape.val(fw.trunk_out);
  const Tensor& masks = tape.val(fw.masks);
  const Tensor& W = m.p("sep.mask.w").value;  // [B x F*N]
  const Tensor& b = m.p("sep.mask.b").value;
  int F = m.cfg.feature_channels();
  int N = m.cfg.num_speakers;

  for (int64_t t = 0; t < trunk.rows(); t += 53) {
    for (int f = 0; f < F; f += 5) {
      for (int n = 0; n < N; ++n) {
        double acc = b.data()[f * N + n];
        for (int64_t k = 0; k < trunk.cols(); ++k)
          acc += trunk.at(t, k) * W.at(k, f * N + n);
        CHECK(masks.at(t * F + f, n) == doctest::Approx(acc).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("without normalization the trunk is local in time") {
  RunConfig rc = small_rc();
  rc.set("separator.mode", "direct");
  rc.set("separator.mask_normalization", "raw");
  rc.set("separator.norm", "none");
  model::Model m(rc);

  Waveform a = make_tone(350.0, 1.0);
  Waveform b = a;
  // Perturb only the last fifth of the signal.
  size_t cut = (a.size() * 4) / 5;
  for (size_t i = cut; i < b.size(); ++i) b.samples[i] = 0.25 - b.samples[i];

  Tensor ma = m.direct_masks(m.encode_features(a));
  Tensor mb = m.direct_masks(m.encode_features(b));
  REQUIRE(ma.rows() == mb.rows());

  // Frame t sees samples [t*hop, t*hop + frame_len); the dilated stack adds
  // (kernel-1)/2 * dilation frames of reach per block on each side.
  int reach = 0;
  for (int i = 0; i < m.cfg.num_blocks * m.cfg.num_repeats; ++i)
    reach += ((m.cfg.kernel_size - 1) / 2) * (1 << (i % m.cfg.num_blocks));
  int first_touched =
      static_cast<int>((cut - m.cfg.stft.frame_len) / m.cfg.stft.hop) + 1;
  int safe_frames = first_touched - reach - 1;
  REQUIRE(safe_frames > 50);

  int F = m.cfg.feature_channels();
  for (int64_t r = 0; r < static_cast<int64_t>(safe_frames) * F; ++r)
    for (int64_t c = 0; c < ma.cols(); ++c)
      CHECK(ma.at(r, c) == mb.at(r, c));

  // And the change is visible where it should be.
  double diff = 0.0;
  for (int64_t r = static_cast<int64_t>(first_touched + reach) * F;
       r < ma.rows(); ++r)
    diff += std::fabs(ma.at(r, 0) - mb.at(r, 0));
  CHECK(diff > 1e-6);
}

TEST_CASE("decoder blend interpolates the two synthesis paths") {
  RunConfig rc1 = small_rc();
  rc1.set("decoder.alpha", "1.0");
  RunConfig rc0 = small_rc();
  rc0.set("decoder.alpha", "0.0");
  RunConfig rch = small_rc();
  rch.set("decoder.alpha", "0.5");
  model::Model m1(rc1), m0(rc0), mh(rch);

  Waveform mixv = make_tone(520.0, 0.3);
  for (size_t i = 0; i < mixv.size(); ++i)
    mixv.samples[i] += 0.15 * std::sin(2.0 * M_PI * 2100.0 * i / 8000.0 + 1.0);

  nn::Tape t1, t0, th;
  model::Forward f1 = m1.forward(t1, mixv, false);
  model::Forward f0 = m0.forward(t0, mixv, false);
  model::Forward fh = mh.forward(th, mixv, false);

  // Same seed, same parameter list: the three models agree on everything
  // except the blend.
  for (int n = 0; n < 2; ++n) {
    const Tensor& w1 = t1.val(f1.estimates[n]);
    const Tensor& w0 = t0.val(f0.estimates[n]);
    const Tensor& wh = th.val(fh.estimates[n]);
    for (int64_t i = 0; i < w1.rows(); ++i)
      CHECK(wh.at(i, 0) ==
            doctest::Approx(0.5 * w1.at(i, 0) + 0.5 * w0.at(i, 0))
                .epsilon(1e-10));
  }
}

TEST_CASE("plain decode matches the taped forward pass") {
  model::Model m(small_rc());
  Waveform mixv = make_white_noise(17, 0.3);

  nn::Tape tape;
  model::Forward fw = m.forward(tape, mixv, false);
  const Tensor& masks = tape.val(fw.masks);
  int T = fw.frames;
  int F = m.cfg.feature_channels();

  std::vector<Tensor> per_speaker;
  for (int n = 0; n < 2; ++n) {
    Tensor mk = Tensor::zeros({T, F});
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f)
        mk.at(t, f) = masks.at(static_cast<int64_t>(t) * F + f, n);
    per_speaker.push_back(std::move(mk));
  }
  std::vector<Waveform> out =
      m.decode(m.encode_features(mixv), per_speaker, dsp::stft(mixv, m.cfg.stft),
               static_cast<int64_t>(mixv.size()));
  REQUIRE(out.size() == 2);
  for (int n = 0; n < 2; ++n) {
    const Tensor& want = tape.val(fw.estimates[n]);
    REQUIRE(out[n].size() == mixv.size());
    for (size_t i = 0; i < out[n].size(); ++i)
      CHECK(out[n].samples[i] ==
            doctest::Approx(want.at(static_cast<int64_t>(i), 0))
                .epsilon(1e-12));
  }
}

TEST_CASE("spectral-path synthesis node agrees with the reference istft") {
  dsp::StftConfig sc;
  Waveform w = make_tone(600.0, 0.2);
  dsp::Spectrogram spec = dsp::stft(w, sc);
  Tensor mag = dsp::magnitude(spec);
  Tensor ph = dsp::phase(spec);

  nn::Tape tape;
  int node = tape.istft_mix_phase(tape.constant(mag), ph,
                                  dsp::sqrt_hann_window(sc.frame_len), sc.hop,
                                  static_cast<int64_t>(w.size()));
  Waveform ref = dsp::istft(mag, ph, sc, w.size(), 8000);
  const Tensor& got = tape.val(node);
  REQUIRE(got.rows() == static_cast<int64_t>(ref.size()));
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(got.at(static_cast<int64_t>(i), 0) ==
          doctest::Approx(ref.samples[i]).epsilon(1e-12));
}

TEST_CASE("forward rejects a sample-rate mismatch") {
  model::Model m(small_rc());
  Waveform wrong = make_tone(440.0, 0.2, 16000);
  nn::Tape tape;
  CHECK_THROWS_AS(m.forward(tape, wrong, true), std::invalid_argument);
  CHECK_THROWS_AS(m.encode_features(wrong), std::invalid_argument);
}

TEST_CASE("configuration validation") {
  RunConfig rc = small_rc();
  rc.set("separator.kernel_size", "4");
  CHECK_THROWS_AS(model::ModelConfig::from(rc), std::invalid_argument);

  rc = small_rc();
  rc.set("cluster.num_centers", "1");
  CHECK_THROWS_AS(model::ModelConfig::from(rc), std::invalid_argument);

  rc = small_rc();
  rc.set("decoder.alpha", "1.5");
  CHECK_THROWS_AS(model::ModelConfig::from(rc), std::invalid_argument);

  rc = small_rc();
  rc.set("stft.frame_len", "21");
  CHECK_THROWS_AS(model::ModelConfig::from(rc), std::invalid_argument);

  rc = small_rc();
  rc.set("separator.mode", "sideways");
  CHECK_THROWS_AS(model::ModelConfig::from(rc), std::invalid_argument);

  CHECK_THROWS_AS(rc.set("no.such.key", "1"), std::invalid_argument);
}

TEST_CASE("spectral features can be disabled") {
  RunConfig rc = small_rc();
  rc.set("encoder.use_spectral", "false");
  model::Model m(rc);
  CHECK(m.cfg.feature_channels() == 16);
  Waveform mixv = make_tone(440.0, 0.2);
  Tensor feats = m.encode_features(mixv);
  CHECK(feats.cols() == 16);
  nn::Tape tape;
  model::Forward fw = m.forward(tape, mixv, false);
  CHECK(tape.val(fw.estimates[0]).rows() ==
        static_cast<int64_t>(mixv.size()));
}
