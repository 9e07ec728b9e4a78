// tfsep/tape.hpp

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

#ifndef TFSEP_TAPE_H_
#define TFSEP_TAPE_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tfsep/tensor.hpp"

namespace tfsep {
namespace nn {

// A named trainable array.  Gradients accumulate across backward() calls
// until the caller clears them, so mini-batches can sum item losses.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape());
  }
};

// Reverse-mode tape.  Every op records its output tensor and a closure that
// scatters the output gradient back onto the inputs.  Node ids are indices
// into a flat vector; backward() walks it once in reverse.  All shapes are
// treated as row-major 2-d (vectors are [n x 1] or [1 x n] as noted).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  int constant(Tensor v);          // no gradient flows into it
  int param(Param* p);             // backward() adds into p->grad

  // y = a * b.  a:[m x k], b:[k x n].
  int matmul(int a, int b);
  // y = a * b^T.  a:[m x k], b:[n x k].
  int matmul_nt(int a, int b);

  // Elementwise; shapes must match.
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);

  // y = a (elementwise*) c, c fixed.
  int mul_const(int a, const Tensor& c);
  // y = k * a + c (scalars).
  int affine(int a, double k, double c);
  // y[i][j] = a[i][j] + b[j].  b is a node holding [1 x n] (or [n]).
  int add_rowvec(int a, int b);
  // y[i][j] = a[i][j] * scale[j] + shift[j], scale/shift fixed.
  int rowvec_affine_const(int a, const Tensor& scale, const Tensor& shift);

  int relu(int a);
  // y = a where a > 0 else slope * a; slope is a [1]-element node.
  int prelu(int a, int slope);
  int exp_(int a);
  int log_(int a);                 // caller guarantees positive input
  int softmax_rows(int a);

  // y[i][j] = -sum_d (v[i][d] - c[j][d])^2.  v:[p x d], c:[m x d].
  int negsqdist(int v, int c);
  // y[j] = sum_i w[i][j] x[i] / (sum_i w[i][j] + tiny).  w:[p x m], x:[p x d],
  // y:[m x d].  Soft cluster-center update.
  int weighted_mean_rows(int w, int x);

  // Layer norm over the whole [T x C] map (single mean/variance), then a
  // per-channel affine.  gamma/beta are nodes holding [1 x C].
  int global_layer_norm(int x, int gamma, int beta, double eps = 1e-8);

  // Per-channel 1-d convolution along rows (time).  x:[T x C], w:[C x P],
  // b:[1 x C].  P odd; zero padding keeps T; taps step by `dilation`.
  int depthwise_conv1d(int x, int w, int b, int dilation);

  int concat_cols(int a, int b);
  int slice_cols(int a, int64_t c0, int64_t c1);       // [c0, c1)
  int gather_rows(int a, std::vector<int64_t> rows);
  int reshape(int a, std::vector<int64_t> shape);

  // Frames [T x L] -> signal [out_len x 1]; frame t starts at t * hop.
  int overlap_add_frames(int a, int hop, int64_t out_len);

  // Magnitudes [T x K] -> signal [out_len x 1] through an inverse one-sided
  // DFT with fixed phases [T x K], synthesis-windowed and overlap-added.
  int istft_mix_phase(int mag, const Tensor& phase,
                      const std::vector<double>& window, int hop,
                      int64_t out_len);

  // Scalars ([1 x 1] outputs).
  int dot_const(int a, const Tensor& c);
  int sumsq(int a);
  int sum_all(int a);

  void backward(int node);         // node must hold a single element

  const Tensor& val(int id) const { return nodes_[id].val; }
  // Gradient of the last backward() at this node; zeros if none reached it.
  Tensor grad_of(int id) const;
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;                   // lazily allocated
    bool needs_grad = false;
    std::function<void(Tape&)> back;   // empty for leaves
    Param* bound = nullptr;
  };

  int push(Tensor val, bool needs_grad, std::function<void(Tape&)> back);
  bool ng(int id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of `id`, allocated on first touch.
  Tensor& gbuf(int id);
  bool has_grad(int id) const { return nodes_[id].grad.numel() > 0; }

  std::vector<Node> nodes_;
};

}  // namespace nn
}  // namespace tfsep

#endif  // TFSEP_TAPE_H_
