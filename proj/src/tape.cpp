// tfsep/tape.cpp

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

#include "tfsep/tape.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tfsep {
namespace nn {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

namespace {

ECMap cmap(const Tensor& t) { return ECMap(t.data(), t.rows(), t.cols()); }
EMap mmap(Tensor& t) { return EMap(t.data(), t.rows(), t.cols()); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

int Tape::push(Tensor val, bool needs_grad, std::function<void(Tape&)> back) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::gbuf(int id) {
  Node& n = nodes_[id];
  if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.val.shape());
  return n.grad;
}

Tensor Tape::grad_of(int id) const {
  const Node& n = nodes_[id];
  if (n.grad.numel() == 0) return Tensor::zeros(n.val.shape());
  return n.grad;
}

int Tape::constant(Tensor v) { return push(std::move(v), false, nullptr); }

int Tape::param(Param* p) {
  int id = push(p->value, true, nullptr);
  nodes_[id].bound = p;
  return id;
}

int Tape::matmul(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dims");
  Tensor Y = Tensor::zeros({A.rows(), B.cols()});
  mmap(Y) = cmap(A) * cmap(B);
  bool ng_ = ng(a) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      if (t.ng(a)) mmap(t.gbuf(a)) += cmap(G) * cmap(t.nodes_[b].val).transpose();
      if (t.ng(b)) mmap(t.gbuf(b)) += cmap(t.nodes_[a].val).transpose() * cmap(G);
    };
  }
  return out;
}

int Tape::matmul_nt(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.cols() != B.cols()) throw std::invalid_argument("matmul_nt: inner dims");
  Tensor Y = Tensor::zeros({A.rows(), B.rows()});
  mmap(Y) = cmap(A) * cmap(B).transpose();
  bool ng_ = ng(a) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      if (t.ng(a)) mmap(t.gbuf(a)) += cmap(G) * cmap(t.nodes_[b].val);
      if (t.ng(b)) mmap(t.gbuf(b)) += cmap(G).transpose() * cmap(t.nodes_[a].val);
    };
  }
  return out;
}

int Tape::add(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  check_same_shape(A, B, "add");
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) Y.data()[i] += B.data()[i];
  bool ng_ = ng(a) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      if (t.ng(a)) {
        Tensor& ga = t.gbuf(a);
        for (int64_t i = 0; i < G.numel(); ++i) ga.data()[i] += G.data()[i];
      }
      if (t.ng(b)) {
        Tensor& gb = t.gbuf(b);
        for (int64_t i = 0; i < G.numel(); ++i) gb.data()[i] += G.data()[i];
      }
    };
  }
  return out;
}

int Tape::sub(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  check_same_shape(A, B, "sub");
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) Y.data()[i] -= B.data()[i];
  bool ng_ = ng(a) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      if (t.ng(a)) {
        Tensor& ga = t.gbuf(a);
        for (int64_t i = 0; i < G.numel(); ++i) ga.data()[i] += G.data()[i];
      }
      if (t.ng(b)) {
        Tensor& gb = t.gbuf(b);
        for (int64_t i = 0; i < G.numel(); ++i) gb.data()[i] -= G.data()[i];
      }
    };
  }
  return out;
}

int Tape::mul(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  check_same_shape(A, B, "mul");
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) Y.data()[i] *= B.data()[i];
  bool ng_ = ng(a) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& A_ = t.nodes_[a].val;
      const Tensor& B_ = t.nodes_[b].val;
      if (t.ng(a)) {
        Tensor& ga = t.gbuf(a);
        for (int64_t i = 0; i < G.numel(); ++i)
          ga.data()[i] += G.data()[i] * B_.data()[i];
      }
      if (t.ng(b)) {
        Tensor& gb = t.gbuf(b);
        for (int64_t i = 0; i < G.numel(); ++i)
          gb.data()[i] += G.data()[i] * A_.data()[i];
      }
    };
  }
  return out;
}

int Tape::mul_const(int a, const Tensor& c) {
  const Tensor& A = nodes_[a].val;
  check_same_shape(A, c, "mul_const");
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) Y.data()[i] *= c.data()[i];
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    Tensor cc = c;
    nodes_[out].back = [a, out, cc](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < G.numel(); ++i)
        ga.data()[i] += G.data()[i] * cc.data()[i];
    };
  }
  return out;
}

int Tape::affine(int a, double k, double c) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) Y.data()[i] = k * Y.data()[i] + c;
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out, k](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < G.numel(); ++i) ga.data()[i] += k * G.data()[i];
    };
  }
  return out;
}

int Tape::add_rowvec(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (B.numel() != A.cols())
    throw std::invalid_argument("add_rowvec: width mismatch");
  Tensor Y = A;
  for (int64_t r = 0; r < A.rows(); ++r)
    for (int64_t c = 0; c < A.cols(); ++c) Y.at(r, c) += B.data()[c];
  bool ng_ = ng(a) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      if (t.ng(a)) {
        Tensor& ga = t.gbuf(a);
        for (int64_t i = 0; i < G.numel(); ++i) ga.data()[i] += G.data()[i];
      }
      if (t.ng(b)) {
        Tensor& gb = t.gbuf(b);
        for (int64_t r = 0; r < G.rows(); ++r)
          for (int64_t c = 0; c < G.cols(); ++c) gb.data()[c] += G.at(r, c);
      }
    };
  }
  return out;
}

int Tape::rowvec_affine_const(int a, const Tensor& scale, const Tensor& shift) {
  const Tensor& A = nodes_[a].val;
  if (scale.numel() != A.cols() || shift.numel() != A.cols())
    throw std::invalid_argument("rowvec_affine_const: width mismatch");
  Tensor Y = A;
  for (int64_t r = 0; r < A.rows(); ++r)
    for (int64_t c = 0; c < A.cols(); ++c)
      Y.at(r, c) = Y.at(r, c) * scale.data()[c] + shift.data()[c];
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    Tensor sc = scale;
    nodes_[out].back = [a, out, sc](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      Tensor& ga = t.gbuf(a);
      for (int64_t r = 0; r < G.rows(); ++r)
        for (int64_t c = 0; c < G.cols(); ++c)
          ga.at(r, c) += G.at(r, c) * sc.data()[c];
    };
  }
  return out;
}

int Tape::relu(int a) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i)
    if (Y.data()[i] < 0.0) Y.data()[i] = 0.0;
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& A_ = t.nodes_[a].val;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < G.numel(); ++i)
        if (A_.data()[i] > 0.0) ga.data()[i] += G.data()[i];
    };
  }
  return out;
}

int Tape::prelu(int a, int slope) {
  const Tensor& A = nodes_[a].val;
  const Tensor& S = nodes_[slope].val;
  if (S.numel() != 1) throw std::invalid_argument("prelu: slope must be [1]");
  double s = S.data()[0];
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i)
    if (Y.data()[i] < 0.0) Y.data()[i] *= s;
  bool ng_ = ng(a) || ng(slope);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, slope, out, s](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& A_ = t.nodes_[a].val;
      if (t.ng(a)) {
        Tensor& ga = t.gbuf(a);
        for (int64_t i = 0; i < G.numel(); ++i)
          ga.data()[i] += G.data()[i] * (A_.data()[i] > 0.0 ? 1.0 : s);
      }
      if (t.ng(slope)) {
        double acc = 0.0;
        for (int64_t i = 0; i < G.numel(); ++i)
          if (A_.data()[i] < 0.0) acc += G.data()[i] * A_.data()[i];
        t.gbuf(slope).data()[0] += acc;
      }
    };
  }
  return out;
}

int Tape::exp_(int a) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) Y.data()[i] = std::exp(Y.data()[i]);
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& Y_ = t.nodes_[out].val;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < G.numel(); ++i)
        ga.data()[i] += G.data()[i] * Y_.data()[i];
    };
  }
  return out;
}

int Tape::log_(int a) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = A;
  for (int64_t i = 0; i < Y.numel(); ++i) {
    // NaN is allowed through so divergence checks downstream can report it.
    if (Y.data()[i] <= 0.0)
      throw std::domain_error("log: non-positive input");
    Y.data()[i] = std::log(Y.data()[i]);
  }
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& A_ = t.nodes_[a].val;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < G.numel(); ++i)
        ga.data()[i] += G.data()[i] / A_.data()[i];
    };
  }
  return out;
}

int Tape::softmax_rows(int a) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = A;
  for (int64_t r = 0; r < A.rows(); ++r) {
    double mx = Y.at(r, 0);
    for (int64_t c = 1; c < A.cols(); ++c) mx = std::max(mx, Y.at(r, c));
    double sum = 0.0;
    for (int64_t c = 0; c < A.cols(); ++c) {
      double e = std::exp(Y.at(r, c) - mx);
      Y.at(r, c) = e;
      sum += e;
    }
    for (int64_t c = 0; c < A.cols(); ++c) Y.at(r, c) /= sum;
  }
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& Y_ = t.nodes_[out].val;
      Tensor& ga = t.gbuf(a);
      for (int64_t r = 0; r < G.rows(); ++r) {
        double dot = 0.0;
        for (int64_t c = 0; c < G.cols(); ++c) dot += G.at(r, c) * Y_.at(r, c);
        for (int64_t c = 0; c < G.cols(); ++c)
          ga.at(r, c) += Y_.at(r, c) * (G.at(r, c) - dot);
      }
    };
  }
  return out;
}

int Tape::negsqdist(int v, int c) {
  const Tensor& V = nodes_[v].val;
  const Tensor& C = nodes_[c].val;
  if (V.cols() != C.cols()) throw std::invalid_argument("negsqdist: dims");
  int64_t p = V.rows(), m = C.rows();
  Tensor Y = Tensor::zeros({p, m});
  // -|v - c|^2 = 2 v.c - |v|^2 - |c|^2; the cross term is a GEMM.
  mmap(Y) = 2.0 * (cmap(V) * cmap(C).transpose());
  std::vector<double> vn(p, 0.0), cn(m, 0.0);
  for (int64_t i = 0; i < p; ++i)
    for (int64_t d = 0; d < V.cols(); ++d) vn[i] += V.at(i, d) * V.at(i, d);
  for (int64_t j = 0; j < m; ++j)
    for (int64_t d = 0; d < C.cols(); ++d) cn[j] += C.at(j, d) * C.at(j, d);
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < m; ++j) Y.at(i, j) -= vn[i] + cn[j];
  bool ng_ = ng(v) || ng(c);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [v, c, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& V_ = t.nodes_[v].val;
      const Tensor& C_ = t.nodes_[c].val;
      // dV_i += sum_j G_ij * -2 (v_i - c_j);  dC_j += sum_i G_ij * 2 (v_i - c_j)
      if (t.ng(v)) {
        Tensor& gv = t.gbuf(v);
        EMat t1 = cmap(G) * cmap(C_);  // [p x d]
        Eigen::VectorXd rs = cmap(G).rowwise().sum();
        mmap(gv) += 2.0 * (t1 - rs.asDiagonal() * cmap(V_));
      }
      if (t.ng(c)) {
        Tensor& gc = t.gbuf(c);
        EMat t2 = cmap(G).transpose() * cmap(V_);  // [m x d]
        Eigen::VectorXd cs = cmap(G).colwise().sum();
        mmap(gc) += 2.0 * (t2 - cs.asDiagonal() * cmap(C_));
      }
    };
  }
  return out;
}

int Tape::weighted_mean_rows(int w, int x) {
  const Tensor& W = nodes_[w].val;
  const Tensor& X = nodes_[x].val;
  if (W.rows() != X.rows()) throw std::invalid_argument("weighted_mean: rows");
  const double kTiny = 1e-30;
  int64_t m = W.cols(), d = X.cols();
  Tensor Y = Tensor::zeros({m, d});
  std::vector<double> S(m, 0.0);
  for (int64_t i = 0; i < W.rows(); ++i)
    for (int64_t j = 0; j < m; ++j) S[j] += W.at(i, j);
  mmap(Y) = cmap(W).transpose() * cmap(X);
  for (int64_t j = 0; j < m; ++j)
    for (int64_t k = 0; k < d; ++k) Y.at(j, k) /= (S[j] + kTiny);
  bool ng_ = ng(w) || ng(x);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [w, x, out, S, kTiny](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& W_ = t.nodes_[w].val;
      const Tensor& X_ = t.nodes_[x].val;
      const Tensor& Y_ = t.nodes_[out].val;
      int64_t m_ = G.rows(), d_ = G.cols();
      // Q_jk = G_jk / (S_j + tiny)
      Tensor Q = G;
      for (int64_t j = 0; j < m_; ++j)
        for (int64_t k = 0; k < d_; ++k) Q.at(j, k) /= (S[j] + kTiny);
      if (t.ng(x)) {
        // dX = W * Q
        mmap(t.gbuf(x)) += cmap(W_) * cmap(Q);
      }
      if (t.ng(w)) {
        // dW_ij = q_j . (x_i - y_j)
        std::vector<double> qy(m_, 0.0);
        for (int64_t j = 0; j < m_; ++j)
          for (int64_t k = 0; k < d_; ++k) qy[j] += Q.at(j, k) * Y_.at(j, k);
        Tensor& gw = t.gbuf(w);
        EMat xq = cmap(X_) * cmap(Q).transpose();  // [p x m]
        for (int64_t i = 0; i < W_.rows(); ++i)
          for (int64_t j = 0; j < m_; ++j)
            gw.at(i, j) += xq(i, j) - qy[j];
      }
    };
  }
  return out;
}

int Tape::global_layer_norm(int x, int gamma, int beta, double eps) {
  const Tensor& X = nodes_[x].val;
  const Tensor& Ga = nodes_[gamma].val;
  const Tensor& Be = nodes_[beta].val;
  if (Ga.numel() != X.cols() || Be.numel() != X.cols())
    throw std::invalid_argument("global_layer_norm: channel mismatch");
  int64_t n = X.numel();
  double mu = 0.0;
  for (int64_t i = 0; i < n; ++i) mu += X.data()[i];
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = X.data()[i] - mu;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double s = std::sqrt(var + eps);
  Tensor Xhat = X;
  for (int64_t i = 0; i < n; ++i) Xhat.data()[i] = (X.data()[i] - mu) / s;
  Tensor Y = Xhat;
  for (int64_t r = 0; r < X.rows(); ++r)
    for (int64_t c = 0; c < X.cols(); ++c)
      Y.at(r, c) = Y.at(r, c) * Ga.data()[c] + Be.data()[c];
  bool ng_ = ng(x) || ng(gamma) || ng(beta);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [x, gamma, beta, out, Xhat, s](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& Ga_ = t.nodes_[gamma].val;
      int64_t rows = G.rows(), cols = G.cols();
      int64_t n_ = rows * cols;
      if (t.ng(beta)) {
        Tensor& gb = t.gbuf(beta);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gb.data()[c] += G.at(r, c);
      }
      if (t.ng(gamma)) {
        Tensor& gg = t.gbuf(gamma);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c)
            gg.data()[c] += G.at(r, c) * Xhat.at(r, c);
      }
      if (t.ng(x)) {
        // h = G * gamma (per column); dx = (h - mean(h) - xhat * mean(h.xhat)) / s
        double mh = 0.0, mhx = 0.0;
        Tensor H = G;
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) {
            double h = G.at(r, c) * Ga_.data()[c];
            H.at(r, c) = h;
            mh += h;
            mhx += h * Xhat.at(r, c);
          }
        mh /= static_cast<double>(n_);
        mhx /= static_cast<double>(n_);
        Tensor& gx = t.gbuf(x);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c)
            gx.at(r, c) += (H.at(r, c) - mh - Xhat.at(r, c) * mhx) / s;
      }
    };
  }
  return out;
}

int Tape::depthwise_conv1d(int x, int w, int b, int dilation) {
  const Tensor& X = nodes_[x].val;
  const Tensor& W = nodes_[w].val;
  const Tensor& B = nodes_[b].val;
  if (W.rows() != X.cols())
    throw std::invalid_argument("depthwise_conv1d: channel mismatch");
  if (W.cols() % 2 == 0)
    throw std::invalid_argument("depthwise_conv1d: kernel must be odd");
  if (B.numel() != X.cols())
    throw std::invalid_argument("depthwise_conv1d: bias mismatch");
  int64_t T = X.rows(), C = X.cols(), P = W.cols();
  int64_t mid = (P - 1) / 2;
  Tensor Y = Tensor::zeros({T, C});
  for (int64_t t_ = 0; t_ < T; ++t_) {
    for (int64_t p = 0; p < P; ++p) {
      int64_t src = t_ + (p - mid) * dilation;
      if (src < 0 || src >= T) continue;
      for (int64_t c = 0; c < C; ++c) Y.at(t_, c) += W.at(c, p) * X.at(src, c);
    }
    for (int64_t c = 0; c < C; ++c) Y.at(t_, c) += B.data()[c];
  }
  bool ng_ = ng(x) || ng(w) || ng(b);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [x, w, b, out, dilation](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& X_ = t.nodes_[x].val;
      const Tensor& W_ = t.nodes_[w].val;
      int64_t T = X_.rows(), C = X_.cols(), P = W_.cols();
      int64_t mid = (P - 1) / 2;
      if (t.ng(b)) {
        Tensor& gb = t.gbuf(b);
        for (int64_t r = 0; r < T; ++r)
          for (int64_t c = 0; c < C; ++c) gb.data()[c] += G.at(r, c);
      }
      if (t.ng(w)) {
        Tensor& gw = t.gbuf(w);
        for (int64_t t_ = 0; t_ < T; ++t_)
          for (int64_t p = 0; p < P; ++p) {
            int64_t src = t_ + (p - mid) * dilation;
            if (src < 0 || src >= T) continue;
            for (int64_t c = 0; c < C; ++c)
              gw.at(c, p) += G.at(t_, c) * X_.at(src, c);
          }
      }
      if (t.ng(x)) {
        Tensor& gx = t.gbuf(x);
        for (int64_t t_ = 0; t_ < T; ++t_)
          for (int64_t p = 0; p < P; ++p) {
            int64_t src = t_ + (p - mid) * dilation;
            if (src < 0 || src >= T) continue;
            for (int64_t c = 0; c < C; ++c)
              gx.at(src, c) += G.at(t_, c) * W_.at(c, p);
          }
      }
    };
  }
  return out;
}

int Tape::concat_cols(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.rows() != B.rows()) throw std::invalid_argument("concat_cols: rows");
  Tensor Y = Tensor::zeros({A.rows(), A.cols() + B.cols()});
  for (int64_t r = 0; r < A.rows(); ++r) {
    for (int64_t c = 0; c < A.cols(); ++c) Y.at(r, c) = A.at(r, c);
    for (int64_t c = 0; c < B.cols(); ++c) Y.at(r, A.cols() + c) = B.at(r, c);
  }
  bool ng_ = ng(a) || ng(b);
  int64_t na = A.cols();  // before push: it may reallocate nodes_
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, b, out, na](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      if (t.ng(a)) {
        Tensor& ga = t.gbuf(a);
        for (int64_t r = 0; r < G.rows(); ++r)
          for (int64_t c = 0; c < na; ++c) ga.at(r, c) += G.at(r, c);
      }
      if (t.ng(b)) {
        Tensor& gb = t.gbuf(b);
        for (int64_t r = 0; r < G.rows(); ++r)
          for (int64_t c = na; c < G.cols(); ++c)
            gb.at(r, c - na) += G.at(r, c);
      }
    };
  }
  return out;
}

int Tape::slice_cols(int a, int64_t c0, int64_t c1) {
  const Tensor& A = nodes_[a].val;
  if (c0 < 0 || c1 > A.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  Tensor Y = Tensor::zeros({A.rows(), c1 - c0});
  for (int64_t r = 0; r < A.rows(); ++r)
    for (int64_t c = c0; c < c1; ++c) Y.at(r, c - c0) = A.at(r, c);
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out, c0](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      Tensor& ga = t.gbuf(a);
      for (int64_t r = 0; r < G.rows(); ++r)
        for (int64_t c = 0; c < G.cols(); ++c) ga.at(r, c0 + c) += G.at(r, c);
    };
  }
  return out;
}

int Tape::gather_rows(int a, std::vector<int64_t> rows) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = Tensor::zeros({static_cast<int64_t>(rows.size()), A.cols()});
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows())
      throw std::out_of_range("gather_rows: index");
    for (int64_t c = 0; c < A.cols(); ++c)
      Y.at(static_cast<int64_t>(i), c) = A.at(rows[i], c);
  }
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out, rows](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      Tensor& ga = t.gbuf(a);
      for (size_t i = 0; i < rows.size(); ++i)
        for (int64_t c = 0; c < G.cols(); ++c)
          ga.at(rows[i], c) += G.at(static_cast<int64_t>(i), c);
    };
  }
  return out;
}

int Tape::reshape(int a, std::vector<int64_t> shape) {
  const Tensor& A = nodes_[a].val;
  Tensor Y = A.reshaped(shape);
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < G.numel(); ++i) ga.data()[i] += G.data()[i];
    };
  }
  return out;
}

int Tape::overlap_add_frames(int a, int hop, int64_t out_len) {
  const Tensor& A = nodes_[a].val;
  int64_t T = A.rows(), L = A.cols();
  Tensor Y = Tensor::zeros({out_len, 1});
  for (int64_t t_ = 0; t_ < T; ++t_) {
    int64_t base = t_ * hop;
    for (int64_t n = 0; n < L; ++n) {
      int64_t idx = base + n;
      if (idx < out_len) Y.data()[idx] += A.at(t_, n);
    }
  }
  bool ng_ = ng(a);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out, hop, out_len](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& A_ = t.nodes_[a].val;
      Tensor& ga = t.gbuf(a);
      for (int64_t t_ = 0; t_ < A_.rows(); ++t_) {
        int64_t base = t_ * hop;
        for (int64_t n = 0; n < A_.cols(); ++n) {
          int64_t idx = base + n;
          if (idx < out_len) ga.at(t_, n) += G.data()[idx];
        }
      }
    };
  }
  return out;
}

int Tape::istft_mix_phase(int mag, const Tensor& phase,
                          const std::vector<double>& window, int hop,
                          int64_t out_len) {
  const Tensor& M = nodes_[mag].val;
  if (M.shape() != phase.shape())
    throw std::invalid_argument("istft_mix_phase: magnitude/phase shapes");
  int64_t T = M.rows(), K = M.cols();
  int64_t L = static_cast<int64_t>(window.size());
  if (K != L / 2 + 1)
    throw std::invalid_argument("istft_mix_phase: bin count vs window");
  // Precompute the linear map from bin magnitude to windowed frame samples:
  // frame[t][n] = win[n] * (1/L) * sum_k kappa_k * m[t][k] * cos(2 pi k n / L + phi[t][k])
  // kappa doubles interior bins to fold in conjugate-symmetric halves.
  std::vector<double> kappa(K, 2.0);
  kappa[0] = 1.0;
  if (L % 2 == 0) kappa[K - 1] = 1.0;
  // coef[t][k][n], flattened; reused by forward and backward.
  std::vector<double> coef(static_cast<size_t>(T) * K * L);
  const double two_pi = 2.0 * M_PI;
  for (int64_t t_ = 0; t_ < T; ++t_)
    for (int64_t k = 0; k < K; ++k) {
      double ph = phase.at(t_, k);
      double base = kappa[k] / static_cast<double>(L);
      for (int64_t n = 0; n < L; ++n) {
        double ang = two_pi * static_cast<double>(k) * static_cast<double>(n) /
                         static_cast<double>(L) +
                     ph;
        coef[(static_cast<size_t>(t_) * K + k) * L + n] =
            base * std::cos(ang) * window[n];
      }
    }
  Tensor Y = Tensor::zeros({out_len, 1});
  for (int64_t t_ = 0; t_ < T; ++t_) {
    int64_t basei = t_ * hop;
    for (int64_t k = 0; k < K; ++k) {
      double m = M.at(t_, k);
      const double* cf = &coef[(static_cast<size_t>(t_) * K + k) * L];
      for (int64_t n = 0; n < L; ++n) {
        int64_t idx = basei + n;
        if (idx < out_len) Y.data()[idx] += m * cf[n];
      }
    }
  }
  bool ng_ = ng(mag);
  int out = push(std::move(Y), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [mag, out, coef, hop, out_len, K, L](Tape& t) {
      const Tensor& G = t.nodes_[out].grad;
      const Tensor& M_ = t.nodes_[mag].val;
      Tensor& gm = t.gbuf(mag);
      for (int64_t t_ = 0; t_ < M_.rows(); ++t_) {
        int64_t basei = t_ * hop;
        for (int64_t k = 0; k < K; ++k) {
          const double* cf = &coef[(static_cast<size_t>(t_) * K + k) * L];
          double acc = 0.0;
          for (int64_t n = 0; n < L; ++n) {
            int64_t idx = basei + n;
            if (idx < out_len) acc += G.data()[idx] * cf[n];
          }
          gm.at(t_, k) += acc;
        }
      }
    };
  }
  return out;
}

int Tape::dot_const(int a, const Tensor& c) {
  const Tensor& A = nodes_[a].val;
  check_same_shape(A, c, "dot_const");
  double acc = 0.0;
  for (int64_t i = 0; i < A.numel(); ++i) acc += A.data()[i] * c.data()[i];
  bool ng_ = ng(a);
  int out = push(Tensor::scalar(acc), ng_, nullptr);
  if (ng_) {
    Tensor cc = c;
    nodes_[out].back = [a, out, cc](Tape& t) {
      double g = t.nodes_[out].grad.data()[0];
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < cc.numel(); ++i)
        ga.data()[i] += g * cc.data()[i];
    };
  }
  return out;
}

int Tape::sumsq(int a) {
  const Tensor& A = nodes_[a].val;
  double acc = 0.0;
  for (int64_t i = 0; i < A.numel(); ++i) acc += A.data()[i] * A.data()[i];
  bool ng_ = ng(a);
  int out = push(Tensor::scalar(acc), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      double g = t.nodes_[out].grad.data()[0];
      const Tensor& A_ = t.nodes_[a].val;
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < A_.numel(); ++i)
        ga.data()[i] += 2.0 * g * A_.data()[i];
    };
  }
  return out;
}

int Tape::sum_all(int a) {
  const Tensor& A = nodes_[a].val;
  double acc = 0.0;
  for (int64_t i = 0; i < A.numel(); ++i) acc += A.data()[i];
  bool ng_ = ng(a);
  int out = push(Tensor::scalar(acc), ng_, nullptr);
  if (ng_) {
    nodes_[out].back = [a, out](Tape& t) {
      double g = t.nodes_[out].grad.data()[0];
      Tensor& ga = t.gbuf(a);
      for (int64_t i = 0; i < ga.numel(); ++i) ga.data()[i] += g;
    };
  }
  return out;
}

void Tape::backward(int node) {
  if (node < 0 || node >= size()) throw std::out_of_range("backward: node id");
  if (nodes_[node].val.numel() != 1)
    throw std::invalid_argument("backward: loss must be a single element");
  gbuf(node).data()[0] = 1.0;
  for (int i = node; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.numel() == 0) continue;
    if (n.back) n.back(*this);
    if (n.bound != nullptr) {
      // Param leaf: flush into the external gradient buffer.
      Tensor& pg = n.bound->grad;
      for (int64_t k = 0; k < pg.numel(); ++k)
        pg.data()[k] += n.grad.data()[k];
    }
  }
}

}  // namespace nn
}  // namespace tfsep
