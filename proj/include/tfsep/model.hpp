// tfsep/model.hpp

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

#ifndef TFSEP_MODEL_H_
#define TFSEP_MODEL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tfsep/config.hpp"
#include "tfsep/dsp.hpp"
#include "tfsep/tape.hpp"
#include "tfsep/tensor.hpp"
#include "tfsep/waveform.hpp"

namespace tfsep {
namespace model {

enum class SeparatorMode { kClustering, kDirect };
enum class NormKind { kGlobalLayer, kNone };
enum class MaskNorm { kSoftmax, kRaw };
enum class MaskDomain { kLinear, kLog };

// Structural hyperparameters, decoded once from a RunConfig.
struct ModelConfig {
  int sample_rate = 8000;
  dsp::StftConfig stft;
  double log_floor = 1e-8;
  int conv_channels = 256;
  bool use_spectral = true;
  int bottleneck = 256;
  int hidden = 512;
  int kernel_size = 3;
  int num_blocks = 8;
  int num_repeats = 4;
  int embed_dim = 20;
  NormKind norm = NormKind::kGlobalLayer;
  SeparatorMode mode = SeparatorMode::kClustering;
  MaskNorm mask_norm = MaskNorm::kSoftmax;
  int num_centers = 4;
  int kmeans_iters = 1;
  int num_speakers = 2;
  double alpha = 1.0;
  MaskDomain mask_domain = MaskDomain::kLinear;

  static ModelConfig from(const RunConfig& rc);
  int f_spec() const { return stft.bins(); }
  int feature_channels() const {
    return conv_channels + (use_spectral ? f_spec() : 0);
  }
};

// One k-means refinement pass.  Soft: responsibilities softmax(-d^2) then
// weighted means.  Hard: nearest-center assignment (ties to the lowest
// index); a center that wins no points keeps its previous position.
enum class KmeansMode { kSoft, kHard };
Tensor kmeans_step(const Tensor& points, const Tensor& centers,
                   KmeansMode mode);

// All n-element subsets of {0..k-1} in lexicographic order.
std::vector<std::vector<int>> combinations(int k, int n);

// Smallest pairwise Euclidean distance among the rows.
double min_pairwise_distance(const Tensor& rows);

struct ClusterSelection {
  Tensor centroids;             // [n x d], refined
  std::vector<int> subset;      // chosen initial-center indices
  int subset_index = -1;        // position in combinations(k, n)
  double in_set_distance = 0.0;
};

// Try every n-subset of the k trained centers, refine each with `iters`
// k-means passes over the embeddings, keep the subset whose refined centers
// are most spread out (largest min pairwise distance; ties to the lowest
// lexicographic subset).
ClusterSelection cluster_select(const Tensor& points, const Tensor& centers,
                                int n, int iters, KmeansMode mode);

// Per-row mask logits from embedding/centroid dot products, optionally
// softmax-normalized over speakers.  points:[p x d], centroids:[n x d].
Tensor estimate_masks(const Tensor& points, const Tensor& centroids,
                      MaskNorm norm);

// Everything the forward pass computed besides the tape itself.
struct Forward {
  std::vector<int> estimates;   // per-speaker [out_len x 1] nodes
  int masks = -1;               // [T*F x N]
  int embeddings = -1;          // [T*F x D]; -1 in direct mode
  int feature_map = -1;         // [T x F]
  int trunk_out = -1;           // [T x B]
  int subset_index = -1;        // chosen center subset (clustering mode)
  int frames = 0;               // T
  int64_t out_len = 0;
};

class Model {
 public:
  explicit Model(const RunConfig& rc);

  RunConfig run_config;
  ModelConfig cfg;
  std::vector<nn::Param> params;
  // Per-bin affine standardization of the log-magnitude features, fitted on
  // training data and carried in the checkpoint.
  Tensor spec_mean, spec_std;

  nn::Param& p(const std::string& name);
  const nn::Param& p(const std::string& name) const;
  int64_t param_count() const;
  void zero_grad();

  // Build the whole net on `tape` for one mixture.  `training` selects soft
  // (differentiable) clustering; eval uses hard assignments.  forced_subset
  // pins the center subset, for finite-difference checks across the argmax.
  Forward forward(nn::Tape& tape, const Waveform& mix, bool training,
                  int forced_subset = -1);

  // Plain-tensor entry points (no gradients), used by tools and tests.
  Tensor encode_features(const Waveform& mix);             // H: [T x F]
  Tensor embed_features(const Tensor& feature_map);        // V: [T*F x D]
  Tensor direct_masks(const Tensor& feature_map);          // [T*F x N]
  std::vector<Waveform> decode(const Tensor& feature_map,
                               const std::vector<Tensor>& masks,
                               const dsp::Spectrogram& mix_spec,
                               int64_t out_len);

 private:
  std::map<std::string, int> index_;
  void add_param(const std::string& name, Tensor init);
  void init_params(uint64_t seed);

  struct EncoderAux {
    Tensor frames;          // [T x L]
    Tensor spec_feats;      // standardized log magnitude [T x f_spec]
    Tensor mix_mag;         // [T x f_spec]
    Tensor mix_phase;       // [T x f_spec]
  };
  int build_encoder(nn::Tape& tape, const Waveform& mix, EncoderAux* aux);
  int build_trunk(nn::Tape& tape, int feat_node);
  // Estimate node for one speaker from its [T x F] mask node.
  int build_decoder(nn::Tape& tape, int feat_node, int mask_tf,
                    const EncoderAux& aux, int64_t out_len);
};

}  // namespace model
}  // namespace tfsep

#endif  // TFSEP_MODEL_H_
