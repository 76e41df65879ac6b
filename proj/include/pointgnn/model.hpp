#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointgnn/boxes.hpp"
#include "pointgnn/graph.hpp"
#include "pointgnn/nn.hpp"
#include "pointgnn/pointcloud.hpp"
#include "pointgnn/postprocess.hpp"

namespace pgnn {

// Layer widths of every MLP in the network. The last entry of each list is
// the output width; classification output width comes from the ClassSpec.
struct ModelConfig {
  int state_width = 64;
  std::vector<int> embed_point_units{8, 16, 32, 64};
  std::vector<int> embed_post_units{64, 64};
  std::vector<int> mlp_h_units{64, 3};
  std::vector<int> mlp_f_units{64, 64};
  std::vector<int> mlp_g_units{64, 64};
  std::vector<int> cls_hidden_units{64};
  std::vector<int> loc_units{64, 64, 7};
  int iterations = 2;
  bool auto_registration = true;

  // Throws ArgumentError if the widths do not chain.
  void validate() const;
};

struct IterationParams {
  Mlpd mlp_h;  // state -> coordinate offset
  Mlpd mlp_f;  // [relative position, neighbor state] -> edge feature
  Mlpd mlp_g;  // pooled edge feature -> state update
};

struct PointGnnParams {
  Mlpd embed_point;
  Mlpd embed_post;
  std::vector<IterationParams> iterations;
  Mlpd head_cls;
  std::vector<Mlpd> head_loc;  // one per localized class, in ClassSpec order

  PointGnnParams zeros_like() const;
};

template <typename ParamsT, typename F>
void visit_params(ParamsT& p, F&& f) {
  visit_params(p.embed_point, "embed_point", f);
  visit_params(p.embed_post, "embed_post", f);
  for (std::size_t t = 0; t < p.iterations.size(); ++t) {
    const std::string base = "iter" + std::to_string(t);
    visit_params(p.iterations[t].mlp_h, base + ".mlp_h", f);
    visit_params(p.iterations[t].mlp_f, base + ".mlp_f", f);
    visit_params(p.iterations[t].mlp_g, base + ".mlp_g", f);
  }
  visit_params(p.head_cls, "head_cls", f);
  for (std::size_t c = 0; c < p.head_loc.size(); ++c) {
    visit_params(p.head_loc[c], "head_loc" + std::to_string(c), f);
  }
}

// Zero-shaped parameters for a configuration.
PointGnnParams make_zero_params(const ModelConfig& config, const ClassSpec& spec);
// Glorot-initialized parameters. The final layer of every MLP_h is zero so
// training starts without coordinate offsets.
PointGnnParams make_initial_params(const ModelConfig& config, const ClassSpec& spec,
                                   std::uint64_t seed);

// One row per vertex.
struct VertexStates {
  Tensor2d states;
  int iteration = 0;
};

struct InitTape {
  GroupIndex groups;
  MlpCache<double> point_cache;
  ArgmaxRecord argmax;
  MlpCache<double> post_cache;
  Tensor2d pair_features;  // embed_point outputs, kept for tie diagnostics
};

// MLP_f's first layer is split into a position part (applied per edge) and a
// state part (applied once per vertex, then gathered by source).
struct IterationTape {
  MlpCache<double> h_cache;
  Tensor2d edge_rel;               // E x 3: x_src - x_dst + offset_dst
  Tensor2d f_first;                // E x h1: first-layer output (rectified unless last)
  MlpCache<double> f_cache;        // remaining MLP_f layers
  ArgmaxRecord argmax;
  MlpCache<double> g_cache;
  GroupIndex groups;
};

struct HeadTape {
  MlpCache<double> cls_cache;
  std::vector<MlpCache<double>> loc_caches;
};

struct RawPrediction {
  Tensor2d logits;                 // V x M
  Tensor2d probabilities;          // V x M, rows sum to 1
  std::vector<Tensor2d> deltas;    // per localized class, V x 7
};

// Gathers raw points within r0 of each vertex, embeds [relative position,
// intensity], max-pools per vertex and applies embed_post.
VertexStates init_vertex_state(const PointCloud& raw, const PointCloud& vertices, double r0,
                               const PointGnnParams& params, InitTape* tape = nullptr);

// One message-passing step with optional auto-registration offsets.
VertexStates gnn_iteration(const Graph& graph, const VertexStates& states,
                           const IterationParams& params, bool auto_registration,
                           IterationTape* tape = nullptr);

RawPrediction predict(const VertexStates& states, const PointGnnParams& params,
                      const ClassSpec& spec, HeadTape* tape = nullptr);

// Row-wise softmax.
Tensor2d softmax_rows(const Tensor2d& logits);

// Per-vertex loss weights: DoNotCare vertices get 0, everything else 1.
std::vector<double> loss_weights(const std::vector<VertexLabel>& labels, const ClassSpec& spec);

// Average cross entropy over weighted vertices; log clamped at p >= 1e-12.
// `weights` may be empty (all ones). Optionally writes d loss / d logits.
double classification_loss(const Tensor2d& probabilities, const std::vector<int>& labels,
                           const std::vector<double>& weights = {},
                           Tensor2d* grad_logits = nullptr);

// Huber (threshold 1) on encoded deltas of masked vertices, averaged over
// all weighted vertices. `slot_of_vertex` selects the head per vertex (-1 for
// unmasked vertices).
double localization_loss(const std::vector<Tensor2d>& deltas, const std::vector<int>& slot_of_vertex,
                         const std::vector<EncodedBox>& targets, double normalizer,
                         std::vector<Tensor2d>* grad_deltas = nullptr);

double huber(double x, double threshold = 1.0);
double huber_grad(double x, double threshold = 1.0);

// Sum of |w| over weight matrices (biases excluded).
double regularization_loss(const PointGnnParams& params);

struct LossWeights {
  double alpha = 0.1;
  double beta = 10.0;
  double gamma = 5e-7;
};

double total_loss(double l_cls, double l_loc, double l_reg, const LossWeights& w);

struct LossBreakdown {
  double cls = 0;
  double loc = 0;
  double reg = 0;
  double total = 0;
};

struct ForwardTape {
  InitTape init;
  std::vector<IterationTape> iterations;
  std::vector<Tensor2d> states;  // states[t] is the input of iteration t
  HeadTape heads;
};

// Full differentiable pass over one prepared example. Gradients are
// accumulated into `grad` scaled by `grad_scale`; pass nullptr to skip the
// backward pass.
LossBreakdown loss_and_gradient(const PointGnnParams& params, const ModelConfig& config,
                                const ClassSpec& spec, const PointCloud& raw, const Graph& graph,
                                double r0, const std::vector<VertexLabel>& labels,
                                const LossWeights& weights, PointGnnParams* grad,
                                double grad_scale = 1.0, ForwardTape* tape = nullptr);

// Activation pattern of a tape: rectifier signs and max-pool winners.
std::uint64_t activation_fingerprint(const ForwardTape& tape);

// Runs init + T iterations + heads.
RawPrediction run_network(const PointGnnParams& params, const ModelConfig& config,
                          const ClassSpec& spec, const PointCloud& raw, const Graph& graph,
                          double r0, std::vector<Tensor2d>* states_out = nullptr);

struct Detection {
  LabeledBox box;  // object class name and score
  int cls = 0;     // prediction class of the seed vertex
  std::size_t vertex = 0;
};

struct InferenceOptions {
  double voxel_size = 0.4;
  VoxelMode voxel_mode = VoxelMode::kCentroidNearest;
  std::uint64_t seed = 0;
  double radius = 4.0;
  double r0 = 1.0;
  NmsOptions nms;
  // Overrides for ablations; unset means "as trained".
  std::optional<bool> auto_registration;
  std::optional<int> iterations;
};

// Per-vertex decoded boxes before NMS: every vertex whose top class is
// localized contributes the box of that class with its probability as score.
struct VertexDetections {
  std::vector<Box3D> boxes;
  std::vector<double> scores;
  std::vector<int> classes;
  std::vector<std::size_t> vertices;
};

VertexDetections decode_predictions(const RawPrediction& pred, const PointCloud& vertices,
                                    const ClassSpec& spec);

struct PointGnnModel {
  ModelConfig config;
  ClassSpec spec;
  PointGnnParams params;
};

// Downsample, build graph, run the network, decode, then NMS per object class.
std::vector<Detection> forward_full(const PointGnnModel& model, const PointCloud& raw,
                                    const InferenceOptions& options);

std::vector<NamedTensor> params_to_tensors(const PointGnnParams& params);
// Fills `params` (already shaped) from named tensors; throws FormatError on
// missing names or shape mismatch.
void params_from_tensors(PointGnnParams& params, const std::vector<NamedTensor>& tensors);

}  // namespace pgnn
