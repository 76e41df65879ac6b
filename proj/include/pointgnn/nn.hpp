#pragma once

// Dense MLP engine with manual reverse-mode gradients.
//
// Tensors are row-major Eigen matrices with one sample per row. Hidden
// layers use the rectifier; the final layer of every MLP is affine.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pointgnn/errors.hpp"

namespace pgnn {

template <typename Scalar>
using Tensor2 = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Tensor2d = Tensor2<double>;

template <typename Scalar>
struct DenseLayer {
  Tensor2<Scalar> weight;  // fan_in x fan_out
  RowVector<Scalar> bias;  // 1 x fan_out
};

template <typename Scalar>
struct Mlp {
  std::vector<DenseLayer<Scalar>> layers;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }

  // Zero-filled MLP with layer widths `units` on top of `input_dim`.
  static Mlp zeros(Eigen::Index input_dim, std::span<const int> units) {
    Mlp m;
    Eigen::Index fan_in = input_dim;
    for (int u : units) {
      m.layers.push_back({Tensor2<Scalar>::Zero(fan_in, u), RowVector<Scalar>::Zero(u)});
      fan_in = u;
    }
    return m;
  }

  // Same shape, all zeros.
  Mlp zeros_like() const {
    Mlp m = *this;
    for (auto& l : m.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return m;
  }
};

using Mlpd = Mlp<double>;

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)); zero biases.
template <typename Scalar, typename Rng>
void glorot_init(Mlp<Scalar>& mlp, Rng& rng) {
  for (auto& l : mlp.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
      l.weight.data()[i] = static_cast<Scalar>(u(rng));
    }
    l.bias.setZero();
  }
}

// Visits every parameter tensor as (name, tensor&). Works for const and
// mutable MLPs.
template <typename MlpT, typename F>
void visit_params(MlpT& mlp, const std::string& prefix, F&& f) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    f(base + ".weight", mlp.layers[i].weight);
    f(base + ".bias", mlp.layers[i].bias);
  }
}

// Layer inputs recorded by the forward pass. inputs[l] is the input of layer
// l; `output` is the final affine output.
template <typename Scalar>
struct MlpCache {
  std::vector<Tensor2<Scalar>> inputs;
  Tensor2<Scalar> output;
};

template <typename Scalar>
Tensor2<Scalar> mlp_forward(const Mlp<Scalar>& mlp, const Tensor2<Scalar>& input,
                            MlpCache<Scalar>* cache = nullptr, std::size_t first_layer = 0) {
  if (mlp.layers.size() <= first_layer) throw ArgumentError("mlp_forward: empty MLP");
  if (input.cols() != mlp.layers[first_layer].weight.rows()) {
    throw ArgumentError("mlp_forward: input has " + std::to_string(input.cols()) +
                        " columns, expected " +
                        std::to_string(mlp.layers[first_layer].weight.rows()));
  }
  if (cache) cache->inputs.clear();
  Tensor2<Scalar> act = input;
  for (std::size_t l = first_layer; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    Tensor2<Scalar> z(act.rows(), layer.weight.cols());
    z.noalias() = act * layer.weight;
    z.rowwise() += layer.bias;
    if (l + 1 < mlp.layers.size()) z = z.cwiseMax(Scalar(0));
    if (cache) cache->inputs.push_back(std::move(act));
    act = std::move(z);
  }
  if (cache) cache->output = act;
  return act;
}

// Accumulates parameter gradients into `grad` (same shape as `mlp`) and
// returns the gradient w.r.t. the input. Pass need_input_grad = false to skip
// the final input-gradient product; an empty tensor is returned then.
// With first_layer > 0 the cache must come from the matching partial forward
// and the returned gradient is w.r.t. the (rectified) input of that layer.
template <typename Scalar>
Tensor2<Scalar> mlp_backward(const Mlp<Scalar>& mlp, const MlpCache<Scalar>& cache,
                             const Tensor2<Scalar>& grad_out, Mlp<Scalar>& grad,
                             bool need_input_grad = true, std::size_t first_layer = 0) {
  const std::size_t n_layers = mlp.layers.size();
  if (first_layer >= n_layers || cache.inputs.size() != n_layers - first_layer ||
      grad.layers.size() != n_layers) {
    throw ArgumentError("mlp_backward: cache/gradient do not match the MLP");
  }
  if (grad_out.rows() != cache.output.rows() || grad_out.cols() != mlp.output_dim()) {
    throw ArgumentError("mlp_backward: grad_out shape mismatch");
  }
  Tensor2<Scalar> delta = grad_out;
  for (std::size_t l = n_layers; l-- > first_layer;) {
    const auto& x = cache.inputs[l - first_layer];
    grad.layers[l].weight.noalias() += x.transpose() * delta;
    grad.layers[l].bias += delta.colwise().sum();
    if (l == first_layer && !need_input_grad) return Tensor2<Scalar>();
    Tensor2<Scalar> dx(delta.rows(), x.cols());
    dx.noalias() = delta * mlp.layers[l].weight.transpose();
    if (l > first_layer) {
      // x is the rectified output of layer l-1; its derivative is 1 where x > 0.
      dx = (x.array() > Scalar(0)).select(dx, Scalar(0));
    }
    delta = std::move(dx);
  }
  return delta;
}

// Keeps only the listed rows of a cache. Backward through an MLP is
// row-independent, so rows with zero output gradient can be dropped.
template <typename Scalar>
MlpCache<Scalar> gather_cache_rows(const MlpCache<Scalar>& cache,
                                   const std::vector<Eigen::Index>& rows) {
  MlpCache<Scalar> out;
  auto gather = [&](const Tensor2<Scalar>& t) {
    Tensor2<Scalar> g(static_cast<Eigen::Index>(rows.size()), t.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
    return g;
  };
  for (const auto& x : cache.inputs) out.inputs.push_back(gather(x));
  out.output = gather(cache.output);
  return out;
}

// Destination group of every row; groups may be empty.
struct GroupIndex {
  std::vector<std::int32_t> group_of;
  Eigen::Index group_count = 0;
};

// Per group, per column, index of the maximal row; -1 for empty groups.
using ArgmaxRecord = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Column-wise max over the rows of each group. Empty groups pool to 0; ties
// resolve to the lowest row index.
template <typename Scalar>
Tensor2<Scalar> max_aggregate(const Tensor2<Scalar>& rows, const GroupIndex& groups,
                              ArgmaxRecord* argmax = nullptr) {
  if (static_cast<std::size_t>(rows.rows()) != groups.group_of.size()) {
    throw ArgumentError("max_aggregate: row count does not match group index");
  }
  const Eigen::Index cols = rows.cols();
  Tensor2<Scalar> pooled = Tensor2<Scalar>::Zero(groups.group_count, cols);
  ArgmaxRecord arg = ArgmaxRecord::Constant(groups.group_count, cols, -1);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const auto g = groups.group_of[static_cast<std::size_t>(r)];
    if (g < 0 || g >= groups.group_count) throw ArgumentError("max_aggregate: bad group id");
    Scalar* out = pooled.row(g).data();
    std::int32_t* idx = arg.row(g).data();
    const Scalar* in = rows.row(r).data();
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (idx[c] < 0 || in[c] > out[c]) {
        out[c] = in[c];
        idx[c] = static_cast<std::int32_t>(r);
      }
    }
  }
  if (argmax) *argmax = std::move(arg);
  return pooled;
}

// Routes each pooled gradient entry to the row that produced the maximum.
template <typename Scalar>
Tensor2<Scalar> max_aggregate_backward(const ArgmaxRecord& argmax, const Tensor2<Scalar>& grad_pooled,
                                       Eigen::Index row_count) {
  if (grad_pooled.rows() != argmax.rows() || grad_pooled.cols() != argmax.cols()) {
    throw ArgumentError("max_aggregate_backward: shape mismatch");
  }
  Tensor2<Scalar> grad_rows = Tensor2<Scalar>::Zero(row_count, grad_pooled.cols());
  for (Eigen::Index g = 0; g < argmax.rows(); ++g) {
    for (Eigen::Index c = 0; c < argmax.cols(); ++c) {
      const auto r = argmax(g, c);
      if (r >= 0) grad_rows(r, c) += grad_pooled(g, c);
    }
  }
  return grad_rows;
}

// Rows that won at least one (group, column) cell, ascending, and the
// pooled gradient scattered onto just those rows.
template <typename Scalar>
std::pair<std::vector<Eigen::Index>, Tensor2<Scalar>> max_aggregate_backward_compact(
    const ArgmaxRecord& argmax, const Tensor2<Scalar>& grad_pooled, Eigen::Index row_count) {
  if (grad_pooled.rows() != argmax.rows() || grad_pooled.cols() != argmax.cols()) {
    throw ArgumentError("max_aggregate_backward: shape mismatch");
  }
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(row_count), -1);
  for (Eigen::Index i = 0; i < argmax.size(); ++i) {
    const auto r = argmax.data()[i];
    if (r >= 0) slot[static_cast<std::size_t>(r)] = 0;
  }
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < row_count; ++r) {
    if (slot[static_cast<std::size_t>(r)] == 0) {
      slot[static_cast<std::size_t>(r)] = static_cast<Eigen::Index>(rows.size());
      rows.push_back(r);
    }
  }
  Tensor2<Scalar> grad_rows = Tensor2<Scalar>::Zero(static_cast<Eigen::Index>(rows.size()), grad_pooled.cols());
  for (Eigen::Index g = 0; g < argmax.rows(); ++g) {
    for (Eigen::Index c = 0; c < argmax.cols(); ++c) {
      const auto r = argmax(g, c);
      if (r >= 0) grad_rows(slot[static_cast<std::size_t>(r)], c) += grad_pooled(g, c);
    }
  }
  return {std::move(rows), std::move(grad_rows)};
}

// Smallest gap between the winning value and the runner-up over all
// non-singleton (group, column) cells. +inf when no such cell exists.
template <typename Scalar>
Scalar max_aggregate_gap(const Tensor2<Scalar>& rows, const GroupIndex& groups) {
  Tensor2<Scalar> best = Tensor2<Scalar>::Constant(groups.group_count, rows.cols(),
                                                   -std::numeric_limits<Scalar>::infinity());
  Tensor2<Scalar> second = best;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const auto g = groups.group_of[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const Scalar v = rows(r, c);
      if (v > best(g, c)) {
        second(g, c) = best(g, c);
        best(g, c) = v;
      } else if (v > second(g, c)) {
        second(g, c) = v;
      }
    }
  }
  Scalar gap = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < best.size(); ++i) {
    if (std::isfinite(second.data()[i])) gap = std::min(gap, best.data()[i] - second.data()[i]);
  }
  return gap;
}

// A flat view of one parameter tensor and its analytic gradient.
struct GradSlot {
  std::span<double> value;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  int probes = 100;
  double step = 1e-5;
  // Denominator floor of the relative error; below it errors are absolute.
  double floor = 1e-6;
  std::uint64_t seed = 0;
  // Optional activation-pattern fingerprint. A probe whose +h/-h evaluations
  // change the pattern straddles a rectifier kink or a max tie and is redrawn.
  std::function<std::uint64_t()> fingerprint;
  // Upper bound on redraws before giving up on kink-free probes.
  int max_redraws = 10000;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  int probes = 0;
  int redrawn = 0;
};

// Compares analytic gradients against central differences of `loss` on
// randomly chosen coordinates. `loss` must read the current values in `slots`.
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  std::span<const GradSlot> slots,
                                  const GradCheckOptions& opts = {}) {
  std::size_t total = 0;
  for (const auto& s : slots) {
    if (s.value.size() != s.analytic.size()) throw ArgumentError("grad_check: slot size mismatch");
    total += s.value.size();
  }
  GradCheckResult result;
  if (total == 0) return result;

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const std::uint64_t base_print = opts.fingerprint ? opts.fingerprint() : 0;

  auto locate = [&](std::size_t flat) -> std::pair<double*, double> {
    for (const auto& s : slots) {
      if (flat < s.value.size()) return {&s.value[flat], s.analytic[flat]};
      flat -= s.value.size();
    }
    return {nullptr, 0.0};
  };

  while (result.probes < opts.probes) {
    auto [coord, analytic] = locate(pick(rng));
    const double saved = *coord;
    *coord = saved + opts.step;
    const double up = loss();
    const bool up_ok = !opts.fingerprint || opts.fingerprint() == base_print;
    *coord = saved - opts.step;
    const double down = loss();
    const bool down_ok = !opts.fingerprint || opts.fingerprint() == base_print;
    *coord = saved;
    if (!(up_ok && down_ok)) {
      if (++result.redrawn > opts.max_redraws) break;
      continue;
    }
    const double numeric = (up - down) / (2 * opts.step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.floor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - analytic) / denom);
    ++result.probes;
  }
  if (opts.fingerprint) loss();
  return result;
}

// FNV-1a style mixing for activation fingerprints.
inline void fingerprint_mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v;
  h *= 1099511628211ull;
}

template <typename Scalar>
void fingerprint_cache(std::uint64_t& h, const MlpCache<Scalar>& cache) {
  // Layer inputs beyond the first are rectified outputs; x > 0 is the mask.
  for (std::size_t l = 1; l < cache.inputs.size(); ++l) {
    const auto& x = cache.inputs[l];
    for (Eigen::Index i = 0; i < x.size(); ++i) fingerprint_mix(h, x.data()[i] > Scalar(0));
  }
}

inline void fingerprint_argmax(std::uint64_t& h, const ArgmaxRecord& arg) {
  for (Eigen::Index i = 0; i < arg.size(); ++i) {
    fingerprint_mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(arg.data()[i])));
  }
}

// Named tensor used by the checkpoint container.
struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

// Binary container, little-endian:
//   "PGNNCKPT" | u32 version | u32 count |
//   count x ( u32 name_len | name | u32 ndim | ndim x u64 dim | prod(dim) x f64 )
inline constexpr char kCheckpointMagic[8] = {'P', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace pgnn
