#include "pointgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "pointgnn/errors.hpp"

namespace pgnn {

namespace {

void require_chain(const std::vector<int>& units, const char* what) {
  if (units.empty()) throw ArgumentError(std::string("model config: ") + what + " has no layers");
  for (int u : units) {
    if (u <= 0) throw ArgumentError(std::string("model config: ") + what + " has a non-positive width");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (state_width <= 0) throw ArgumentError("model config: state_width must be positive");
  if (iterations < 0) throw ArgumentError("model config: iterations must be >= 0");
  require_chain(embed_point_units, "embed_point");
  require_chain(embed_post_units, "embed_post");
  require_chain(mlp_h_units, "mlp_h");
  require_chain(mlp_f_units, "mlp_f");
  require_chain(mlp_g_units, "mlp_g");
  require_chain(loc_units, "loc");
  for (int u : cls_hidden_units) {
    if (u <= 0) throw ArgumentError("model config: cls has a non-positive width");
  }
  if (embed_post_units.back() != state_width) {
    throw ArgumentError("model config: embed_post must end at state_width");
  }
  if (mlp_h_units.back() != 3) throw ArgumentError("model config: mlp_h must end at 3");
  if (mlp_g_units.back() != state_width) {
    throw ArgumentError("model config: mlp_g must end at state_width");
  }
  if (loc_units.back() != 7) throw ArgumentError("model config: loc must end at 7");
}

PointGnnParams PointGnnParams::zeros_like() const {
  PointGnnParams z = *this;
  visit_params(z, [](const std::string&, auto& t) { t.setZero(); });
  return z;
}

PointGnnParams make_zero_params(const ModelConfig& config, const ClassSpec& spec) {
  config.validate();
  const int k = config.state_width;
  PointGnnParams p;
  p.embed_point = Mlpd::zeros(4, config.embed_point_units);
  p.embed_post = Mlpd::zeros(config.embed_point_units.back(), config.embed_post_units);
  for (int t = 0; t < config.iterations; ++t) {
    IterationParams it;
    it.mlp_h = Mlpd::zeros(k, config.mlp_h_units);
    it.mlp_f = Mlpd::zeros(3 + k, config.mlp_f_units);
    it.mlp_g = Mlpd::zeros(config.mlp_f_units.back(), config.mlp_g_units);
    p.iterations.push_back(std::move(it));
  }
  std::vector<int> cls_units = config.cls_hidden_units;
  cls_units.push_back(spec.size());
  p.head_cls = Mlpd::zeros(k, cls_units);
  for (std::size_t c = 0; c < spec.localized().size(); ++c) {
    p.head_loc.push_back(Mlpd::zeros(k, config.loc_units));
  }
  return p;
}

PointGnnParams make_initial_params(const ModelConfig& config, const ClassSpec& spec,
                                   std::uint64_t seed) {
  PointGnnParams p = make_zero_params(config, spec);
  std::mt19937_64 rng(seed);
  glorot_init(p.embed_point, rng);
  glorot_init(p.embed_post, rng);
  for (auto& it : p.iterations) {
    glorot_init(it.mlp_h, rng);
    it.mlp_h.layers.back().weight.setZero();
    glorot_init(it.mlp_f, rng);
    glorot_init(it.mlp_g, rng);
  }
  glorot_init(p.head_cls, rng);
  for (auto& head : p.head_loc) glorot_init(head, rng);
  return p;
}

VertexStates init_vertex_state(const PointCloud& raw, const PointCloud& vertices, double r0,
                               const PointGnnParams& params, InitTape* tape) {
  if (!(r0 > 0)) throw ArgumentError("init_vertex_state: r0 must be > 0");

  GroupIndex groups;
  groups.group_count = static_cast<Eigen::Index>(vertices.size());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (vertex, raw point)
  if (!raw.empty()) {
    const CellGrid grid = build_cell_list(raw, r0);
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      for (std::size_t p : radius_neighbors_at(grid, raw, vertices[v].position, r0)) {
        pairs.emplace_back(v, p);
      }
    }
  }

  Tensor2d features(static_cast<Eigen::Index>(pairs.size()), 4);
  groups.group_of.resize(pairs.size());
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const auto [v, p] = pairs[n];
    const auto row = static_cast<Eigen::Index>(n);
    features.block<1, 3>(row, 0) = (raw[p].position - vertices[v].position).transpose();
    features(row, 3) = raw[p].intensity;
    groups.group_of[n] = static_cast<std::int32_t>(v);
  }

  MlpCache<double>* point_cache = tape ? &tape->point_cache : nullptr;
  Tensor2d embedded = mlp_forward(params.embed_point, features, point_cache);
  ArgmaxRecord argmax;
  Tensor2d pooled = max_aggregate(embedded, groups, &argmax);
  VertexStates out;
  out.states = mlp_forward(params.embed_post, pooled, tape ? &tape->post_cache : nullptr);
  if (tape) {
    tape->groups = std::move(groups);
    tape->argmax = std::move(argmax);
    tape->pair_features = std::move(embedded);
  }
  return out;
}

VertexStates gnn_iteration(const Graph& graph, const VertexStates& states,
                           const IterationParams& params, bool auto_registration,
                           IterationTape* tape) {
  const auto V = static_cast<Eigen::Index>(graph.vertices.size());
  const Eigen::Index k = states.states.cols();
  if (states.states.rows() != V) throw ArgumentError("gnn_iteration: state rows != vertex count");
  if (params.mlp_f.input_dim() != 3 + k || params.mlp_g.output_dim() != k ||
      params.mlp_h.input_dim() != k) {
    throw ArgumentError("gnn_iteration: parameter dimensions do not match state width");
  }

  Tensor2d offset = Tensor2d::Zero(V, 3);
  if (auto_registration) {
    offset = mlp_forward(params.mlp_h, states.states, tape ? &tape->h_cache : nullptr);
  }

  const auto E = static_cast<Eigen::Index>(graph.edges.size());
  const auto& first = params.mlp_f.layers.front();
  const Eigen::Index h1 = first.weight.cols();
  Tensor2d state_part(V, h1);
  state_part.noalias() = states.states * first.weight.bottomRows(k);
  state_part.rowwise() += first.bias;

  Tensor2d rel(E, 3);
  GroupIndex groups;
  groups.group_count = V;
  groups.group_of.resize(graph.edges.size());
  for (Eigen::Index e = 0; e < E; ++e) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    const Vec3 d = graph.vertices[edge.src].position - graph.vertices[edge.dst].position;
    rel.row(e) = d.transpose() + offset.row(edge.dst);
    groups.group_of[static_cast<std::size_t>(e)] = edge.dst;
  }
  Tensor2d z1(E, h1);
  z1.noalias() = rel * first.weight.topRows(3);
  for (Eigen::Index e = 0; e < E; ++e) {
    z1.row(e) += state_part.row(graph.edges[static_cast<std::size_t>(e)].src);
  }
  const bool single = params.mlp_f.layers.size() == 1;
  if (!single) z1 = z1.cwiseMax(0.0);
  Tensor2d edge_out =
      single ? z1 : mlp_forward(params.mlp_f, z1, tape ? &tape->f_cache : nullptr, 1);
  if (tape) {
    tape->edge_rel = std::move(rel);
    tape->f_first = std::move(z1);
  }

  ArgmaxRecord argmax;
  Tensor2d pooled = max_aggregate(edge_out, groups, tape ? &argmax : nullptr);

  VertexStates out;
  out.states = mlp_forward(params.mlp_g, pooled, tape ? &tape->g_cache : nullptr) + states.states;
  out.iteration = states.iteration + 1;
  if (tape) {
    tape->argmax = std::move(argmax);
    tape->groups = std::move(groups);
  }
  return out;
}

Tensor2d softmax_rows(const Tensor2d& logits) {
  Tensor2d p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

RawPrediction predict(const VertexStates& states, const PointGnnParams& params,
                      const ClassSpec& spec, HeadTape* tape) {
  if (params.head_cls.output_dim() != spec.size()) {
    throw ArgumentError("predict: classification head width does not match class spec");
  }
  RawPrediction pred;
  pred.logits = mlp_forward(params.head_cls, states.states, tape ? &tape->cls_cache : nullptr);
  pred.probabilities = softmax_rows(pred.logits);
  if (tape) tape->loc_caches.resize(params.head_loc.size());
  for (std::size_t c = 0; c < params.head_loc.size(); ++c) {
    pred.deltas.push_back(
        mlp_forward(params.head_loc[c], states.states, tape ? &tape->loc_caches[c] : nullptr));
  }
  return pred;
}

std::vector<double> loss_weights(const std::vector<VertexLabel>& labels, const ClassSpec& spec) {
  std::vector<double> w(labels.size(), 1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].cls == spec.dont_care()) w[i] = 0.0;
  }
  return w;
}

double classification_loss(const Tensor2d& probabilities, const std::vector<int>& labels,
                           const std::vector<double>& weights, Tensor2d* grad_logits) {
  const auto N = probabilities.rows();
  if (N == 0) throw ArgumentError("classification_loss: no vertices");
  if (static_cast<Eigen::Index>(labels.size()) != N ||
      (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != N)) {
    throw ArgumentError("classification_loss: label count mismatch");
  }
  double norm = 0;
  for (Eigen::Index i = 0; i < N; ++i) norm += weights.empty() ? 1.0 : weights[i];
  if (norm <= 0) throw ArgumentError("classification_loss: no weighted vertices");

  double loss = 0;
  if (grad_logits) grad_logits->setZero(N, probabilities.cols());
  for (Eigen::Index i = 0; i < N; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const int y = labels[i];
    if (y < 0 || y >= probabilities.cols()) throw ArgumentError("classification_loss: bad label");
    if (w == 0) continue;
    loss -= w * std::log(std::max(probabilities(i, y), 1e-12));
    if (grad_logits) {
      grad_logits->row(i) = probabilities.row(i) * (w / norm);
      (*grad_logits)(i, y) -= w / norm;
    }
  }
  return loss / norm;
}

double huber(double x, double threshold) {
  const double a = std::abs(x);
  return a <= threshold ? 0.5 * x * x : threshold * (a - 0.5 * threshold);
}

double huber_grad(double x, double threshold) {
  return std::abs(x) <= threshold ? x : (x > 0 ? threshold : -threshold);
}

double localization_loss(const std::vector<Tensor2d>& deltas, const std::vector<int>& slot_of_vertex,
                         const std::vector<EncodedBox>& targets, double normalizer,
                         std::vector<Tensor2d>* grad_deltas) {
  if (!(normalizer > 0)) throw ArgumentError("localization_loss: normalizer must be > 0");
  if (slot_of_vertex.size() != targets.size()) {
    throw ArgumentError("localization_loss: mask/target length mismatch");
  }
  if (grad_deltas) {
    grad_deltas->clear();
    for (const auto& d : deltas) grad_deltas->push_back(Tensor2d::Zero(d.rows(), d.cols()));
  }
  double loss = 0;
  for (std::size_t i = 0; i < slot_of_vertex.size(); ++i) {
    const int slot = slot_of_vertex[i];
    if (slot < 0) continue;
    if (slot >= static_cast<int>(deltas.size())) throw ArgumentError("localization_loss: bad slot");
    const auto row = static_cast<Eigen::Index>(i);
    for (int c = 0; c < 7; ++c) {
      const double diff = deltas[slot](row, c) - targets[i](c);
      loss += huber(diff);
      if (grad_deltas) (*grad_deltas)[slot](row, c) = huber_grad(diff) / normalizer;
    }
  }
  return loss / normalizer;
}

double regularization_loss(const PointGnnParams& params) {
  double sum = 0;
  visit_params(params, [&](const std::string& name, const auto& t) {
    if (name.ends_with(".weight")) sum += t.cwiseAbs().sum();
  });
  return sum;
}

double total_loss(double l_cls, double l_loc, double l_reg, const LossWeights& w) {
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0) throw ArgumentError("total_loss: negative weight");
  return w.alpha * l_cls + w.beta * l_loc + w.gamma * l_reg;
}

namespace {

// Forward through init, iterations and heads, recording everything.
RawPrediction forward_with_tape(const PointGnnParams& params, const ModelConfig& config,
                                const ClassSpec& spec, const PointCloud& raw, const Graph& graph,
                                double r0, ForwardTape& tape) {
  VertexStates s = init_vertex_state(raw, graph.vertices, r0, params, &tape.init);
  tape.iterations.resize(params.iterations.size());
  tape.states.clear();
  for (std::size_t t = 0; t < params.iterations.size(); ++t) {
    tape.states.push_back(s.states);
    s = gnn_iteration(graph, s, params.iterations[t], config.auto_registration, &tape.iterations[t]);
  }
  tape.states.push_back(s.states);
  return predict(s, params, spec, &tape.heads);
}

template <typename F>
void zip_params(PointGnnParams& a, const PointGnnParams& b, F&& f) {
  std::vector<double*> dst;
  std::vector<std::size_t> sizes;
  visit_params(a, [&](const std::string&, auto& t) {
    dst.push_back(t.data());
    sizes.push_back(static_cast<std::size_t>(t.size()));
  });
  std::size_t idx = 0;
  visit_params(b, [&](const std::string&, const auto& t) {
    if (idx >= dst.size() || sizes[idx] != static_cast<std::size_t>(t.size())) {
      throw ArgumentError("parameter structures differ");
    }
    f(dst[idx], t.data(), sizes[idx]);
    ++idx;
  });
}

}  // namespace

LossBreakdown loss_and_gradient(const PointGnnParams& params, const ModelConfig& config,
                                const ClassSpec& spec, const PointCloud& raw, const Graph& graph,
                                double r0, const std::vector<VertexLabel>& labels,
                                const LossWeights& weights, PointGnnParams* grad,
                                double grad_scale, ForwardTape* tape_out) {
  const auto V = static_cast<Eigen::Index>(graph.vertices.size());
  if (static_cast<Eigen::Index>(labels.size()) != V) {
    throw ArgumentError("loss_and_gradient: label count != vertex count");
  }
  ForwardTape local_tape;
  ForwardTape& tape = tape_out ? *tape_out : local_tape;
  const RawPrediction pred = forward_with_tape(params, config, spec, raw, graph, r0, tape);

  const std::vector<double> w = loss_weights(labels, spec);
  std::vector<int> cls(labels.size());
  std::vector<int> slot(labels.size(), -1);
  std::vector<EncodedBox> targets(labels.size(), EncodedBox::Zero());
  double norm = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cls[i] = labels[i].cls;
    norm += w[i];
    if (labels[i].target && w[i] > 0) {
      slot[i] = spec.head_slot(labels[i].cls);
      targets[i] = *labels[i].target;
    }
  }

  LossBreakdown out;
  Tensor2d grad_logits;
  std::vector<Tensor2d> grad_deltas;
  const bool backward = grad != nullptr;
  if (norm > 0) {
    out.cls = classification_loss(pred.probabilities, cls, w, backward ? &grad_logits : nullptr);
    out.loc = localization_loss(pred.deltas, slot, targets, norm, backward ? &grad_deltas : nullptr);
  } else {
    grad_logits = Tensor2d::Zero(V, spec.size());
    for (const auto& d : pred.deltas) grad_deltas.push_back(Tensor2d::Zero(d.rows(), d.cols()));
  }
  out.reg = regularization_loss(params);
  out.total = total_loss(out.cls, out.loc, out.reg, weights);
  if (!backward) return out;

  PointGnnParams& g = *grad;
  const double a = weights.alpha * grad_scale;
  const double b = weights.beta * grad_scale;

  // Heads.
  Tensor2d d_state = mlp_backward(params.head_cls, tape.heads.cls_cache, Tensor2d(grad_logits * a),
                                  g.head_cls);
  for (std::size_t c = 0; c < params.head_loc.size(); ++c) {
    d_state += mlp_backward(params.head_loc[c], tape.heads.loc_caches[c],
                            Tensor2d(grad_deltas[c] * b), g.head_loc[c]);
  }

  // Iterations in reverse.
  const Eigen::Index k = config.state_width;
  for (std::size_t t = params.iterations.size(); t-- > 0;) {
    const IterationParams& ip = params.iterations[t];
    IterationParams& ig = g.iterations[t];
    IterationTape& it = tape.iterations[t];

    Tensor2d d_prev = d_state;  // residual path
    const Tensor2d d_pooled = mlp_backward(ip.mlp_g, it.g_cache, d_state, ig.mlp_g);
    const auto E = static_cast<Eigen::Index>(graph.edges.size());
    auto [rows, d_rows] = max_aggregate_backward_compact(it.argmax, d_pooled, E);
    const auto R = static_cast<Eigen::Index>(rows.size());
    const auto& first = ip.mlp_f.layers.front();
    auto& first_grad = ig.mlp_f.layers.front();
    Tensor2d dz1;
    if (ip.mlp_f.layers.size() == 1) {
      dz1 = std::move(d_rows);
    } else {
      dz1 = mlp_backward(ip.mlp_f, gather_cache_rows(it.f_cache, rows), d_rows, ig.mlp_f, true, 1);
      for (Eigen::Index i = 0; i < R; ++i) {
        const auto src_row = it.f_first.row(rows[static_cast<std::size_t>(i)]);
        for (Eigen::Index c = 0; c < dz1.cols(); ++c) {
          if (!(src_row(c) > 0)) dz1(i, c) = 0;
        }
      }
    }
    Tensor2d rel_rows(R, 3);
    Tensor2d d_state_part = Tensor2d::Zero(V, dz1.cols());
    for (Eigen::Index i = 0; i < R; ++i) {
      const auto e = rows[static_cast<std::size_t>(i)];
      rel_rows.row(i) = it.edge_rel.row(e);
      d_state_part.row(graph.edges[static_cast<std::size_t>(e)].src) += dz1.row(i);
    }
    first_grad.weight.topRows(3).noalias() += rel_rows.transpose() * dz1;
    first_grad.bias += dz1.colwise().sum();
    first_grad.weight.bottomRows(k).noalias() += tape.states[t].transpose() * d_state_part;
    d_prev.noalias() += d_state_part * first.weight.bottomRows(k).transpose();

    Tensor2d d_offset = Tensor2d::Zero(V, 3);
    if (config.auto_registration) {
      const Tensor2d d_rel = dz1 * first.weight.topRows(3).transpose();
      for (Eigen::Index i = 0; i < R; ++i) {
        d_offset.row(graph.edges[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])].dst) +=
            d_rel.row(i);
      }
    }
    if (config.auto_registration) {
      d_prev += mlp_backward(ip.mlp_h, it.h_cache, d_offset, ig.mlp_h);
    }
    d_state = std::move(d_prev);
  }

  // Initial embedding; raw inputs need no gradient.
  const Tensor2d d_pooled = mlp_backward(params.embed_post, tape.init.post_cache, d_state, g.embed_post);
  auto [pair_rows, d_pairs] = max_aggregate_backward_compact(
      tape.init.argmax, d_pooled, static_cast<Eigen::Index>(tape.init.groups.group_of.size()));
  mlp_backward(params.embed_point, gather_cache_rows(tape.init.point_cache, pair_rows), d_pairs,
               g.embed_point, false);

  // L1 on weights.
  const double c = weights.gamma * grad_scale;
  if (c != 0) {
    std::vector<bool> is_weight;
    visit_params(params, [&](const std::string& name, const auto&) {
      is_weight.push_back(name.ends_with(".weight"));
    });
    std::size_t idx = 0;
    zip_params(g, params, [&](double* gd, const double* pv, std::size_t n) {
      if (is_weight[idx++]) {
        for (std::size_t i = 0; i < n; ++i) gd[i] += c * ((pv[i] > 0) - (pv[i] < 0));
      }
    });
  }
  return out;
}

std::uint64_t activation_fingerprint(const ForwardTape& tape) {
  std::uint64_t h = 1469598103934665603ull;
  fingerprint_cache(h, tape.init.point_cache);
  fingerprint_argmax(h, tape.init.argmax);
  fingerprint_cache(h, tape.init.post_cache);
  for (const auto& it : tape.iterations) {
    fingerprint_cache(h, it.h_cache);
    for (Eigen::Index i = 0; i < it.f_first.size(); ++i) fingerprint_mix(h, it.f_first.data()[i] > 0);
    fingerprint_cache(h, it.f_cache);
    fingerprint_argmax(h, it.argmax);
    fingerprint_cache(h, it.g_cache);
  }
  fingerprint_cache(h, tape.heads.cls_cache);
  for (const auto& c : tape.heads.loc_caches) fingerprint_cache(h, c);
  return h;
}

RawPrediction run_network(const PointGnnParams& params, const ModelConfig& config,
                          const ClassSpec& spec, const PointCloud& raw, const Graph& graph,
                          double r0, std::vector<Tensor2d>* states_out) {
  VertexStates s = init_vertex_state(raw, graph.vertices, r0, params);
  if (states_out) states_out->assign(1, s.states);
  const int T = std::min<int>(config.iterations, static_cast<int>(params.iterations.size()));
  for (int t = 0; t < T; ++t) {
    s = gnn_iteration(graph, s, params.iterations[t], config.auto_registration);
    if (states_out) states_out->push_back(s.states);
  }
  return predict(s, params, spec);
}

VertexDetections decode_predictions(const RawPrediction& pred, const PointCloud& vertices,
                                    const ClassSpec& spec) {
  VertexDetections out;
  for (Eigen::Index v = 0; v < pred.probabilities.rows(); ++v) {
    Eigen::Index best;
    const double p = pred.probabilities.row(v).maxCoeff(&best);
    const int cls = static_cast<int>(best);
    if (!spec.is_localized(cls)) continue;
    const EncodedBox enc = pred.deltas[spec.head_slot(cls)].row(v).transpose();
    out.boxes.push_back(decode_box(enc, vertices[v].position, *spec.classes[cls].constants));
    out.scores.push_back(p);
    out.classes.push_back(cls);
    out.vertices.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<Detection> forward_full(const PointGnnModel& model, const PointCloud& raw,
                                    const InferenceOptions& options) {
  if (raw.empty()) return {};
  const auto down = voxel_downsample(raw, options.voxel_size, options.voxel_mode, options.seed);
  const Graph graph = build_graph(down.cloud, options.radius);

  ModelConfig config = model.config;
  if (options.auto_registration) config.auto_registration = *options.auto_registration;
  if (options.iterations) {
    if (*options.iterations < 0 || *options.iterations > model.config.iterations) {
      throw ArgumentError("forward_full: iteration override exceeds trained iterations");
    }
    config.iterations = *options.iterations;
  }
  const RawPrediction pred = run_network(model.params, config, model.spec, raw, graph, options.r0);
  const VertexDetections cand = decode_predictions(pred, graph.vertices, model.spec);

  // NMS per object class, classes visited in name order.
  std::map<std::string, std::vector<std::size_t>> by_object;
  for (std::size_t i = 0; i < cand.boxes.size(); ++i) {
    by_object[model.spec.classes[cand.classes[i]].object].push_back(i);
  }
  std::vector<Detection> out;
  for (const auto& [object, idx] : by_object) {
    std::vector<Box3D> boxes;
    std::vector<double> scores;
    for (std::size_t i : idx) {
      boxes.push_back(cand.boxes[i]);
      scores.push_back(cand.scores[i]);
    }
    const NmsResult nms = merge_score_nms(boxes, scores, graph.vertices, options.nms);
    for (std::size_t m = 0; m < nms.boxes.size(); ++m) {
      const std::size_t seed = idx[nms.clusters[m].front()];
      Detection d;
      d.box = LabeledBox{object, nms.boxes[m], nms.scores[m]};
      d.cls = cand.classes[seed];
      d.vertex = cand.vertices[seed];
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<NamedTensor> params_to_tensors(const PointGnnParams& params) {
  std::vector<NamedTensor> out;
  visit_params(params, [&](const std::string& name, const auto& t) {
    NamedTensor nt;
    nt.name = name;
    nt.dims = {static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols())};
    nt.data.assign(t.data(), t.data() + t.size());
    out.push_back(std::move(nt));
  });
  return out;
}

void params_from_tensors(PointGnnParams& params, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  visit_params(params, [&](const std::string& name, auto& t) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor " + name);
    const NamedTensor& nt = *it->second;
    if (nt.dims.size() != 2 || nt.dims[0] != static_cast<std::uint64_t>(t.rows()) ||
        nt.dims[1] != static_cast<std::uint64_t>(t.cols())) {
      throw FormatError("checkpoint: shape mismatch for " + name);
    }
    std::copy(nt.data.begin(), nt.data.end(), t.data());
  });
  if (by_name.size() != tensors.size()) throw FormatError("checkpoint: duplicate tensor names");
}

}  // namespace pgnn
