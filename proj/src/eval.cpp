#include "pointgnn/eval.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "pointgnn/errors.hpp"

namespace pgnn {

void EvalRecord::append(const EvalRecord& other) {
  scores.insert(scores.end(), other.scores.begin(), other.scores.end());
  matched.insert(matched.end(), other.matched.begin(), other.matched.end());
  scene.insert(scene.end(), other.scene.begin(), other.scene.end());
  num_gt += other.num_gt;
}

EvalRecord match_detections(const std::vector<LabeledBox>& dets, const std::vector<LabeledBox>& gts,
                            const IouFn& iou, double threshold, std::size_t scene_id,
                            const std::vector<bool>& gt_ignored) {
  if (!(threshold > 0 && threshold <= 1)) throw ArgumentError("match_detections: threshold must be in (0, 1]");
  if (!gt_ignored.empty() && gt_ignored.size() != gts.size()) {
    throw ArgumentError("match_detections: ignore mask length mismatch");
  }
  auto ignored = [&](std::size_t g) { return !gt_ignored.empty() && gt_ignored[g]; };

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score.value_or(0.0) > dets[b].score.value_or(0.0);
  });

  EvalRecord rec;
  for (std::size_t g = 0; g < gts.size(); ++g) rec.num_gt += ignored(g) ? 0 : 1;
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : order) {
    int best = -1;
    double best_iou = -1;
    int best_ignored = -1;
    double best_ignored_iou = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].cls != dets[d].cls) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (v < threshold) continue;
      if (ignored(g)) {
        if (v > best_ignored_iou) {
          best_ignored_iou = v;
          best_ignored = static_cast<int>(g);
        }
      } else if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best < 0 && best_ignored >= 0) {
      taken[best_ignored] = true;
      continue;
    }
    if (best >= 0) taken[best] = true;
    rec.scores.push_back(dets[d].score.value_or(0.0));
    rec.matched.push_back(best >= 0);
    rec.scene.push_back(scene_id);
  }
  return rec;
}

double average_precision(const EvalRecord& record, ApInterpolation interpolation) {
  if (record.num_gt == 0) throw ArgumentError("average_precision: no ground truth");
  const std::size_t n = record.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return record.scores[a] > record.scores[b]; });

  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += record.matched[order[k]] ? 1 : 0;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(record.num_gt);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  std::vector<double> samples;
  if (interpolation == ApInterpolation::k40Point) {
    for (int i = 1; i <= 40; ++i) samples.push_back(i / 40.0);
  } else {
    for (int i = 0; i <= 10; ++i) samples.push_back(i / 10.0);
  }
  double sum = 0;
  std::size_t k = 0;
  for (double r : samples) {
    // Recall is non-decreasing, so the first index reaching r has the
    // maximal (monotonized) precision among all indices reaching r.
    while (k < n && recall[k] < r - 1e-12) ++k;
    if (k < n) sum += precision[k];
  }
  return sum / static_cast<double>(samples.size());
}

int difficulty_tier(std::size_t points_in_box, const DifficultyThresholds& t) {
  if (points_in_box >= t.easy) return 0;
  if (points_in_box >= t.moderate) return 1;
  if (points_in_box >= t.hard) return 2;
  return 3;
}

EvalRow evaluate_class(const std::vector<std::vector<LabeledBox>>& dets,
                       const std::vector<std::vector<LabeledBox>>& gts, const std::string& cls,
                       const IouFn& iou, double threshold, ApInterpolation interpolation,
                       const std::vector<std::vector<bool>>& gt_ignored) {
  if (dets.size() != gts.size()) throw ArgumentError("evaluate_class: scene count mismatch");
  EvalRecord all;
  EvalRow row;
  row.cls = cls;
  row.iou_threshold = threshold;
  for (std::size_t s = 0; s < dets.size(); ++s) {
    std::vector<LabeledBox> d, g;
    std::vector<bool> ign;
    for (const auto& b : dets[s]) {
      if (b.cls == cls) d.push_back(b);
    }
    for (std::size_t i = 0; i < gts[s].size(); ++i) {
      if (gts[s][i].cls != cls) continue;
      g.push_back(gts[s][i]);
      ign.push_back(!gt_ignored.empty() && gt_ignored[s][i]);
    }
    row.num_det += d.size();
    all.append(match_detections(d, g, iou, threshold, s, ign));
  }
  row.num_gt = all.num_gt;
  row.ap = all.num_gt > 0 ? average_precision(all, interpolation) : 0.0;
  return row;
}

void write_eval_report(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "class,iou_threshold,ap,num_gt,num_det\n";
  for (const auto& r : rows) {
    out << r.cls << ',' << r.iou_threshold << ',' << r.ap << ',' << r.num_gt << ',' << r.num_det << '\n';
  }
}

}  // namespace pgnn
