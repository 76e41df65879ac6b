#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointgnn/boxes.hpp"

namespace pgnn {

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

// Detections of one or more scenes after greedy matching.
struct EvalRecord {
  std::vector<double> scores;
  std::vector<bool> matched;
  std::vector<std::size_t> scene;
  std::size_t num_gt = 0;

  void append(const EvalRecord& other);
};

// Greedy matching in descending score order (ties: lowest detection index).
// Each detection takes the highest-IoU unmatched ground truth of its class
// with IoU >= threshold. Detections that only match an ignored ground truth
// are dropped from the record; ignored ground truths do not count in num_gt.
EvalRecord match_detections(const std::vector<LabeledBox>& dets, const std::vector<LabeledBox>& gts,
                            const IouFn& iou, double threshold, std::size_t scene_id = 0,
                            const std::vector<bool>& gt_ignored = {});

enum class ApInterpolation { k40Point, k11Point };

// Interpolated average precision over the global score sweep.
double average_precision(const EvalRecord& record,
                         ApInterpolation interpolation = ApInterpolation::k40Point);

// Difficulty tier from the number of points inside a ground-truth box:
// 0 easy, 1 moderate, 2 hard, 3 below every threshold.
struct DifficultyThresholds {
  std::size_t easy = 150;
  std::size_t moderate = 50;
  std::size_t hard = 10;
};
int difficulty_tier(std::size_t points_in_box, const DifficultyThresholds& t);

struct EvalRow {
  std::string cls;
  double iou_threshold = 0.5;
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
};

// Evaluates one object class over many scenes. Scenes are parallel lists of
// detections and ground truths; other classes are filtered out.
EvalRow evaluate_class(const std::vector<std::vector<LabeledBox>>& dets,
                       const std::vector<std::vector<LabeledBox>>& gts, const std::string& cls,
                       const IouFn& iou, double threshold,
                       ApInterpolation interpolation = ApInterpolation::k40Point,
                       const std::vector<std::vector<bool>>& gt_ignored = {});

// CSV `class,iou_threshold,ap,num_gt,num_det`.
void write_eval_report(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace pgnn
