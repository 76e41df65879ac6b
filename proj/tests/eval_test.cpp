#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pointgnn/errors.hpp"
#include "pointgnn/eval.hpp"

namespace pgnn {
namespace {

LabeledBox car(double x, std::optional<double> score = std::nullopt) {
  LabeledBox b;
  b.cls = "Car";
  b.box.center = Vec3(x, 0, 0);
  b.box.l = 4;
  b.box.h = 1.5;
  b.box.w = 1.6;
  b.score = score;
  return b;
}

const IouFn kIou = [](const Box3D& a, const Box3D& b) { return iou_3d(a, b); };

double ap_of(const std::vector<LabeledBox>& dets, const std::vector<LabeledBox>& gts,
             ApInterpolation interp = ApInterpolation::k40Point) {
  return average_precision(match_detections(dets, gts, kIou, 0.5), interp);
}

TEST(AveragePrecision, PerfectDetectorIsOne) {
  EXPECT_EQ(ap_of({car(0, 0.9), car(10, 0.8)}, {car(0), car(10)}), 1.0);
}

TEST(AveragePrecision, AllFalsePositivesIsZero) {
  EXPECT_EQ(ap_of({car(50, 0.9), car(60, 0.8)}, {car(0)}), 0.0);
  EXPECT_EQ(ap_of({}, {car(0)}), 0.0);
}

TEST(AveragePrecision, LowerScoredMatchGivesHalf) {
  EXPECT_EQ(ap_of({car(50, 0.9), car(0, 0.3)}, {car(0)}), 0.5);
}

TEST(AveragePrecision, HalfRecallAtFullPrecision) {
  EXPECT_EQ(ap_of({car(0, 0.9)}, {car(0), car(10)}), 0.5);
}

TEST(AveragePrecision, ElevenPointProtocol) {
  EXPECT_EQ(ap_of({car(0, 0.9)}, {car(0), car(10)}, ApInterpolation::k11Point), 6.0 / 11.0);
}

TEST(AveragePrecision, ZeroGroundTruthThrows) {
  EXPECT_THROW(ap_of({car(0, 0.9)}, {}), ArgumentError);
}

TEST(AveragePrecision, InvariantUnderMonotoneRescoring) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1), x(-2, 60);
  std::vector<LabeledBox> gts, dets, rescored;
  for (int i = 0; i < 10; ++i) gts.push_back(car(6.0 * i));
  for (int i = 0; i < 25; ++i) {
    const double s = u(rng);
    dets.push_back(car(x(rng), s));
    rescored.push_back(car(dets.back().box.center.x(), 3 * s * s + 1));
  }
  EXPECT_EQ(ap_of(dets, gts), ap_of(rescored, gts));
}

TEST(AveragePrecision, DeletingFalsePositiveNeverHurts) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1), x(-2, 60);
  std::vector<LabeledBox> gts;
  for (int i = 0; i < 10; ++i) gts.push_back(car(6.0 * i));
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<LabeledBox> dets;
    for (int i = 0; i < 20; ++i) dets.push_back(car(x(rng), u(rng)));
    const EvalRecord rec = match_detections(dets, gts, kIou, 0.5);
    const double base = average_precision(rec);
    for (std::size_t k = 0; k < rec.matched.size(); ++k) {
      if (rec.matched[k]) continue;
      EvalRecord fewer = rec;
      fewer.scores.erase(fewer.scores.begin() + static_cast<std::ptrdiff_t>(k));
      fewer.matched.erase(fewer.matched.begin() + static_cast<std::ptrdiff_t>(k));
      fewer.scene.erase(fewer.scene.begin() + static_cast<std::ptrdiff_t>(k));
      EXPECT_GE(average_precision(fewer), base);
    }
  }
}

TEST(MatchDetections, SingleMatchPerGroundTruth) {
  const EvalRecord r = match_detections({car(0.1, 0.5), car(0, 0.9)}, {car(0)}, kIou, 0.5);
  ASSERT_EQ(r.matched.size(), 2u);
  EXPECT_EQ(r.scores[0], 0.9);
  EXPECT_TRUE(r.matched[0]);
  EXPECT_FALSE(r.matched[1]);
}

TEST(MatchDetections, ClassMustAgree) {
  LabeledBox ped = car(0, 0.9);
  ped.cls = "Pedestrian";
  const EvalRecord r = match_detections({ped}, {car(0)}, kIou, 0.5);
  EXPECT_FALSE(r.matched[0]);
}

TEST(MatchDetections, IgnoredGroundTruthAbsorbsDetection) {
  const EvalRecord r = match_detections({car(0, 0.9), car(10, 0.8)}, {car(0), car(10)}, kIou, 0.5, 0, {true, false});
  EXPECT_EQ(r.num_gt, 1u);
  EXPECT_EQ(r.matched.size(), 1u);
  EXPECT_EQ(average_precision(r), 1.0);
}

TEST(MatchDetections, BadThresholdThrows) {
  EXPECT_THROW(match_detections({}, {}, kIou, 0.0), ArgumentError);
  EXPECT_THROW(match_detections({}, {car(0)}, kIou, 0.5, 0, {true, false}), ArgumentError);
}

TEST(Difficulty, PointCountTiers) {
  const DifficultyThresholds t;
  EXPECT_EQ(difficulty_tier(200, t), 0);
  EXPECT_EQ(difficulty_tier(150, t), 0);
  EXPECT_EQ(difficulty_tier(60, t), 1);
  EXPECT_EQ(difficulty_tier(10, t), 2);
  EXPECT_EQ(difficulty_tier(3, t), 3);
}

TEST(EvaluateClass, PoolsScenesAndWritesReport) {
  const std::vector<std::vector<LabeledBox>> dets{{car(0, 0.9)}, {car(40, 0.2)}};
  const std::vector<std::vector<LabeledBox>> gts{{car(0)}, {car(20)}};
  const EvalRow row = evaluate_class(dets, gts, "Car", kIou, 0.7);
  EXPECT_EQ(row.num_gt, 2u);
  EXPECT_EQ(row.num_det, 2u);
  EXPECT_EQ(row.ap, 0.5);
  std::ostringstream out;
  write_eval_report(out, {row});
  EXPECT_EQ(out.str(), "class,iou_threshold,ap,num_gt,num_det\nCar,0.7,0.5,2,2\n");
  EXPECT_THROW(evaluate_class(dets, {gts[0]}, "Car", kIou, 0.7), ArgumentError);
}

}  // namespace
}  // namespace pgnn
