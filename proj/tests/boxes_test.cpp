#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include <gtest/gtest.h>

#include "pointgnn/boxes.hpp"
#include "pointgnn/errors.hpp"
#include "support.hpp"

namespace pgnn {
namespace {

using test::make_point;
constexpr double kPi = std::numbers::pi;

const BoxConstants kCar{3.88, 1.5, 1.63, 0.0, kPi / 2};

Box3D make_box(Vec3 c, double l, double h, double w, double yaw) {
  Box3D b;
  b.center = c;
  b.l = l;
  b.h = h;
  b.w = w;
  b.yaw = yaw;
  return b;
}

Box3D random_box(std::mt19937_64& rng, double spread = 50.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), size(0.3, 6.0),
      yaw(-kPi / 4, 3 * kPi / 4);
  return make_box({pos(rng), pos(rng), pos(rng) / 10}, size(rng), size(rng), size(rng), yaw(rng));
}

TEST(NormalizeYaw, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(normalize_yaw(0.0), 0.0);
  EXPECT_NEAR(normalize_yaw(kPi), 0.0, 1e-15);
  EXPECT_NEAR(normalize_yaw(3 * kPi / 4), -kPi / 4, 1e-15);
  EXPECT_NEAR(normalize_yaw(-kPi / 2), kPi / 2, 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 1000; ++i) {
    const double y = u(rng);
    const double n = normalize_yaw(y);
    EXPECT_GE(n, -kPi / 4);
    EXPECT_LT(n, 3 * kPi / 4);
    const double k = (y - n) / kPi;
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

TEST(BoxCodec, HandExample) {
  const Box3D b = make_box({5.0, 1.0, -0.5}, 7.76, 1.5, 1.63, 0.3);
  const EncodedBox e = encode_box(b, Vec3(1.12, -0.5, 1.13), kCar);
  EXPECT_DOUBLE_EQ(e(0), 3.88 / 3.88);
  EXPECT_DOUBLE_EQ(e(1), 1.5 / 1.5);
  EXPECT_DOUBLE_EQ(e(2), -1.63 / 1.63);
  EXPECT_NEAR(e(3), std::log(2.0), 1e-15);
  EXPECT_EQ(e(4), 0.0);
  EXPECT_EQ(e(5), 0.0);
  EXPECT_DOUBLE_EQ(e(6), 0.3 / (kPi / 2));
}

TEST(BoxCodec, FrontBinOffsetsYaw) {
  const BoxConstants front{3.88, 1.5, 1.63, kPi / 2, kPi / 2};
  const EncodedBox e = encode_box(make_box(Vec3::Zero(), 3.88, 1.5, 1.63, kPi / 2), Vec3::Zero(), front);
  EXPECT_NEAR(e(6), 0.0, 1e-15);
}

TEST(BoxCodec, RoundTripsRandomBoxes) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> v(-40, 40);
  double worst = 0;
  for (int i = 0; i < 20000; ++i) {
    const Box3D b = random_box(rng);
    const Vec3 vertex(v(rng), v(rng), v(rng) / 10);
    const Box3D d = decode_box(encode_box(b, vertex, kCar), vertex, kCar);
    worst = std::max({worst, (d.center - b.center).norm(), std::abs(d.l - b.l),
                      std::abs(d.h - b.h), std::abs(d.w - b.w), std::abs(d.yaw - b.yaw)});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(BoxCodec, RejectsNonPositiveSizes) {
  EXPECT_THROW(encode_box(make_box(Vec3::Zero(), 0.0, 1, 1, 0), Vec3::Zero(), kCar), ArgumentError);
  BoxConstants bad = kCar;
  bad.theta_m = 0;
  EXPECT_THROW(encode_box(make_box(Vec3::Zero(), 1, 1, 1, 0), Vec3::Zero(), bad), ArgumentError);
}

TEST(PointInBox, CenterCornersAndOutside) {
  const Box3D b = make_box({1, 2, 3}, 4, 2, 1, 0.7);
  EXPECT_TRUE(point_in_box(b.center, b));
  for (const auto& c : b.bev_corners()) {
    EXPECT_TRUE(point_in_box(Vec3(c.x(), c.y(), 4.0), b));
    EXPECT_TRUE(point_in_box(Vec3(c.x(), c.y(), 2.0), b));
    EXPECT_FALSE(point_in_box(Vec3(c.x(), c.y(), 4.01), b));
  }
  EXPECT_FALSE(point_in_box(b.center + b.axis_l() * 2.01, b));
  EXPECT_FALSE(point_in_box(b.center + b.axis_w() * 0.51, b));
}

TEST(PointInBox, MatchesLocalFrameIntervals) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int i = 0; i < 200; ++i) {
    const Box3D b = random_box(rng, 2.0);
    const double c = std::cos(-b.yaw), s = std::sin(-b.yaw);
    for (int k = 0; k < 50; ++k) {
      const Vec3 p = b.center + Vec3(u(rng), u(rng), u(rng));
      const Vec3 d = p - b.center;
      const double lx = c * d.x() - s * d.y();
      const double ly = s * d.x() + c * d.y();
      const bool inside = std::abs(lx) <= b.l / 2 && std::abs(ly) <= b.w / 2 && std::abs(d.z()) <= b.h / 2;
      EXPECT_EQ(point_in_box(p, b), inside);
    }
  }
}

TEST(Iou, OffsetSquaresGiveOneThird) {
  const Box3D a = make_box({0, 0, 0}, 2, 2, 2, 0);
  const Box3D b = make_box({1, 0, 0}, 2, 2, 2, 0);
  EXPECT_NEAR(bev_iou(a, b), 1.0 / 3, 1e-12);
  EXPECT_NEAR(iou_3d(a, b), 1.0 / 3, 1e-12);
  EXPECT_NEAR(iou_3d(a, a), 1.0, 1e-12);
  EXPECT_EQ(iou_3d(a, make_box({0, 0, 2.5}, 2, 2, 2, 0)), 0.0);
  EXPECT_EQ(bev_iou(a, make_box({10, 0, 0}, 2, 2, 2, 0)), 0.0);
}

TEST(Iou, RotationByHalfTurnIsSameBox) {
  const Box3D a = make_box({3, 4, 0}, 4, 1.5, 1.6, 0.4);
  Box3D b = a;
  b.yaw += kPi;
  EXPECT_NEAR(iou_3d(a, b), 1.0, 1e-12);
}

TEST(Iou, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> shift(-1.5, 1.5), u01(0, 1);
  for (int trial = 0; trial < 12; ++trial) {
    const Box3D a = random_box(rng, 0.0);
    Box3D b = random_box(rng, 0.0);
    b.center = a.center + Vec3(shift(rng), shift(rng), shift(rng) / 3);
    const double ra = std::hypot(a.l, a.w) / 2 + std::hypot(b.l, b.w) / 2 + 2;
    const double hz = a.h + b.h + 1;
    int in_a = 0, in_b = 0, in_both = 0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const Vec3 p = a.center + Vec3((2 * u01(rng) - 1) * ra, (2 * u01(rng) - 1) * ra, (2 * u01(rng) - 1) * hz);
      const bool ia = point_in_box(p, a), ib = point_in_box(p, b);
      in_a += ia;
      in_b += ib;
      in_both += ia && ib;
    }
    const int uni = in_a + in_b - in_both;
    const double mc = uni > 0 ? static_cast<double>(in_both) / uni : 0.0;
    EXPECT_NEAR(iou_3d(a, b), mc, 0.015) << trial;
  }
}

TEST(ConvexIntersection, OrientationDoesNotMatter) {
  std::vector<Eigen::Vector2d> sq{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  std::vector<Eigen::Vector2d> tri{{1, 1}, {3, 1}, {1, 3}};
  const double ccw = convex_intersection_area(sq, tri);
  std::reverse(tri.begin(), tri.end());
  EXPECT_NEAR(convex_intersection_area(sq, tri), ccw, 1e-14);
  EXPECT_NEAR(ccw, 1.0, 1e-14);
}

TEST(Occlusion, OppositeCornersGiveOne) {
  const Box3D b = make_box({5, 5, 0}, 4, 1.5, 1.6, 0.9);
  const auto c = b.bev_corners();
  PointCloud pts;
  pts.points = {make_point(c[0].x(), c[0].y(), 0.75), make_point(c[2].x(), c[2].y(), -0.75)};
  EXPECT_NEAR(occlusion_factor(b, pts), 1.0, 1e-9);
}

TEST(Occlusion, FewerThanTwoPointsGiveZero) {
  const Box3D b = make_box({0, 0, 0}, 4, 1.5, 1.6, 0);
  PointCloud pts;
  EXPECT_EQ(occlusion_factor(b, pts), 0.0);
  pts.points = {make_point(0.3, 0.2, 0.1), make_point(50, 0, 0)};
  EXPECT_EQ(occlusion_factor(b, pts), 0.0);
}

TEST(Occlusion, MatchesLocalExtentOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const Box3D b = random_box(rng, 5.0);
    PointCloud pts;
    for (int k = 0; k < 40; ++k) pts.points.push_back(make_point(b.center.x() + u(rng), b.center.y() + u(rng), b.center.z() + u(rng) / 2));
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    int inside = 0;
    for (const auto& p : pts.points) {
      if (!point_in_box(p.position, b)) continue;
      ++inside;
      const Vec3 d = p.position - b.center;
      const double v[3] = {d.dot(b.axis_l()), d.dot(b.axis_w()), d.z()};
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], v[k]);
        hi[k] = std::max(hi[k], v[k]);
      }
    }
    const double expected =
        inside < 2 ? 0.0 : (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]) / b.volume();
    EXPECT_NEAR(occlusion_factor(b, pts), expected, 1e-9);
  }
}

TEST(Occlusion, MonotoneInAddedPoints) {
  std::mt19937_64 rng(6);
  const Box3D b = make_box({0, 0, 0}, 4, 1.5, 1.6, 0.2);
  std::uniform_real_distribution<double> u(-1, 1);
  PointCloud pts;
  double prev = 0;
  for (int k = 0; k < 100; ++k) {
    pts.points.push_back(make_point(u(rng) * 2.4, u(rng) * 1.0, u(rng) * 0.8));
    const double o = occlusion_factor(b, pts);
    EXPECT_GE(o, prev);
    EXPECT_LE(o, 1.0);
    prev = o;
  }
}

TEST(Occlusion, InvariantUnderRigidMotionAboutVertical) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1), ang(-kPi, kPi), t(-100, 100);
  for (int i = 0; i < 200; ++i) {
    const Box3D b = random_box(rng, 10.0);
    PointCloud pts;
    for (int k = 0; k < 30; ++k) {
      pts.points.push_back(make_point(0, 0, 0));
      pts.points.back().position =
          b.center + b.axis_l() * u(rng) * b.l / 2 + b.axis_w() * u(rng) * b.w / 2 + Vec3(0, 0, u(rng) * b.h / 2);
    }
    const Eigen::Matrix3d r = Eigen::AngleAxisd(ang(rng), Vec3::UnitZ()).toRotationMatrix();
    const Vec3 shift(t(rng), t(rng), t(rng) / 10);
    Box3D moved = b;
    moved.center = r * b.center + shift;
    moved.yaw = b.yaw + std::atan2(r(1, 0), r(0, 0));
    PointCloud moved_pts = pts;
    for (auto& p : moved_pts.points) p.position = r * p.position + shift;
    EXPECT_NEAR(occlusion_factor(moved, moved_pts), occlusion_factor(b, pts), 1e-9);
  }
}

TEST(ClassSpec, CarLayout) {
  const ClassSpec s = ClassSpec::car();
  ASSERT_EQ(s.size(), 4);
  EXPECT_EQ(s.classes[1].name, "Car_side");
  EXPECT_EQ(s.classes[2].name, "Car_front");
  EXPECT_EQ(s.localized(), (std::vector<int>{1, 2}));
  EXPECT_EQ(s.head_slot(2), 1);
  EXPECT_EQ(s.head_slot(0), -1);
  EXPECT_EQ(s.class_for("Car", 0.0), 1);
  EXPECT_EQ(s.class_for("Car", kPi / 2), 2);
  EXPECT_EQ(s.class_for("Car", kPi), 1);
  EXPECT_EQ(s.class_for("Van", 0.0), -1);
  EXPECT_EQ(ClassSpec::pedestrian_cyclist().size(), 6);
}

TEST(VertexLabels, OrientationBinsAndBackground) {
  const ClassSpec spec = ClassSpec::car();
  PointCloud v;
  v.points = {make_point(0, 0, 0), make_point(10, 0, 0), make_point(50, 50, 0), make_point(20, 0, 0)};
  const std::vector<LabeledBox> gt{{"Car", make_box({0.5, 0, 0}, 4, 1.5, 1.6, 0.0), {}},
                                   {"Car", make_box({10, 0.5, 0}, 4, 1.5, 1.6, kPi / 2), {}},
                                   {"DontCare", make_box({20, 0, 0}, 2, 2, 2, 0), {}}};
  const auto labels = assign_vertex_labels(v, gt, spec);
  EXPECT_EQ(labels[0].cls, 1);
  ASSERT_TRUE(labels[0].target.has_value());
  EXPECT_NEAR((*labels[0].target)(0), 0.5 / 3.88, 1e-15);
  EXPECT_EQ(labels[1].cls, 2);
  EXPECT_NEAR((*labels[1].target)(6), 0.0, 1e-15);
  EXPECT_EQ(labels[2].cls, 0);
  EXPECT_FALSE(labels[2].target.has_value());
  EXPECT_EQ(labels[3].cls, spec.dont_care());
  EXPECT_FALSE(labels[3].target.has_value());
}

TEST(VertexLabels, SmallestContainingBoxWins) {
  const ClassSpec spec = ClassSpec::car();
  PointCloud v;
  v.points = {make_point(0, 0, 0)};
  const std::vector<LabeledBox> gt{{"Car", make_box({0, 0, 0}, 5, 2, 2, 0), {}},
                                   {"Car", make_box({0.2, 0, 0}, 4, 1.5, 1.6, 0), {}}};
  EXPECT_EQ(assign_vertex_labels(v, gt, spec)[0].box_id, 1);
}

TEST(BoxText, RoundTripsWithAndWithoutScore) {
  const std::vector<LabeledBox> boxes{{"Car", make_box({1.25, -3.5, 0.1}, 3.9, 1.5, 1.6, 0.123456789012345), {}},
                                      {"Pedestrian", make_box({0.1, 0.2, 0.3}, 0.8, 1.7, 0.6, -0.5), 0.875}};
  std::stringstream ss;
  write_boxes_text(ss, boxes);
  const auto back = parse_boxes_text(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].box.yaw, boxes[0].box.yaw);
  EXPECT_FALSE(back[0].score.has_value());
  EXPECT_EQ(back[1].cls, "Pedestrian");
  EXPECT_EQ(*back[1].score, 0.875);
}

TEST(BoxText, RejectsMalformedAndNonPositive) {
  std::istringstream bad("Car 1 2 3 4 5\n");
  EXPECT_THROW(parse_boxes_text(bad), FormatError);
  std::istringstream neg("# comment\nCar 0 0 0 -1 1 1 0\n");
  EXPECT_THROW(parse_boxes_text(neg), FormatError);
}

}  // namespace
}  // namespace pgnn
