#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pointgnn/pointcloud.hpp"

namespace pgnn {

// Oriented box: center, size (l along the heading, h vertical, w lateral),
// and yaw about the vertical (z) axis.
struct Box3D {
  Vec3 center = Vec3::Zero();
  double l = 1.0;
  double h = 1.0;
  double w = 1.0;
  double yaw = 0.0;

  double volume() const { return l * h * w; }
  // Same center and yaw, every dimension multiplied by `factor`.
  Box3D scaled(double factor) const;
  // Unit axes along l, w, h.
  Vec3 axis_l() const;
  Vec3 axis_w() const;
  static Vec3 axis_h() { return Vec3::UnitZ(); }
  // Footprint corners in the horizontal plane, counter-clockwise.
  std::array<Eigen::Vector2d, 4> bev_corners() const;
};

using EncodedBox = Eigen::Matrix<double, 7, 1>;

// Per-class scale factors of the box encoding.
struct BoxConstants {
  double l_m = 1.0;
  double h_m = 1.0;
  double w_m = 1.0;
  double theta0 = 0.0;
  double theta_m = 1.0;
};

// Maps a yaw into [-pi/4, 3pi/4) modulo pi. Boxes are symmetric under a
// half-turn, so this does not change the box.
double normalize_yaw(double yaw);

EncodedBox encode_box(const Box3D& box, const Vec3& vertex, const BoxConstants& c);
Box3D decode_box(const EncodedBox& enc, const Vec3& vertex, const BoxConstants& c);

// Inclusive containment in the box frame, with a 1e-9 m slack for rounding.
bool point_in_box(const Vec3& p, const Box3D& box);

// Intersection over union of the rotated footprints.
double bev_iou(const Box3D& a, const Box3D& b);
// Footprint intersection times vertical overlap, over the union of volumes.
double iou_3d(const Box3D& a, const Box3D& b);
// Area of the intersection of two convex polygons (Sutherland-Hodgman).
double convex_intersection_area(const std::vector<Eigen::Vector2d>& subject,
                                const std::vector<Eigen::Vector2d>& clip);

// Product of the extents of the contained points along the box axes, over
// the box volume, clamped to [0, 1]. Fewer than two contained points give 0.
double occlusion_factor(const Box3D& box, const PointCloud& points);

struct ClassInfo {
  std::string name;    // prediction class, e.g. "Car_side"
  std::string object;  // ground-truth class it localizes, e.g. "Car"
  std::optional<BoxConstants> constants;
};

// Ordered prediction classes. Index 0 is Background; the last is DoNotCare.
struct ClassSpec {
  std::vector<ClassInfo> classes;

  int size() const { return static_cast<int>(classes.size()); }
  int background() const { return 0; }
  int dont_care() const { return size() - 1; }
  bool is_localized(int cls) const;
  // Localized classes in order; position in this list is the head slot.
  std::vector<int> localized() const;
  int head_slot(int cls) const;
  // Prediction class for a ground-truth object class and yaw, or -1 if the
  // object is not part of this spec.
  int class_for(const std::string& object, double yaw) const;

  static ClassSpec car();
  static ClassSpec pedestrian_cyclist();
};

bool is_dont_care_name(const std::string& object);

struct LabeledBox {
  std::string cls;
  Box3D box;
  std::optional<double> score;
};

struct VertexLabel {
  int cls = 0;
  std::optional<EncodedBox> target;
  int box_id = -1;
};

// Containment decides object vs Background; the smallest containing box
// wins. Objects outside the class spec are ignored.
std::vector<VertexLabel> assign_vertex_labels(const PointCloud& vertices,
                                              const std::vector<LabeledBox>& gt,
                                              const ClassSpec& spec);

// Text format: `class x y z l h w yaw [score]` per line.
std::vector<LabeledBox> parse_boxes_text(std::istream& in);
std::vector<LabeledBox> read_boxes_text(const std::string& path);
void write_boxes_text(std::ostream& out, const std::vector<LabeledBox>& boxes);

}  // namespace pgnn
