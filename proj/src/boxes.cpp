#include "pointgnn/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "pointgnn/errors.hpp"

namespace pgnn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kContainSlack = 1e-9;

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

Box3D Box3D::scaled(double factor) const {
  Box3D b = *this;
  b.l *= factor;
  b.h *= factor;
  b.w *= factor;
  return b;
}

Vec3 Box3D::axis_l() const { return {std::cos(yaw), std::sin(yaw), 0.0}; }
Vec3 Box3D::axis_w() const { return {-std::sin(yaw), std::cos(yaw), 0.0}; }

std::array<Eigen::Vector2d, 4> Box3D::bev_corners() const {
  const Eigen::Vector2d c = center.head<2>();
  const Eigen::Vector2d ul = axis_l().head<2>() * (l / 2);
  const Eigen::Vector2d uw = axis_w().head<2>() * (w / 2);
  return {c + ul + uw, c - ul + uw, c - ul - uw, c + ul - uw};
}

double normalize_yaw(double yaw) {
  // Shift so the target interval starts at 0, wrap into [0, pi), shift back.
  double t = std::fmod(yaw + kPi / 4, kPi);
  if (t < 0) t += kPi;
  if (t >= kPi) t -= kPi;
  return t - kPi / 4;
}

EncodedBox encode_box(const Box3D& box, const Vec3& vertex, const BoxConstants& c) {
  if (!(box.l > 0 && box.h > 0 && box.w > 0)) {
    throw ArgumentError("encode_box: box sizes must be positive");
  }
  if (!(c.l_m > 0 && c.h_m > 0 && c.w_m > 0 && c.theta_m > 0)) {
    throw ArgumentError("encode_box: constants must be positive");
  }
  EncodedBox e;
  e << (box.center.x() - vertex.x()) / c.l_m, (box.center.y() - vertex.y()) / c.h_m,
      (box.center.z() - vertex.z()) / c.w_m, std::log(box.l / c.l_m), std::log(box.h / c.h_m),
      std::log(box.w / c.w_m), (normalize_yaw(box.yaw) - c.theta0) / c.theta_m;
  return e;
}

Box3D decode_box(const EncodedBox& e, const Vec3& vertex, const BoxConstants& c) {
  Box3D b;
  b.center = Vec3(e(0) * c.l_m + vertex.x(), e(1) * c.h_m + vertex.y(), e(2) * c.w_m + vertex.z());
  b.l = c.l_m * std::exp(e(3));
  b.h = c.h_m * std::exp(e(4));
  b.w = c.w_m * std::exp(e(5));
  b.yaw = e(6) * c.theta_m + c.theta0;
  return b;
}

bool point_in_box(const Vec3& p, const Box3D& box) {
  const Vec3 d = p - box.center;
  const double along_l = d.dot(box.axis_l());
  const double along_w = d.dot(box.axis_w());
  return std::abs(along_l) <= box.l / 2 + kContainSlack &&
         std::abs(along_w) <= box.w / 2 + kContainSlack &&
         std::abs(d.z()) <= box.h / 2 + kContainSlack;
}

double convex_intersection_area(const std::vector<Eigen::Vector2d>& subject,
                                const std::vector<Eigen::Vector2d>& clip) {
  // Orient the clip polygon counter-clockwise so "inside" is left of each edge.
  std::vector<Eigen::Vector2d> clip_ccw = clip;
  double signed_area = 0;
  for (std::size_t i = 0; i < clip.size(); ++i) signed_area += cross(clip[i], clip[(i + 1) % clip.size()]);
  if (signed_area < 0) std::reverse(clip_ccw.begin(), clip_ccw.end());

  std::vector<Eigen::Vector2d> poly = subject;
  for (std::size_t e = 0; e < clip_ccw.size() && !poly.empty(); ++e) {
    const Eigen::Vector2d a = clip_ccw[e];
    const Eigen::Vector2d b = clip_ccw[(e + 1) % clip_ccw.size()];
    const Eigen::Vector2d edge = b - a;
    auto side = [&](const Eigen::Vector2d& p) { return cross(edge, p - a); };

    std::vector<Eigen::Vector2d> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Eigen::Vector2d& cur = poly[i];
      const Eigen::Vector2d& prev = poly[(i + poly.size() - 1) % poly.size()];
      const double s_cur = side(cur);
      const double s_prev = side(prev);
      if (s_cur >= 0) {
        if (s_prev < 0) next.push_back(prev + (cur - prev) * (s_prev / (s_prev - s_cur)));
        next.push_back(cur);
      } else if (s_prev >= 0) {
        next.push_back(prev + (cur - prev) * (s_prev / (s_prev - s_cur)));
      }
    }
    poly = std::move(next);
  }
  return poly.size() < 3 ? 0.0 : polygon_area(poly);
}

namespace {

double bev_intersection(const Box3D& a, const Box3D& b) {
  // Cheap reject on circumscribed circles.
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if ((a.center.head<2>() - b.center.head<2>()).norm() > ra + rb) return 0.0;
  const auto ca = a.bev_corners();
  const auto cb = b.bev_corners();
  return convex_intersection_area({ca.begin(), ca.end()}, {cb.begin(), cb.end()});
}

}  // namespace

double bev_iou(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection(a, b);
  const double uni = a.l * a.w + b.l * b.w - inter;
  return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double top = std::min(a.center.z() + a.h / 2, b.center.z() + b.h / 2);
  const double bottom = std::max(a.center.z() - a.h / 2, b.center.z() - b.h / 2);
  const double overlap_h = std::max(0.0, top - bottom);
  if (overlap_h <= 0) return 0.0;
  const double inter = bev_intersection(a, b) * overlap_h;
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double occlusion_factor(const Box3D& box, const PointCloud& points) {
  const Vec3 axes[3] = {box.axis_l(), box.axis_w(), Box3D::axis_h()};
  double lo[3], hi[3];
  std::fill(std::begin(lo), std::end(lo), std::numeric_limits<double>::infinity());
  std::fill(std::begin(hi), std::end(hi), -std::numeric_limits<double>::infinity());
  std::size_t inside = 0;
  for (const auto& p : points.points) {
    if (!point_in_box(p.position, box)) continue;
    ++inside;
    for (int k = 0; k < 3; ++k) {
      const double v = axes[k].dot(p.position);
      lo[k] = std::min(lo[k], v);
      hi[k] = std::max(hi[k], v);
    }
  }
  if (inside < 2) return 0.0;
  const double extent = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  return std::clamp(extent / box.volume(), 0.0, 1.0);
}

bool ClassSpec::is_localized(int cls) const {
  return cls >= 0 && cls < size() && classes[cls].constants.has_value();
}

std::vector<int> ClassSpec::localized() const {
  std::vector<int> out;
  for (int c = 0; c < size(); ++c) {
    if (is_localized(c)) out.push_back(c);
  }
  return out;
}

int ClassSpec::head_slot(int cls) const {
  const auto loc = localized();
  const auto it = std::find(loc.begin(), loc.end(), cls);
  return it == loc.end() ? -1 : static_cast<int>(it - loc.begin());
}

int ClassSpec::class_for(const std::string& object, double yaw) const {
  const double y = normalize_yaw(yaw);
  for (int c = 0; c < size(); ++c) {
    const auto& info = classes[c];
    if (info.object != object || !info.constants) continue;
    const double t0 = info.constants->theta0;
    if (y >= t0 - kPi / 4 && y < t0 + kPi / 4) return c;
  }
  return -1;
}

namespace {

ClassSpec with_orientation_bins(
    const std::vector<std::pair<std::string, std::array<double, 3>>>& objects) {
  ClassSpec spec;
  spec.classes.push_back({"Background", "", std::nullopt});
  for (const auto& [name, size] : objects) {
    spec.classes.push_back({name + "_side", name, BoxConstants{size[0], size[1], size[2], 0.0, kPi / 2}});
    spec.classes.push_back(
        {name + "_front", name, BoxConstants{size[0], size[1], size[2], kPi / 2, kPi / 2}});
  }
  spec.classes.push_back({"DoNotCare", "DoNotCare", std::nullopt});
  return spec;
}

}  // namespace

ClassSpec ClassSpec::car() { return with_orientation_bins({{"Car", {3.88, 1.5, 1.63}}}); }

ClassSpec ClassSpec::pedestrian_cyclist() {
  return with_orientation_bins({{"Pedestrian", {0.88, 1.77, 0.65}}, {"Cyclist", {1.76, 1.75, 0.6}}});
}

bool is_dont_care_name(const std::string& object) {
  return object == "DoNotCare" || object == "DontCare";
}

std::vector<VertexLabel> assign_vertex_labels(const PointCloud& vertices,
                                              const std::vector<LabeledBox>& gt,
                                              const ClassSpec& spec) {
  // Resolve each box to a prediction class once; -1 means "ignore".
  std::vector<int> box_class(gt.size(), -1);
  for (std::size_t b = 0; b < gt.size(); ++b) {
    box_class[b] = is_dont_care_name(gt[b].cls) ? spec.dont_care()
                                                 : spec.class_for(gt[b].cls, gt[b].box.yaw);
  }

  std::vector<VertexLabel> labels(vertices.size());
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const Vec3& x = vertices[v].position;
    int winner = -1;
    for (std::size_t b = 0; b < gt.size(); ++b) {
      if (box_class[b] < 0 || !point_in_box(x, gt[b].box)) continue;
      if (winner < 0 || gt[b].box.volume() < gt[winner].box.volume()) winner = static_cast<int>(b);
    }
    if (winner < 0) continue;
    VertexLabel& label = labels[v];
    label.cls = box_class[winner];
    label.box_id = winner;
    if (spec.is_localized(label.cls)) {
      label.target = encode_box(gt[winner].box, x, *spec.classes[label.cls].constants);
    }
  }
  return labels;
}

std::vector<LabeledBox> parse_boxes_text(std::istream& in) {
  std::vector<LabeledBox> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    LabeledBox b;
    if (!(ss >> b.cls >> b.box.center.x() >> b.box.center.y() >> b.box.center.z() >> b.box.l >>
          b.box.h >> b.box.w >> b.box.yaw)) {
      throw FormatError("boxes text: malformed line " + std::to_string(lineno));
    }
    double score;
    if (ss >> score) b.score = score;
    if (!(b.box.l > 0 && b.box.h > 0 && b.box.w > 0)) {
      throw FormatError("boxes text: non-positive size on line " + std::to_string(lineno));
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<LabeledBox> read_boxes_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_boxes_text(in);
}

void write_boxes_text(std::ostream& out, const std::vector<LabeledBox>& boxes) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& b : boxes) {
    out << b.cls << ' ' << b.box.center.x() << ' ' << b.box.center.y() << ' ' << b.box.center.z()
        << ' ' << b.box.l << ' ' << b.box.h << ' ' << b.box.w << ' ' << b.box.yaw;
    if (b.score) out << ' ' << *b.score;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pgnn
