#pragma once

#include <algorithm>
#include <numbers>
#include <vector>

#include "pointgnn/boxes.hpp"

namespace pgnn::test {

inline Box3D detail_make_box(Vec3 c, double l, double h, double w, double yaw) {
  Box3D b;
  b.center = c;
  b.l = l;
  b.h = h;
  b.w = w;
  b.yaw = yaw;
  return b;
}

// Written directly from the textbook description of the loop: pick the best
// remaining box, gather everything overlapping it, replace the group by its
// per-component median and rescore it.
struct OracleOut {
  std::vector<Box3D> boxes;
  std::vector<double> scores;
};

inline double med(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

inline double fold_yaw(double y) {
  while (y >= 3 * std::numbers::pi / 4) y -= std::numbers::pi;
  while (y < -std::numbers::pi / 4) y += std::numbers::pi;
  return y;
}

inline OracleOut transliteration(std::vector<Box3D> B, std::vector<double> D, const PointCloud& X, double th) {
  OracleOut out;
  while (!B.empty()) {
    std::size_t i = 0;
    for (std::size_t k = 1; k < B.size(); ++k) {
      if (D[k] > D[i]) i = k;
    }
    std::vector<Box3D> L;
    std::vector<double> LD;
    std::vector<Box3D> restB;
    std::vector<double> restD;
    for (std::size_t k = 0; k < B.size(); ++k) {
      if (k == i || bev_iou(B[i], B[k]) > th) {
        L.push_back(B[k]);
        LD.push_back(D[k]);
      } else {
        restB.push_back(B[k]);
        restD.push_back(D[k]);
      }
    }
    Box3D m = L[0];
    if (L.size() > 1) {
      std::vector<double> xs, ys, zs, ls, hs, ws, yaws;
      for (const auto& b : L) {
        xs.push_back(b.center.x());
        ys.push_back(b.center.y());
        zs.push_back(b.center.z());
        ls.push_back(b.l);
        hs.push_back(b.h);
        ws.push_back(b.w);
        yaws.push_back(fold_yaw(b.yaw));
      }
      m = detail_make_box({med(xs), med(ys), med(zs)}, med(ls), med(hs), med(ws), med(yaws));
    }
    const double o = occlusion_factor(m, X);
    double z = 0;
    for (std::size_t k = 0; k < L.size(); ++k) z += (o + 1) * bev_iou(m, L[k]) * LD[k];
    out.boxes.push_back(m);
    out.scores.push_back(z);
    B = std::move(restB);
    D = std::move(restD);
  }
  return out;
}

}  // namespace pgnn::test
