#include "mht3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mht {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return "vehicle";
    case ObjectClass::kPedestrian: return "pedestrian";
    case ObjectClass::kCyclist: return "cyclist";
  }
  return "unknown";
}

ObjectClass class_from_name(const std::string& name) {
  if (name == "vehicle") return ObjectClass::kVehicle;
  if (name == "pedestrian") return ObjectClass::kPedestrian;
  if (name == "cyclist") return ObjectClass::kCyclist;
  throw std::invalid_argument("unknown class name: " + name);
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  else if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

BoxState make_box(double x, double y, double z, double l, double w, double h, double heading,
                  int timestamp, double score) {
  BoxState b;
  b.x = x;
  b.y = y;
  b.z = z;
  b.length = l;
  b.width = w;
  b.height = h;
  b.heading = wrap_angle(heading);
  b.timestamp = timestamp;
  b.score = score;
  return b;
}

namespace {

// Rotated half-size offset of corner k, independent of the box center.
Vec3 corner_offset(const BoxState& b, int k) {
  const double sx = (k & 1) ? 0.5 : -0.5;
  const double sy = (k & 2) ? 0.5 : -0.5;
  const double sz = (k & 4) ? 0.5 : -0.5;
  const double lx = sx * b.length, ly = sy * b.width, lz = sz * b.height;
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  return {c * lx - s * ly, s * lx + c * ly, lz};
}

}  // namespace

RepresentativePoints box_corners(const BoxState& b) {
  if (b.is_sentinel()) throw std::invalid_argument("box_corners: sentinel box");
  RepresentativePoints rp;
  for (int k = 0; k < 8; ++k) {
    const Vec3 off = corner_offset(b, k);
    rp.pts[static_cast<std::size_t>(k)] = {b.x + off.x, b.y + off.y, b.z + off.z};
  }
  rp.pts[8] = b.center();
  return rp;
}

double bev_center_dist(const BoxState& a, const BoxState& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

namespace {

struct P2 {
  double x, y;
};

// Counter-clockwise ground-plane rectangle.
std::array<P2, 4> bev_rect(const BoxState& b) {
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  const double hl = 0.5 * b.length, hw = 0.5 * b.width;
  const std::array<std::array<double, 2>, 4> local = {{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<P2, 4> out;
  for (int i = 0; i < 4; ++i)
    out[static_cast<std::size_t>(i)] = {b.x + c * local[i][0] - s * local[i][1],
                                        b.y + s * local[i][0] + c * local[i][1]};
  return out;
}

double shoelace_area(const std::vector<P2>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const P2& p = poly[i];
    const P2& q = poly[(i + 1) % n];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * acc;
}

double cross_side(const P2& e1, const P2& e2, const P2& p) {
  return (e2.x - e1.x) * (p.y - e1.y) - (e2.y - e1.y) * (p.x - e1.x);
}

// Sutherland-Hodgman: clip `subject` by the left half-plane of edge e1->e2.
std::vector<P2> clip_edge(const std::vector<P2>& subject, const P2& e1, const P2& e2) {
  std::vector<P2> out;
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const P2& cur = subject[i];
    const P2& prev = subject[(i + n - 1) % n];
    const double side_cur = cross_side(e1, e2, cur);
    const double side_prev = cross_side(e1, e2, prev);
    const bool in_cur = side_cur >= 0.0;
    const bool in_prev = side_prev >= 0.0;
    if (in_cur) {
      if (!in_prev) {
        const double t = side_prev / (side_prev - side_cur);
        out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      out.push_back(cur);
    } else if (in_prev) {
      const double t = side_prev / (side_prev - side_cur);
      out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
  }
  return out;
}

}  // namespace

double bev_iou(const BoxState& a, const BoxState& b) {
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;

  const std::array<P2, 4> ra = bev_rect(a);
  const std::array<P2, 4> rb = bev_rect(b);
  std::vector<P2> poly(ra.begin(), ra.end());
  for (int e = 0; e < 4 && !poly.empty(); ++e)
    poly = clip_edge(poly, rb[static_cast<std::size_t>(e)], rb[static_cast<std::size_t>((e + 1) % 4)]);

  const double inter = std::max(0.0, shoelace_area(poly));
  if (inter <= 0.0) return 0.0;
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_dilated_box(const Vec3& p, const BoxState& b, double margin) {
  const double dx = p.x - b.x, dy = p.y - b.y, dz = p.z - b.z;
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::fabs(lx) <= 0.5 * b.length + margin && std::fabs(ly) <= 0.5 * b.width + margin &&
         std::fabs(dz) <= 0.5 * b.height + margin;
}

SampledPoints crop_and_sample_points(std::span<const TimedPoint> cloud, const BoxState& b,
                                     int y_count, std::uint64_t seed, double margin) {
  if (y_count < 1) throw std::invalid_argument("crop_and_sample_points: y_count must be >= 1");
  SampledPoints out;
  out.pts.reserve(static_cast<std::size_t>(y_count));

  std::vector<int> inside;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (point_in_dilated_box(cloud[i].p, b, margin)) inside.push_back(static_cast<int>(i));

  if (inside.empty()) {
    out.empty_crop = true;
    for (int i = 0; i < y_count; ++i) out.pts.push_back({b.center(), 0.0});
    return out;
  }

  Rng rng(seed);
  const int n = static_cast<int>(inside.size());
  if (n >= y_count) {
    // partial Fisher-Yates: the shuffled prefix is the sample
    for (int i = 0; i < y_count; ++i) {
      const int j = i + rng.uniform_int(n - i);
      std::swap(inside[static_cast<std::size_t>(i)], inside[static_cast<std::size_t>(j)]);
      out.pts.push_back(cloud[static_cast<std::size_t>(inside[static_cast<std::size_t>(i)])]);
    }
  } else {
    for (int i = 0; i < y_count; ++i)
      out.pts.push_back(cloud[static_cast<std::size_t>(inside[static_cast<std::size_t>(rng.uniform_int(n))])]);
  }
  return out;
}

Tensor relative_point_encoding(const SampledPoints& points, const BoxState& b) {
  const int y = static_cast<int>(points.pts.size());
  Tensor out = Tensor::zeros({y, 28});
  const double c = std::cos(b.heading), s = std::sin(b.heading);

  for (int i = 0; i < y; ++i) {
    const TimedPoint& tp = points.pts[static_cast<std::size_t>(i)];
    // center difference first (exact under joint translation), then rotated
    // into the box's local frame so the encoding is heading-canonical
    const double dx = tp.p.x - b.x, dy = tp.p.y - b.y, dz = tp.p.z - b.z;
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    double* row = out.data() + static_cast<std::size_t>(i) * 28;
    for (int k = 0; k < 8; ++k) {
      const double ox = ((k & 1) ? 0.5 : -0.5) * b.length;
      const double oy = ((k & 2) ? 0.5 : -0.5) * b.width;
      const double oz = ((k & 4) ? 0.5 : -0.5) * b.height;
      row[k * 3 + 0] = lx - ox;
      row[k * 3 + 1] = ly - oy;
      row[k * 3 + 2] = dz - oz;
    }
    row[24] = lx;
    row[25] = ly;
    row[26] = dz;
    row[27] = tp.time_offset;
  }
  return out;
}

}  // namespace mht
