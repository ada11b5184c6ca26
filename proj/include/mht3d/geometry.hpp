#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mht3d/rng.hpp"
#include "mht3d/tensor.hpp"

namespace mht {

enum class ObjectClass : int { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };
constexpr int kNumClasses = 3;

const char* class_name(ObjectClass c);
ObjectClass class_from_name(const std::string& name);

// Wraps to (-pi, pi].
double wrap_angle(double a);

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// One 3D bounding box: the atom of trajectories, detections and hypotheses.
// The all-zero box is the padding sentinel standing in for a missing
// candidate or missing history frame.
struct BoxState {
  double x = 0.0, y = 0.0, z = 0.0;                      // center, meters
  double length = 0.0, width = 0.0, height = 0.0;        // meters
  double heading = 0.0;                                  // yaw, (-pi, pi]
  int timestamp = 0;                                     // frame index
  double score = 0.0;

  bool is_sentinel() const { return length == 0.0 && width == 0.0 && height == 0.0; }
  Vec3 center() const { return {x, y, z}; }
};

BoxState make_box(double x, double y, double z, double l, double w, double h, double heading,
                  int timestamp = 0, double score = 0.0);

// 8 corners + center. Corner k has sign pattern (bit0 -> +length/2,
// bit1 -> +width/2, bit2 -> +height/2), rotated by the heading about the
// vertical axis; index 8 is the center.
struct RepresentativePoints {
  std::array<Vec3, 9> pts;
};

RepresentativePoints box_corners(const BoxState& b);

double bev_center_dist(const BoxState& a, const BoxState& b);

// Rotated-rectangle IoU in the ground plane (Sutherland-Hodgman clipping +
// shoelace area). Degenerate rectangles give 0.
double bev_iou(const BoxState& a, const BoxState& b);

// Margin-dilated oriented box membership test.
bool point_in_dilated_box(const Vec3& p, const BoxState& b, double margin = 0.1);

struct TimedPoint {
  Vec3 p;
  double time_offset = 0.0;  // frames relative to the current frame, <= 0
};

struct SampledPoints {
  std::vector<TimedPoint> pts;  // exactly y_count entries
  bool empty_crop = false;      // no cloud point fell inside the dilated box
};

// Keeps cloud points inside the dilated box; samples without replacement when
// enough points exist, with replacement otherwise. An empty crop yields
// y_count copies of the box center with the empty flag set.
SampledPoints crop_and_sample_points(std::span<const TimedPoint> cloud, const BoxState& b,
                                     int y_count, std::uint64_t seed, double margin = 0.1);

// Per point: differences against the 9 representative points (27 values,
// corner order as in box_corners, center last) plus the time offset -> 28
// columns, expressed in the box's local frame so the encoding is
// heading-canonical. Differences are formed from (point - center) first, so
// a rigid translation applied to both the point and the box cancels exactly.
Tensor relative_point_encoding(const SampledPoints& points, const BoxState& b);

}  // namespace mht
