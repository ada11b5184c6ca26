#include "mht3d/sim.hpp"

#include <cmath>
#include <stdexcept>

namespace mht {

namespace {

constexpr double kPi = 3.14159265358979323846;

enum class MotionModel { kConstVelocity, kConstTurn, kStopGo };

struct SimObject {
  int id;
  ObjectClass cls;
  MotionModel model;
  double x, y, l, w, h, heading, speed, turn_rate;
  int move_frames, stop_frames;  // stop-and-go phase lengths
};

struct ClassParams {
  double base_l, base_w, base_h;
  double min_speed, max_speed;
};

const ClassParams kClassParams[3] = {
    {4.7, 2.05, 1.7, 3.0, 12.0},   // vehicle
    {0.9, 0.85, 1.75, 0.5, 1.5},   // pedestrian
    {1.8, 0.7, 1.7, 2.0, 6.0},     // cyclist
};

double object_z(const SimObject& o) { return 0.5 * o.h; }

void advance(SimObject& o, int frame_index, double dt) {
  switch (o.model) {
    case MotionModel::kConstVelocity:
      o.x += o.speed * dt * std::cos(o.heading);
      o.y += o.speed * dt * std::sin(o.heading);
      break;
    case MotionModel::kConstTurn:
      o.heading = o.heading + o.turn_rate * dt;
      o.x += o.speed * dt * std::cos(o.heading);
      o.y += o.speed * dt * std::sin(o.heading);
      break;
    case MotionModel::kStopGo: {
      const int cycle = o.move_frames + o.stop_frames;
      if (frame_index % cycle < o.move_frames) {
        o.x += o.speed * dt * std::cos(o.heading);
        o.y += o.speed * dt * std::sin(o.heading);
      }
      break;
    }
  }
}

bool path_in_bounds(const SimObject& o, int frames, double dt, double bound) {
  SimObject s = o;
  const double margin = 2.0;
  for (int k = 0; k < frames; ++k) {
    if (std::fabs(s.x) > bound - margin || std::fabs(s.y) > bound - margin) return false;
    advance(s, k, dt);
  }
  return std::fabs(s.x) <= bound - margin && std::fabs(s.y) <= bound - margin;
}

}  // namespace

DetectionNoise DetectionNoise::noiseless() {
  DetectionNoise n;
  n.fixed_true_score = 0.95;
  return n;
}

DetectionNoise DetectionNoise::centerpoint_like() {
  DetectionNoise n;
  n.drop_prob = {0.15, 0.15, 0.15};
  n.sigma_center = 0.15;
  n.sigma_heading = 0.05;
  n.sigma_size_rel = 0.03;
  n.fp_rate = 2.0;
  n.score_alpha_true = 8.0;
  n.score_beta_true = 2.0;
  return n;
}

Scene generate_scene(const SceneSpec& spec) {
  if (spec.frames < 16)
    throw std::invalid_argument("generate_scene: duration must cover history + future (>= 16)");
  if (spec.bound <= 0.0) throw std::invalid_argument("generate_scene: bounds must be positive");

  Rng rng(spec.seed);
  Scene scene;
  scene.spec = spec;

  const double p_sum = spec.p_const_velocity + spec.p_const_turn + spec.p_stop_go;
  if (p_sum <= 0.0) throw std::invalid_argument("generate_scene: motion mix must be positive");

  std::vector<SimObject> objects;
  int next_id = 0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < spec.counts[static_cast<std::size_t>(c)]; ++i) {
      const ClassParams& cp = kClassParams[c];
      SimObject o;
      o.id = next_id++;
      o.cls = static_cast<ObjectClass>(c);

      bool placed = false;
      for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
        const double u = rng.uniform() * p_sum;
        o.model = u < spec.p_const_velocity
                      ? MotionModel::kConstVelocity
                      : (u < spec.p_const_velocity + spec.p_const_turn ? MotionModel::kConstTurn
                                                                       : MotionModel::kStopGo);
        o.x = rng.uniform(-spec.bound + 5.0, spec.bound - 5.0);
        o.y = rng.uniform(-spec.bound + 5.0, spec.bound - 5.0);
        o.heading = wrap_angle(rng.uniform(-kPi, kPi));
        o.l = cp.base_l * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
        o.w = cp.base_w * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
        o.h = cp.base_h * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
        // speed shrinks with failed attempts so long scenes stay placeable
        const double shrink = 1.0 / (1.0 + attempt / 20);
        o.speed = rng.uniform(cp.min_speed, cp.min_speed + (cp.max_speed - cp.min_speed) * shrink);
        o.turn_rate = rng.uniform(-0.4, 0.4);
        o.move_frames = 5 + rng.uniform_int(15);
        o.stop_frames = 5 + rng.uniform_int(15);

        if (!path_in_bounds(o, spec.frames, spec.dt, spec.bound)) continue;
        bool clear = true;
        for (const SimObject& other : objects)
          if (std::hypot(o.x - other.x, o.y - other.y) < 4.0) {
            clear = false;
            break;
          }
        placed = clear;
      }
      if (!placed)
        throw std::runtime_error("generate_scene: could not place all objects in bounds");
      objects.push_back(o);
    }
  }

  scene.gt.assign(static_cast<std::size_t>(spec.frames), {});
  std::vector<SimObject> state = objects;
  for (int f = 0; f < spec.frames; ++f) {
    for (std::size_t i = 0; i < state.size(); ++i) {
      GtBox g;
      g.object_id = state[i].id;
      g.cls = state[i].cls;
      g.box = make_box(state[i].x, state[i].y, object_z(state[i]), state[i].l, state[i].w,
                       state[i].h, state[i].heading, f, 1.0);
      scene.gt[static_cast<std::size_t>(f)].push_back(g);
    }
    for (SimObject& s : state) advance(s, f, spec.dt);
  }
  scene.detections.assign(static_cast<std::size_t>(spec.frames), {});
  scene.clouds.assign(static_cast<std::size_t>(spec.frames), {});
  return scene;
}

void simulate_detections(Scene& scene, const DetectionNoise& noise, std::uint64_t seed) {
  Rng rng(seed);
  scene.detections.assign(static_cast<std::size_t>(scene.frames()), {});
  for (int f = 0; f < scene.frames(); ++f) {
    auto& dets = scene.detections[static_cast<std::size_t>(f)];
    int next_det = 0;
    for (const GtBox& g : scene.gt[static_cast<std::size_t>(f)]) {
      if (rng.uniform() < noise.drop_prob[static_cast<std::size_t>(static_cast<int>(g.cls))])
        continue;
      Detection d;
      d.det_id = next_det++;
      d.cls = g.cls;
      BoxState b = g.box;
      b.x += rng.normal(0.0, noise.sigma_center);
      b.y += rng.normal(0.0, noise.sigma_center);
      b.z += rng.normal(0.0, noise.sigma_center);
      b.heading = wrap_angle(b.heading + rng.normal(0.0, noise.sigma_heading));
      b.length = std::max(0.1, b.length * (1.0 + rng.normal(0.0, noise.sigma_size_rel)));
      b.width = std::max(0.1, b.width * (1.0 + rng.normal(0.0, noise.sigma_size_rel)));
      b.height = std::max(0.1, b.height * (1.0 + rng.normal(0.0, noise.sigma_size_rel)));
      b.score = noise.fixed_true_score >= 0.0
                    ? noise.fixed_true_score
                    : rng.beta(noise.score_alpha_true, noise.score_beta_true);
      b.timestamp = f;
      d.box = b;
      dets.push_back(d);
    }
    const int n_fp = rng.poisson(noise.fp_rate);
    for (int i = 0; i < n_fp; ++i) {
      Detection d;
      d.det_id = next_det++;
      d.cls = static_cast<ObjectClass>(rng.uniform_int(3));
      const ClassParams& cp = kClassParams[static_cast<int>(d.cls)];
      const double l = cp.base_l * (1.0 + 0.2 * rng.uniform(-1.0, 1.0));
      const double w = cp.base_w * (1.0 + 0.2 * rng.uniform(-1.0, 1.0));
      const double h = cp.base_h * (1.0 + 0.2 * rng.uniform(-1.0, 1.0));
      d.box = make_box(rng.uniform(-scene.spec.bound, scene.spec.bound),
                       rng.uniform(-scene.spec.bound, scene.spec.bound), 0.5 * h, l, w, h,
                       wrap_angle(rng.uniform(-kPi, kPi)), f,
                       rng.beta(noise.score_alpha_fp, noise.score_beta_fp));
      dets.push_back(d);
    }
  }
}

PointCloud sample_points_frame(const Scene& scene, int frame, const PointSimConfig& cfg,
                               std::uint64_t seed) {
  if (frame < 0 || frame >= scene.frames())
    throw std::invalid_argument("sample_points_frame: frame out of range");
  Rng rng(seed);
  PointCloud cloud;
  for (const GtBox& g : scene.gt[static_cast<std::size_t>(frame)]) {
    const double r = std::max(cfg.ref_range, std::hypot(g.box.x, g.box.y));
    const int base = cfg.base_points[static_cast<std::size_t>(static_cast<int>(g.cls))];
    const int n = std::max(cfg.min_points,
                           static_cast<int>(std::lround(base * std::pow(cfg.ref_range / r, cfg.decay))));
    const double c = std::cos(g.box.heading), s = std::sin(g.box.heading);
    const double hl = 0.5 * g.box.length, hw = 0.5 * g.box.width, hh = 0.5 * g.box.height;
    // face areas: +-x (w*h), +-y (l*h), top (l*w); bottom unseen
    const double a_x = g.box.width * g.box.height;
    const double a_y = g.box.length * g.box.height;
    const double a_top = g.box.length * g.box.width;
    const double total = 2.0 * a_x + 2.0 * a_y + a_top;
    for (int i = 0; i < n; ++i) {
      const double pick = rng.uniform() * total;
      double lx, ly, lz;
      if (pick < 2.0 * a_x) {
        lx = pick < a_x ? hl : -hl;
        ly = rng.uniform(-hw, hw);
        lz = rng.uniform(-hh, hh);
      } else if (pick < 2.0 * a_x + 2.0 * a_y) {
        ly = pick < 2.0 * a_x + a_y ? hw : -hw;
        lx = rng.uniform(-hl, hl);
        lz = rng.uniform(-hh, hh);
      } else {
        lz = hh;
        lx = rng.uniform(-hl, hl);
        ly = rng.uniform(-hw, hw);
      }
      cloud.pts.push_back({g.box.x + c * lx - s * ly, g.box.y + s * lx + c * ly, g.box.z + lz});
    }
  }
  const int n_clutter = rng.poisson(cfg.clutter_per_frame);
  for (int i = 0; i < n_clutter; ++i)
    cloud.pts.push_back({rng.uniform(-scene.spec.bound, scene.spec.bound),
                         rng.uniform(-scene.spec.bound, scene.spec.bound),
                         rng.uniform(0.0, 2.5)});
  return cloud;
}

void sample_points(Scene& scene, const PointSimConfig& cfg, std::uint64_t seed) {
  Rng base(seed);
  scene.clouds.assign(static_cast<std::size_t>(scene.frames()), {});
  for (int f = 0; f < scene.frames(); ++f) {
    scene.clouds[static_cast<std::size_t>(f)] =
        sample_points_frame(scene, f, cfg, base.fork(static_cast<std::uint64_t>(f)).next_u64());
    // record per-object counts for the optional >=N-points evaluation filter
    for (GtBox& g : scene.gt[static_cast<std::size_t>(f)]) {
      int count = 0;
      for (const Vec3& p : scene.clouds[static_cast<std::size_t>(f)].pts)
        if (point_in_dilated_box(p, g.box, 0.1)) ++count;
      g.n_points = count;
    }
  }
}

Scene make_scene(const SceneSpec& spec, const DetectionNoise& noise, const PointSimConfig& points) {
  Scene scene = generate_scene(spec);
  Rng base(spec.seed);
  simulate_detections(scene, noise, base.fork(101).next_u64());
  sample_points(scene, points, base.fork(202).next_u64());
  return scene;
}

}  // namespace mht
