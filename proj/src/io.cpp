#include "mht3d/io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace mht {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kCkptMagic[8] = {'M', 'H', 'T', 'C', 'K', 'P', 'T', '\x01'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

ordered_json box_to_json(const BoxState& b) {
  return ordered_json::array({b.x, b.y, b.z, b.length, b.width, b.height, b.heading});
}

BoxState box_from_json(const ordered_json& j, int timestamp, double score) {
  if (!j.is_array() || j.size() != 7) throw std::runtime_error("scene file: bad box array");
  return make_box(j[0], j[1], j[2], j[3], j[4], j[5], j[6], timestamp, score);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<double>>>>
load_checkpoint_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  const std::uint32_t count = read_u32(in);
  std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<double>>>> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t ndim = read_u32(in);
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::uint32_t dim = read_u32(in);
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    std::vector<double> data(numel);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
    out.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(data)));
  }
  return out;
}

void load_checkpoint_into(const std::string& path, ParamStore& store, bool allow_extra) {
  const auto entries = load_checkpoint_raw(path);
  std::size_t applied = 0;
  for (const auto& [name, payload] : entries) {
    if (!store.has(name)) {
      if (allow_extra) continue;
      throw std::runtime_error("checkpoint: unexpected parameter " + name);
    }
    Tensor t = store.get(name);
    if (t.shape() != payload.first)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    std::copy(payload.second.begin(), payload.second.end(), t.data());
    ++applied;
  }
  if (applied == 0) throw std::runtime_error("checkpoint: no matching parameters in " + path);
}

std::uint64_t params_hash(const std::vector<std::pair<std::string, Tensor>>& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : params) {
    mix(name.data(), name.size());
    for (int d : t.shape()) mix(&d, sizeof(d));
    mix(t.data(), t.numel() * sizeof(double));
  }
  return h;
}

// ---- scene files ------------------------------------------------------------------

void write_scene_jsonl(const std::string& path, const Scene& scene) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("scene file: cannot open for writing: " + path);

  ordered_json header;
  header["type"] = "scene_header";
  header["version"] = 1;
  header["seed"] = scene.spec.seed;
  header["frames"] = scene.spec.frames;
  header["dt"] = scene.spec.dt;
  header["bound"] = scene.spec.bound;
  header["counts"] = scene.spec.counts;
  header["motion_mix"] = {scene.spec.p_const_velocity, scene.spec.p_const_turn,
                          scene.spec.p_stop_go};
  out << header.dump() << "\n";

  for (int f = 0; f < scene.frames(); ++f) {
    for (const GtBox& g : scene.gt[static_cast<std::size_t>(f)]) {
      ordered_json j;
      j["type"] = "gt_box";
      j["frame"] = f;
      j["id"] = g.object_id;
      j["cls"] = class_name(g.cls);
      j["box"] = box_to_json(g.box);
      j["n_points"] = g.n_points;
      out << j.dump() << "\n";
    }
    for (const Detection& d : scene.detections[static_cast<std::size_t>(f)]) {
      ordered_json j;
      j["type"] = "detection";
      j["frame"] = f;
      j["det"] = d.det_id;
      j["cls"] = class_name(d.cls);
      j["score"] = d.box.score;
      j["box"] = box_to_json(d.box);
      out << j.dump() << "\n";
    }
    const PointCloud& cloud = scene.clouds[static_cast<std::size_t>(f)];
    ordered_json j;
    j["type"] = "points";
    j["frame"] = f;
    std::vector<double> flat;
    flat.reserve(cloud.pts.size() * 3);
    for (const Vec3& p : cloud.pts) {
      flat.push_back(p.x);
      flat.push_back(p.y);
      flat.push_back(p.z);
    }
    j["pts"] = flat;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("scene file: write failed: " + path);
}

Scene read_scene_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene file: cannot open: " + path);

  Scene scene;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json j = ordered_json::parse(line);
    const std::string type = j.at("type");
    if (type == "scene_header") {
      scene.spec.seed = j.at("seed");
      scene.spec.frames = j.at("frames");
      scene.spec.dt = j.at("dt");
      scene.spec.bound = j.at("bound");
      for (int c = 0; c < 3; ++c) scene.spec.counts[static_cast<std::size_t>(c)] = j.at("counts")[c];
      scene.spec.p_const_velocity = j.at("motion_mix")[0];
      scene.spec.p_const_turn = j.at("motion_mix")[1];
      scene.spec.p_stop_go = j.at("motion_mix")[2];
      scene.gt.assign(static_cast<std::size_t>(scene.spec.frames), {});
      scene.detections.assign(static_cast<std::size_t>(scene.spec.frames), {});
      scene.clouds.assign(static_cast<std::size_t>(scene.spec.frames), {});
      have_header = true;
      continue;
    }
    if (!have_header) throw std::runtime_error("scene file: missing header: " + path);
    const int f = j.at("frame");
    if (f < 0 || f >= scene.spec.frames)
      throw std::runtime_error("scene file: frame out of range: " + path);
    if (type == "gt_box") {
      GtBox g;
      g.object_id = j.at("id");
      g.cls = class_from_name(j.at("cls"));
      g.box = box_from_json(j.at("box"), f, 1.0);
      g.n_points = j.at("n_points");
      scene.gt[static_cast<std::size_t>(f)].push_back(g);
    } else if (type == "detection") {
      Detection d;
      d.det_id = j.at("det");
      d.cls = class_from_name(j.at("cls"));
      d.box = box_from_json(j.at("box"), f, j.at("score"));
      scene.detections[static_cast<std::size_t>(f)].push_back(d);
    } else if (type == "points") {
      const auto& flat = j.at("pts");
      if (flat.size() % 3 != 0) throw std::runtime_error("scene file: bad points array");
      PointCloud& cloud = scene.clouds[static_cast<std::size_t>(f)];
      for (std::size_t i = 0; i < flat.size(); i += 3)
        cloud.pts.push_back({flat[i], flat[i + 1], flat[i + 2]});
    } else {
      throw std::runtime_error("scene file: unknown record type " + type);
    }
  }
  if (!have_header) throw std::runtime_error("scene file: empty file: " + path);
  return scene;
}

// ---- track output -------------------------------------------------------------------

void write_tracks_jsonl(const std::string& path, const TrackOutput& output) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("tracks file: cannot open for writing: " + path);

  ordered_json header;
  header["type"] = "tracks_header";
  header["version"] = 1;
  header["frames"] = output.frames.size();
  out << header.dump() << "\n";

  auto dump_record = [&out](int frame, const TrackRecord& rec, bool born) {
    ordered_json j;
    j["type"] = "track";
    j["frame"] = frame;
    j["track"] = rec.id;
    j["cls"] = class_name(rec.cls);
    j["score"] = rec.score;
    j["prov"] = provenance_name(rec.provenance);
    j["lag"] = rec.pred_lag;
    j["born"] = born;
    j["box"] = box_to_json(rec.box);
    out << j.dump() << "\n";
  };

  for (const FrameResult& r : output.frames) {
    for (const TrackRecord& rec : r.surviving) dump_record(r.t, rec, false);
    for (const TrackRecord& rec : r.new_born) dump_record(r.t, rec, true);
    for (int id : r.killed) {
      ordered_json j;
      j["type"] = "kill";
      j["frame"] = r.t;
      j["track"] = id;
      out << j.dump() << "\n";
    }
  }
  if (!out) throw std::runtime_error("tracks file: write failed: " + path);
}

TrackOutput read_tracks_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("tracks file: cannot open: " + path);

  TrackOutput output;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json j = ordered_json::parse(line);
    const std::string type = j.at("type");
    if (type == "tracks_header") {
      const std::size_t frames = j.at("frames");
      output.frames.resize(frames);
      for (std::size_t f = 0; f < frames; ++f) output.frames[f].t = static_cast<int>(f);
      have_header = true;
      continue;
    }
    if (!have_header) throw std::runtime_error("tracks file: missing header: " + path);
    const int f = j.at("frame");
    if (f < 0 || f >= static_cast<int>(output.frames.size()))
      throw std::runtime_error("tracks file: frame out of range");
    if (type == "track") {
      TrackRecord rec;
      rec.id = j.at("track");
      rec.cls = class_from_name(j.at("cls"));
      rec.score = j.at("score");
      rec.box = box_from_json(j.at("box"), f, j.at("score"));
      rec.pred_lag = j.at("lag");
      const std::string prov = j.at("prov");
      rec.provenance = prov == "detected" ? Provenance::kDetected
                       : prov == "predicted" ? Provenance::kPredicted
                                             : Provenance::kZeroPad;
      if (j.at("born").get<bool>())
        output.frames[static_cast<std::size_t>(f)].new_born.push_back(rec);
      else
        output.frames[static_cast<std::size_t>(f)].surviving.push_back(rec);
    } else if (type == "kill") {
      output.frames[static_cast<std::size_t>(f)].killed.push_back(j.at("track"));
    } else {
      throw std::runtime_error("tracks file: unknown record type " + type);
    }
  }
  if (!have_header) throw std::runtime_error("tracks file: empty file: " + path);
  return output;
}

void write_eval_report(const std::string& path, const std::map<ObjectClass, MotTally>& per_class,
                       const EvalConfig& cfg, const std::string& label) {
  ordered_json j;
  j["version"] = 1;
  j["label"] = label;
  ordered_json jc;
  jc["dist_gate"] = cfg.dist_gate;
  jc["use_iou_gate"] = cfg.use_iou_gate;
  jc["iou_gate"] = cfg.iou_gate;
  jc["min_points"] = cfg.min_points;
  j["config"] = jc;

  MotTally all;
  ordered_json classes;
  for (const auto& [cls, tally] : per_class) {
    ordered_json t;
    t["gt"] = tally.gt;
    t["fp"] = tally.fp;
    t["miss"] = tally.miss;
    t["ids"] = tally.ids;
    t["matches"] = tally.matches;
    t["mota"] = tally.mota();
    t["fp_rate"] = tally.fp_rate();
    t["miss_rate"] = tally.miss_rate();
    t["ids_rate"] = tally.ids_rate();
    classes[class_name(cls)] = t;
    all += tally;
  }
  j["per_class"] = classes;
  ordered_json ja;
  ja["gt"] = all.gt;
  ja["fp"] = all.fp;
  ja["miss"] = all.miss;
  ja["ids"] = all.ids;
  ja["mota"] = all.mota();
  j["all"] = ja;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("eval report: cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace mht
