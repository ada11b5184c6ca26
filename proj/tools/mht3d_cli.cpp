// Command-line front end: scene simulation, two-stage training, tracking,
// CLEAR-MOT evaluation, gradient checking and ablation table export.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mht3d/eval.hpp"
#include "mht3d/gradsuite.hpp"
#include "mht3d/io.hpp"
#include "mht3d/sim.hpp"
#include "mht3d/tracker.hpp"
#include "mht3d/train.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace mht;

namespace {

// Relative output paths land under MHT3D_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("MHT3D_OUT_ROOT");
  if (!root || !*root) return path;
  return (fs::path(root) / path).string();
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  ordered_json j;
  in >> j;
  return j;
}

std::vector<std::string> scene_files_in(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::exists(dir)) throw std::runtime_error("scene directory missing: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 6 && name.rfind("scene_", 0) == 0 &&
        name.substr(name.size() - 6) == ".jsonl")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no scene_*.jsonl files in " + dir);
  return files;
}

std::vector<Scene> load_scenes(const std::string& dir) {
  std::vector<Scene> scenes;
  for (const std::string& f : scene_files_in(dir)) scenes.push_back(read_scene_jsonl(f));
  return scenes;
}

// ---- model architecture sidecar --------------------------------------------------

ordered_json model_config_to_json(const ModelConfig& mc) {
  ordered_json j;
  j["init_seed"] = mc.init_seed;
  j["motion"] = {{"t_h", mc.motion.t_h},
                 {"t_f", mc.motion.t_f},
                 {"d", mc.motion.d},
                 {"enc_hidden", mc.motion.enc_hidden},
                 {"head_hidden", mc.motion.head_hidden}};
  const EncoderConfig& e = mc.tracknet.encoder;
  j["encoder"] = {{"d", e.d},
                  {"y_points", e.y_points},
                  {"heads", e.heads},
                  {"blocks", e.blocks},
                  {"point_frames", e.point_frames},
                  {"t_h", e.t_h},
                  {"motion_hidden", e.motion_hidden},
                  {"point_in_hidden", e.point_in_hidden},
                  {"fuse_hidden", e.fuse_hidden}};
  const InteractionConfig& i = mc.tracknet.interaction;
  j["interaction"] = {{"d", i.d},
                      {"heads", i.heads},
                      {"rounds", i.rounds},
                      {"mode", interaction_mode_name(i.mode)}};
  return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig mc;
  mc.init_seed = j.at("init_seed");
  mc.motion.t_h = j.at("motion").at("t_h");
  mc.motion.t_f = j.at("motion").at("t_f");
  mc.motion.d = j.at("motion").at("d");
  mc.motion.enc_hidden = j.at("motion").at("enc_hidden").get<std::vector<int>>();
  mc.motion.head_hidden = j.at("motion").at("head_hidden").get<std::vector<int>>();
  EncoderConfig& e = mc.tracknet.encoder;
  e.d = j.at("encoder").at("d");
  e.y_points = j.at("encoder").at("y_points");
  e.heads = j.at("encoder").at("heads");
  e.blocks = j.at("encoder").at("blocks");
  e.point_frames = j.at("encoder").at("point_frames");
  e.t_h = j.at("encoder").at("t_h");
  e.motion_hidden = j.at("encoder").at("motion_hidden").get<std::vector<int>>();
  e.point_in_hidden = j.at("encoder").at("point_in_hidden").get<std::vector<int>>();
  e.fuse_hidden = j.at("encoder").at("fuse_hidden").get<std::vector<int>>();
  InteractionConfig& i = mc.tracknet.interaction;
  i.d = j.at("interaction").at("d");
  i.heads = j.at("interaction").at("heads");
  i.rounds = j.at("interaction").at("rounds");
  i.mode = interaction_mode_from_name(j.at("interaction").at("mode"));
  return mc;
}

// ---- simulate ----------------------------------------------------------------------

struct SimulateConfig {
  std::string out = "scenes";
  int scenes = 1;
  int frames = 40;
  int vehicles = 5;
  int pedestrians = 2;
  int cyclists = 1;
  double dt = 0.1;
  double bound = 75.0;
  std::string preset = "centerpoint-like";
  double drop = -1.0;  // negative: keep the preset value
  double sigma_center = -1.0;
  double sigma_heading = -1.0;
  double sigma_size = -1.0;
  double fp_rate = -1.0;
  double clutter = 40.0;
  std::uint64_t seed = 7;
};

ordered_json simulate_config_to_json(const SimulateConfig& c) {
  ordered_json j;
  j["command"] = "simulate";
  j["out"] = c.out;
  j["scenes"] = c.scenes;
  j["frames"] = c.frames;
  j["vehicles"] = c.vehicles;
  j["pedestrians"] = c.pedestrians;
  j["cyclists"] = c.cyclists;
  j["dt"] = c.dt;
  j["bound"] = c.bound;
  j["preset"] = c.preset;
  j["drop"] = c.drop;
  j["sigma_center"] = c.sigma_center;
  j["sigma_heading"] = c.sigma_heading;
  j["sigma_size"] = c.sigma_size;
  j["fp_rate"] = c.fp_rate;
  j["clutter"] = c.clutter;
  j["seed"] = c.seed;
  return j;
}

SimulateConfig simulate_config_from_json(const ordered_json& j) {
  SimulateConfig c;
  c.out = j.at("out");
  c.scenes = j.at("scenes");
  c.frames = j.at("frames");
  c.vehicles = j.at("vehicles");
  c.pedestrians = j.at("pedestrians");
  c.cyclists = j.at("cyclists");
  c.dt = j.at("dt");
  c.bound = j.at("bound");
  c.preset = j.at("preset");
  c.drop = j.at("drop");
  c.sigma_center = j.at("sigma_center");
  c.sigma_heading = j.at("sigma_heading");
  c.sigma_size = j.at("sigma_size");
  c.fp_rate = j.at("fp_rate");
  c.clutter = j.at("clutter");
  c.seed = j.at("seed");
  return c;
}

DetectionNoise noise_from(const SimulateConfig& c) {
  DetectionNoise n = c.preset == "noiseless" ? DetectionNoise::noiseless()
                                             : DetectionNoise::centerpoint_like();
  if (c.drop >= 0.0) n.drop_prob = {c.drop, c.drop, c.drop};
  if (c.sigma_center >= 0.0) n.sigma_center = c.sigma_center;
  if (c.sigma_heading >= 0.0) n.sigma_heading = c.sigma_heading;
  if (c.sigma_size >= 0.0) n.sigma_size_rel = c.sigma_size;
  if (c.fp_rate >= 0.0) n.fp_rate = c.fp_rate;
  return n;
}

int cmd_simulate(const SimulateConfig& cfg_in) {
  SimulateConfig cfg = cfg_in;
  cfg.out = resolve_out(cfg.out);
  ensure_dir(cfg.out);

  const DetectionNoise noise = noise_from(cfg);
  PointSimConfig pts;
  pts.clutter_per_frame = cfg.clutter;

  for (int i = 0; i < cfg.scenes; ++i) {
    SceneSpec spec;
    spec.frames = cfg.frames;
    spec.dt = cfg.dt;
    spec.bound = cfg.bound;
    spec.counts = {cfg.vehicles, cfg.pedestrians, cfg.cyclists};
    spec.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const Scene scene = make_scene(spec, noise, pts);

    std::ostringstream name;
    name << "scene_" << cfg.seed << "_" << std::setw(3) << std::setfill('0') << i << ".jsonl";
    const std::string path = (fs::path(cfg.out) / name.str()).string();
    write_scene_jsonl(path, scene);
    std::cout << "wrote " << path << "\n";
  }
  write_json_file((fs::path(cfg.out) / "config.json").string(), simulate_config_to_json(cfg_in));
  return 0;
}

// ---- train --------------------------------------------------------------------------

struct TrainConfig {
  std::string scenes = "scenes";
  std::string out = "runs/default";
  std::string stage = "all";    // 1 | 2 | all
  std::string preset = "desk";  // desk | paper | overfit
  std::string motion_ckpt;      // stage 2 alone: frozen stage-1 weights
  double lr = 1e-3;
  int epochs1 = 30;
  int epochs2 = 40;
  int batch1 = 16;
  int batch2 = 8;
  int d = 64;
  int y_points = 32;
  int heads = 4;
  int blocks = 3;
  int rounds = 3;
  int point_frames = 5;
  int t_h = 10;
  int t_f = 5;
  std::string interaction = "global-local";
  std::string embedding = "both";  // traj | point | both
  double reg_weight = 1.0;
  std::uint64_t seed = 42;
};

ordered_json train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["command"] = "train";
  j["scenes"] = c.scenes;
  j["out"] = c.out;
  j["stage"] = c.stage;
  j["preset"] = c.preset;
  j["motion_ckpt"] = c.motion_ckpt;
  j["lr"] = c.lr;
  j["epochs1"] = c.epochs1;
  j["epochs2"] = c.epochs2;
  j["batch1"] = c.batch1;
  j["batch2"] = c.batch2;
  j["d"] = c.d;
  j["y_points"] = c.y_points;
  j["heads"] = c.heads;
  j["blocks"] = c.blocks;
  j["rounds"] = c.rounds;
  j["point_frames"] = c.point_frames;
  j["t_h"] = c.t_h;
  j["t_f"] = c.t_f;
  j["interaction"] = c.interaction;
  j["embedding"] = c.embedding;
  j["reg_weight"] = c.reg_weight;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from(const TrainConfig& c) {
  ModelConfig mc;
  mc.init_seed = c.seed;
  mc.motion.t_h = c.t_h;
  mc.motion.t_f = c.t_f;
  mc.motion.d = c.d;
  mc.motion.enc_hidden = {c.d};
  mc.motion.head_hidden = {c.d};
  EncoderConfig& e = mc.tracknet.encoder;
  e.d = c.d;
  e.y_points = c.y_points;
  e.heads = c.heads;
  e.blocks = c.blocks;
  e.point_frames = c.point_frames;
  e.t_h = c.t_h;
  e.motion_hidden = {c.d};
  e.point_in_hidden = {c.d};
  e.fuse_hidden = {2 * c.d};
  e.use_motion = c.embedding != "point";
  e.use_appearance = c.embedding != "traj";
  InteractionConfig& i = mc.tracknet.interaction;
  i.d = c.d;
  i.heads = c.heads;
  i.rounds = c.rounds;
  i.mode = interaction_mode_from_name(c.interaction);
  return mc;
}

int cmd_train(const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  cfg.out = resolve_out(cfg.out);
  ensure_dir(cfg.out);

  const std::vector<Scene> scenes = load_scenes(resolve_out(cfg.scenes));
  const ModelConfig mc = model_config_from(cfg);
  Model model(mc);

  write_json_file((fs::path(cfg.out) / "config.json").string(), train_config_to_json(cfg_in));
  write_json_file((fs::path(cfg.out) / "model.json").string(), model_config_to_json(mc));

  const bool run1 = cfg.stage == "1" || cfg.stage == "all";
  const bool run2 = cfg.stage == "2" || cfg.stage == "all";

  try {
    if (!run1 && run2) {
      if (cfg.motion_ckpt.empty())
        throw std::runtime_error("stage 2 alone needs --motion-ckpt from a stage-1 run");
      load_checkpoint_into(resolve_out(cfg.motion_ckpt), model.store);
    }
    if (run1) {
      Stage1Config s1;
      s1.lr = cfg.lr;
      s1.epochs = cfg.epochs1;
      s1.batch = cfg.batch1;
      const Stage1Result r1 = train_motion_stage1(model, {scenes.data(), scenes.size()}, s1);
      ordered_json j;
      j["stage"] = 1;
      j["epoch_loss"] = r1.epoch_loss;
      j["center_error"] = motion_center_error(model, {scenes.data(), scenes.size()});
      write_json_file((fs::path(cfg.out) / "loss_stage1.json").string(), j);
      save_checkpoint((fs::path(cfg.out) / "motion.ckpt").string(), model.motion_params());
      std::cout << "stage 1 done: loss " << r1.epoch_loss.front() << " -> "
                << r1.epoch_loss.back() << "\n";
    }
    if (run2) {
      Stage2Config s2;
      s2.lr = cfg.lr;
      s2.epochs = cfg.epochs2;
      s2.batch = cfg.batch2;
      s2.reg_weight = cfg.reg_weight;
      const Stage2Result r2 = train_tracknet_stage2(model, {scenes.data(), scenes.size()}, s2);
      ordered_json j;
      j["stage"] = 2;
      j["epoch_loss"] = r2.epoch_loss;
      j["epoch_conf_loss"] = r2.epoch_conf_loss;
      j["epoch_reg_loss"] = r2.epoch_reg_loss;
      write_json_file((fs::path(cfg.out) / "loss_stage2.json").string(), j);
      std::cout << "stage 2 done: loss " << r2.epoch_loss.front() << " -> "
                << r2.epoch_loss.back() << "\n";
    }
  } catch (const std::exception& e) {
    // persist the diagnostic; the offending sample id lives in the message
    ordered_json j;
    j["error"] = e.what();
    write_json_file((fs::path(cfg.out) / "abort.json").string(), j);
    std::cerr << "training aborted: " << e.what() << "\n";
    return 3;
  }

  save_checkpoint((fs::path(cfg.out) / "model.ckpt").string(), model.store.items());
  std::cout << "wrote " << (fs::path(cfg.out) / "model.ckpt").string() << "\n";
  return 0;
}

// ---- track --------------------------------------------------------------------------

struct TrackConfig {
  std::string scenes = "scenes";
  std::string checkpoint = "runs/default/model.ckpt";
  std::string model_json;  // defaults to model.json next to the checkpoint
  std::string out = "tracks";
  int pred_boxes = -1;  // -1: the trained horizon
  bool no_pred_boxes = false;
  int point_frames = -1;
  std::string interaction;  // empty: trained mode
  int traj_len = -1;
  std::string embedding;  // empty: trained arms
  int w = 1;
  bool nms = false;
  bool rank_by_last_observed = false;
  std::uint64_t seed = 9001;
};

ordered_json track_config_to_json(const TrackConfig& c) {
  ordered_json j;
  j["command"] = "track";
  j["scenes"] = c.scenes;
  j["checkpoint"] = c.checkpoint;
  j["model_json"] = c.model_json;
  j["out"] = c.out;
  j["pred_boxes"] = c.pred_boxes;
  j["no_pred_boxes"] = c.no_pred_boxes;
  j["point_frames"] = c.point_frames;
  j["interaction"] = c.interaction;
  j["traj_len"] = c.traj_len;
  j["embedding"] = c.embedding;
  j["w"] = c.w;
  j["nms"] = c.nms;
  j["rank_by_last_observed"] = c.rank_by_last_observed;
  j["seed"] = c.seed;
  return j;
}

TrackConfig track_config_from_json(const ordered_json& j) {
  TrackConfig c;
  c.scenes = j.at("scenes");
  c.checkpoint = j.at("checkpoint");
  c.model_json = j.at("model_json");
  c.out = j.at("out");
  c.pred_boxes = j.at("pred_boxes");
  c.no_pred_boxes = j.at("no_pred_boxes");
  c.point_frames = j.at("point_frames");
  c.interaction = j.at("interaction");
  c.traj_len = j.at("traj_len");
  c.embedding = j.at("embedding");
  c.w = j.at("w");
  c.nms = j.at("nms");
  c.rank_by_last_observed = j.at("rank_by_last_observed");
  c.seed = j.at("seed");
  return c;
}

int cmd_track(const TrackConfig& cfg_in) {
  TrackConfig cfg = cfg_in;
  cfg.out = resolve_out(cfg.out);
  cfg.checkpoint = resolve_out(cfg.checkpoint);
  ensure_dir(cfg.out);

  if (!fs::exists(cfg.checkpoint)) {
    std::cerr << "checkpoint missing: " << cfg.checkpoint << "\n";
    return 3;
  }
  const std::string model_json_path =
      cfg.model_json.empty() ? (fs::path(cfg.checkpoint).parent_path() / "model.json").string()
                             : resolve_out(cfg.model_json);
  ModelConfig mc = model_config_from_json(read_json_file(model_json_path));

  // inference-time ablation arms
  if (!cfg.interaction.empty())
    mc.tracknet.interaction.mode = interaction_mode_from_name(cfg.interaction);
  if (!cfg.embedding.empty()) {
    mc.tracknet.encoder.use_motion = cfg.embedding != "point";
    mc.tracknet.encoder.use_appearance = cfg.embedding != "traj";
  }
  if (cfg.point_frames > 0) mc.tracknet.encoder.point_frames = cfg.point_frames;

  Model model(mc);
  load_checkpoint_into(cfg.checkpoint, model.store);
  NetworkScorer scorer(model.tracknet);

  TrackerConfig tc;
  tc.t_h = cfg.traj_len > 0 ? cfg.traj_len : mc.tracknet.encoder.t_h;
  tc.t_f = mc.motion.t_f;
  if (cfg.no_pred_boxes || cfg.pred_boxes == 0) {
    tc.use_predicted_boxes = false;
  } else if (cfg.pred_boxes > 0) {
    if (cfg.pred_boxes > mc.motion.t_f) {
      std::cerr << "pred-boxes " << cfg.pred_boxes << " exceeds the trained horizon "
                << mc.motion.t_f << "\n";
      return 3;
    }
    tc.t_f = cfg.pred_boxes;
  }
  tc.w = cfg.w;
  tc.point_frames = mc.tracknet.encoder.point_frames;
  tc.nms_enabled = cfg.nms;
  tc.rank_by_last_observed = cfg.rank_by_last_observed;
  tc.sample_seed = cfg.seed;

  for (const std::string& scene_path : scene_files_in(resolve_out(cfg.scenes))) {
    const Scene scene = read_scene_jsonl(scene_path);
    const TrackOutput output = run_tracker(scene, tc, model.motion, scorer);
    const std::string stem = fs::path(scene_path).stem().string();
    const std::string path = (fs::path(cfg.out) / ("tracks_" + stem + ".jsonl")).string();
    write_tracks_jsonl(path, output);
    std::cout << "wrote " << path << "\n";
  }
  write_json_file((fs::path(cfg.out) / "config.json").string(), track_config_to_json(cfg_in));
  return 0;
}

// ---- eval ---------------------------------------------------------------------------

struct EvalCliConfig {
  std::string scenes = "scenes";
  std::string tracks = "tracks";
  std::string out = "report.json";
  std::string csv;
  std::string label = "run";
  double gate = 2.0;
  bool iou = false;
  double iou_gate = 0.5;
  int min_points = 0;
};

int cmd_eval(const EvalCliConfig& cfg) {
  EvalConfig ec;
  ec.dist_gate = cfg.gate;
  ec.use_iou_gate = cfg.iou;
  ec.iou_gate = cfg.iou_gate;
  ec.min_points = cfg.min_points;

  std::map<ObjectClass, MotTally> total;
  for (int c = 0; c < kNumClasses; ++c) total[static_cast<ObjectClass>(c)] = MotTally{};

  for (const std::string& scene_path : scene_files_in(resolve_out(cfg.scenes))) {
    const std::string stem = fs::path(scene_path).stem().string();
    const std::string track_path =
        (fs::path(resolve_out(cfg.tracks)) / ("tracks_" + stem + ".jsonl")).string();
    if (!fs::exists(track_path)) {
      std::cerr << "track file missing for scene " << stem << ": " << track_path << "\n";
      return 3;
    }
    const Scene scene = read_scene_jsonl(scene_path);
    const TrackOutput output = read_tracks_jsonl(track_path);
    const auto per_class = evaluate_scene(scene, output, ec);
    for (const auto& [cls, tally] : per_class) total[cls] += tally;
  }

  const std::string out_path = resolve_out(cfg.out);
  if (fs::path(out_path).has_parent_path()) ensure_dir(fs::path(out_path).parent_path().string());
  write_eval_report(out_path, total, ec, cfg.label);
  std::cout << "wrote " << out_path << "\n";

  if (!cfg.csv.empty()) {
    const std::string csv_path = resolve_out(cfg.csv);
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << "label,class,gt,fp,miss,ids,mota,fp_rate,miss_rate,ids_rate\n";
    for (const auto& [cls, tally] : total)
      csv << cfg.label << "," << class_name(cls) << "," << tally.gt << "," << tally.fp << ","
          << tally.miss << "," << tally.ids << "," << tally.mota() << "," << tally.fp_rate()
          << "," << tally.miss_rate() << "," << tally.ids_rate() << "\n";
    std::cout << "wrote " << csv_path << "\n";
  }

  for (const auto& [cls, tally] : total)
    std::cout << class_name(cls) << ": MOTA " << tally.mota() << " (GT " << tally.gt << ", FP "
              << tally.fp << ", Miss " << tally.miss << ", IDS " << tally.ids << ")\n";
  return 0;
}

// ---- gradcheck / plotdata --------------------------------------------------------------

int cmd_gradcheck(double eps, double tol) {
  const GradSuiteReport report = run_gradient_suite(eps, tol);
  for (const GradSuiteEntry& e : report.entries)
    std::cout << (e.ok ? "[ok]   " : "[FAIL] ") << e.name << "  max_rel_err=" << e.max_rel_err
              << (e.ok ? "" : "  worst=" + e.worst_param) << "\n";
  std::cout << (report.all_ok ? "all blocks passed" : "gradient check FAILED") << " in "
            << report.seconds << " s\n";
  return report.all_ok ? 0 : 1;
}

int cmd_plotdata(const std::vector<std::string>& reports, const std::string& out) {
  const std::string out_path = resolve_out(out);
  std::ofstream csv(out_path, std::ios::trunc);
  if (!csv) {
    std::cerr << "cannot open " << out_path << "\n";
    return 3;
  }
  csv << "label,class,gt,fp,miss,ids,mota,fp_rate,miss_rate,ids_rate\n";
  int rows = 0;
  for (const std::string& r : reports) {
    const ordered_json j = read_json_file(resolve_out(r));
    const std::string label = j.at("label");
    for (const auto& [cls_name, t] : j.at("per_class").items()) {
      csv << label << "," << cls_name << "," << t.at("gt") << "," << t.at("fp") << ","
          << t.at("miss") << "," << t.at("ids") << "," << t.at("mota") << "," << t.at("fp_rate")
          << "," << t.at("miss_rate") << "," << t.at("ids_rate") << "\n";
      ++rows;
    }
  }
  std::cout << "wrote " << out_path << " (" << rows << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-hypothesis 3D tracking: simulate, train, track, evaluate"};
  app.require_subcommand(1);

  // simulate ------------------------------------------------------------------
  SimulateConfig sim;
  std::string sim_config_path;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate synthetic scenes");
  sim_cmd->add_option("--config", sim_config_path, "load a previously emitted config.json");
  auto* o_out = sim_cmd->add_option("--out", sim.out);
  auto* o_scenes = sim_cmd->add_option("--scenes", sim.scenes);
  auto* o_frames = sim_cmd->add_option("--frames", sim.frames);
  auto* o_veh = sim_cmd->add_option("--vehicles", sim.vehicles);
  auto* o_ped = sim_cmd->add_option("--pedestrians", sim.pedestrians);
  auto* o_cyc = sim_cmd->add_option("--cyclists", sim.cyclists);
  auto* o_dt = sim_cmd->add_option("--dt", sim.dt);
  auto* o_bound = sim_cmd->add_option("--bound", sim.bound);
  auto* o_preset = sim_cmd->add_option("--preset", sim.preset)
                       ->check(CLI::IsMember({"noiseless", "centerpoint-like"}));
  auto* o_drop = sim_cmd->add_option("--drop", sim.drop);
  auto* o_sc = sim_cmd->add_option("--sigma-center", sim.sigma_center);
  auto* o_sh = sim_cmd->add_option("--sigma-heading", sim.sigma_heading);
  auto* o_ss = sim_cmd->add_option("--sigma-size", sim.sigma_size);
  auto* o_fp = sim_cmd->add_option("--fp-rate", sim.fp_rate);
  auto* o_cl = sim_cmd->add_option("--clutter", sim.clutter);
  auto* o_seed = sim_cmd->add_option("--seed", sim.seed);

  // train ---------------------------------------------------------------------
  TrainConfig train;
  CLI::App* train_cmd = app.add_subcommand("train", "two-stage training");
  train_cmd->add_option("--scenes", train.scenes);
  train_cmd->add_option("--out", train.out);
  train_cmd->add_option("--stage", train.stage)->check(CLI::IsMember({"1", "2", "all"}));
  auto* t_preset = train_cmd->add_option("--preset", train.preset)
                       ->check(CLI::IsMember({"desk", "paper", "overfit"}));
  train_cmd->add_option("--motion-ckpt", train.motion_ckpt);
  auto* t_lr = train_cmd->add_option("--lr", train.lr);
  auto* t_e1 = train_cmd->add_option("--epochs1", train.epochs1);
  auto* t_e2 = train_cmd->add_option("--epochs2", train.epochs2);
  auto* t_b1 = train_cmd->add_option("--batch1", train.batch1);
  auto* t_b2 = train_cmd->add_option("--batch2", train.batch2);
  auto* t_d = train_cmd->add_option("--d", train.d);
  auto* t_y = train_cmd->add_option("--y-points", train.y_points);
  train_cmd->add_option("--heads", train.heads);
  train_cmd->add_option("--blocks", train.blocks);
  train_cmd->add_option("--rounds", train.rounds);
  train_cmd->add_option("--point-frames", train.point_frames);
  train_cmd->add_option("--t-h", train.t_h);
  train_cmd->add_option("--t-f", train.t_f);
  train_cmd->add_option("--interaction", train.interaction)
      ->check(CLI::IsMember({"none", "global", "global-local"}));
  train_cmd->add_option("--embedding", train.embedding)
      ->check(CLI::IsMember({"traj", "point", "both"}));
  train_cmd->add_option("--reg-weight", train.reg_weight);
  train_cmd->add_option("--seed", train.seed);

  // track ---------------------------------------------------------------------
  TrackConfig track;
  std::string track_config_path;
  CLI::App* track_cmd = app.add_subcommand("track", "run the tracker over scenes");
  track_cmd->add_option("--config", track_config_path, "load a previously emitted config.json");
  auto* k_scenes = track_cmd->add_option("--scenes", track.scenes);
  auto* k_ckpt = track_cmd->add_option("--checkpoint", track.checkpoint);
  auto* k_mj = track_cmd->add_option("--model-json", track.model_json);
  auto* k_out = track_cmd->add_option("--out", track.out);
  auto* k_pb = track_cmd->add_option("--pred-boxes", track.pred_boxes);
  auto* k_npb = track_cmd->add_flag("--no-pred-boxes", track.no_pred_boxes);
  auto* k_pf = track_cmd->add_option("--point-frames", track.point_frames);
  auto* k_int = track_cmd->add_option("--interaction", track.interaction)
                    ->check(CLI::IsMember({"none", "global", "global-local"}));
  auto* k_tl = track_cmd->add_option("--traj-len", track.traj_len);
  auto* k_emb = track_cmd->add_option("--embedding", track.embedding)
                    ->check(CLI::IsMember({"traj", "point", "both"}));
  auto* k_w = track_cmd->add_option("--w", track.w);
  auto* k_nms = track_cmd->add_flag("--nms", track.nms);
  auto* k_rlo = track_cmd->add_flag("--rank-by-last-observed", track.rank_by_last_observed);
  auto* k_seed = track_cmd->add_option("--seed", track.seed);

  // eval ----------------------------------------------------------------------
  EvalCliConfig ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "CLEAR-MOT metrics against scene GT");
  eval_cmd->add_option("--scenes", ev.scenes);
  eval_cmd->add_option("--tracks", ev.tracks);
  eval_cmd->add_option("--out", ev.out);
  eval_cmd->add_option("--csv", ev.csv);
  eval_cmd->add_option("--label", ev.label);
  eval_cmd->add_option("--gate", ev.gate);
  eval_cmd->add_flag("--iou", ev.iou);
  eval_cmd->add_option("--iou-gate", ev.iou_gate);
  eval_cmd->add_option("--min-points", ev.min_points);

  // gradcheck ------------------------------------------------------------------
  double gc_eps = 1e-5, gc_tol = 1e-4;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of all blocks");
  gc_cmd->add_option("--eps", gc_eps);
  gc_cmd->add_option("--tol", gc_tol);

  // plotdata -------------------------------------------------------------------
  std::vector<std::string> plot_reports;
  std::string plot_out = "series.csv";
  CLI::App* plot_cmd = app.add_subcommand("plotdata", "CSV series from eval reports");
  plot_cmd->add_option("--reports", plot_reports)->delimiter(',')->required();
  plot_cmd->add_option("--out", plot_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) {
      if (!sim_config_path.empty()) {
        const SimulateConfig loaded =
            simulate_config_from_json(read_json_file(resolve_out(sim_config_path)));
        // explicit flags override the loaded config
        if (!*o_out) sim.out = loaded.out;
        if (!*o_scenes) sim.scenes = loaded.scenes;
        if (!*o_frames) sim.frames = loaded.frames;
        if (!*o_veh) sim.vehicles = loaded.vehicles;
        if (!*o_ped) sim.pedestrians = loaded.pedestrians;
        if (!*o_cyc) sim.cyclists = loaded.cyclists;
        if (!*o_dt) sim.dt = loaded.dt;
        if (!*o_bound) sim.bound = loaded.bound;
        if (!*o_preset) sim.preset = loaded.preset;
        if (!*o_drop) sim.drop = loaded.drop;
        if (!*o_sc) sim.sigma_center = loaded.sigma_center;
        if (!*o_sh) sim.sigma_heading = loaded.sigma_heading;
        if (!*o_ss) sim.sigma_size = loaded.sigma_size;
        if (!*o_fp) sim.fp_rate = loaded.fp_rate;
        if (!*o_cl) sim.clutter = loaded.clutter;
        if (!*o_seed) sim.seed = loaded.seed;
      }
      return cmd_simulate(sim);
    }
    if (train_cmd->parsed()) {
      if (*t_preset && train.preset == "paper") {
        // paper-scale configuration, kept for documentation runs
        if (!*t_d) train.d = 256;
        if (!*t_y) train.y_points = 128;
        if (!*t_lr) train.lr = 1e-3;
        if (!*t_b1) train.batch1 = 4;
        if (!*t_b2) train.batch2 = 4;
        if (!*t_e1) train.epochs1 = 6;
        if (!*t_e2) train.epochs2 = 6;
      } else if (*t_preset && train.preset == "overfit") {
        if (!*t_e1) train.epochs1 = 60;
        if (!*t_e2) train.epochs2 = 200;
        if (!*t_b2) train.batch2 = 4;
      }
      return cmd_train(train);
    }
    if (track_cmd->parsed()) {
      if (!track_config_path.empty()) {
        const TrackConfig loaded =
            track_config_from_json(read_json_file(resolve_out(track_config_path)));
        if (!*k_scenes) track.scenes = loaded.scenes;
        if (!*k_ckpt) track.checkpoint = loaded.checkpoint;
        if (!*k_mj) track.model_json = loaded.model_json;
        if (!*k_out) track.out = loaded.out;
        if (!*k_pb) track.pred_boxes = loaded.pred_boxes;
        if (!*k_npb) track.no_pred_boxes = loaded.no_pred_boxes;
        if (!*k_pf) track.point_frames = loaded.point_frames;
        if (!*k_int) track.interaction = loaded.interaction;
        if (!*k_tl) track.traj_len = loaded.traj_len;
        if (!*k_emb) track.embedding = loaded.embedding;
        if (!*k_w) track.w = loaded.w;
        if (!*k_nms) track.nms = loaded.nms;
        if (!*k_rlo) track.rank_by_last_observed = loaded.rank_by_last_observed;
        if (!*k_seed) track.seed = loaded.seed;
      }
      return cmd_track(track);
    }
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_eps, gc_tol);
    if (plot_cmd->parsed()) return cmd_plotdata(plot_reports, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
