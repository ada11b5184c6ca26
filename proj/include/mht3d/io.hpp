#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mht3d/eval.hpp"
#include "mht3d/nn.hpp"
#include "mht3d/sim.hpp"
#include "mht3d/tracker.hpp"

namespace mht {

// ---- parameter checkpoints (versioned binary, bit-exact round trip) ----------

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);

std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<double>>>>
load_checkpoint_raw(const std::string& path);

// Copies checkpoint values into matching (name, shape) parameters of `store`.
// Entries in the file but absent from the store are ignored when
// `allow_extra`; missing store parameters always throw.
void load_checkpoint_into(const std::string& path, ParamStore& store, bool allow_extra = true);

// FNV-1a over names, shapes and raw payload bytes; used by freeze checks.
std::uint64_t params_hash(const std::vector<std::pair<std::string, Tensor>>& params);

// ---- scene files (JSON lines) --------------------------------------------------

void write_scene_jsonl(const std::string& path, const Scene& scene);
Scene read_scene_jsonl(const std::string& path);

// ---- track output (JSON lines) --------------------------------------------------

void write_tracks_jsonl(const std::string& path, const TrackOutput& output);
TrackOutput read_tracks_jsonl(const std::string& path);

// ---- metrics report --------------------------------------------------------------

void write_eval_report(const std::string& path, const std::map<ObjectClass, MotTally>& per_class,
                       const EvalConfig& cfg, const std::string& label);

}  // namespace mht
