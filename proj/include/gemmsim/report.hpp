#pragma once

// CSV and JSON report writers. Numbers are printed with fixed precision so
// identical runs produce identical bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gemmsim/functional.hpp"
#include "gemmsim/putiming.hpp"
#include "gemmsim/scheduler.hpp"
#include "gemmsim/system.hpp"

namespace gemmsim::report {

inline std::string fixed(double v, int digits = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void timing_csv(std::ostream& os, const std::vector<LayerTiming>& layers) {
  os << "layer_id,kind,n,m,p,compute_cycles,bound,latency_us\n";
  for (const auto& t : layers)
    os << t.layer_id << ',' << to_string(t.kind) << ',' << t.shape.n << ',' << t.shape.m << ',' << t.shape.p << ','
       << t.compute_cycles << ',' << to_string(t.bound) << ',' << fixed(t.latency_s * 1e6, 4) << '\n';
}

inline void plan_csv(std::ostream& os, const std::vector<TileTask>& tasks, const SchedulePlan& plan) {
  os << "tile_id,layer_id,window,load_us,exec_us,entries,stall_us,waits_for_memory\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TileTask& t = tasks[i];
    os << t.id << ',' << t.layer_id << ',' << plan.window_of[i] << ',' << fixed(t.load * 1e6) << ','
       << fixed(t.exec * 1e6) << ',' << t.entries << ',' << fixed(plan.stall_of[i] * 1e6) << ','
       << (plan.waits_for_memory[i] ? 1 : 0) << '\n';
  }
}

inline void ratio_csv(std::ostream& os, const RatioReport& rep) {
  os << "tile_id,time_ratio,memory_ratio,relocated_flag\n";
  for (const auto& r : rep)
    os << r.tile_id << ',' << fixed(r.time_ratio) << ',' << fixed(r.memory_ratio) << ',' << (r.relocated ? 1 : 0)
       << '\n';
}

// Tiles with a nonzero stall under either plan.
inline void stall_table(std::ostream& os, const std::vector<TileTask>& tasks, const SchedulePlan& baseline,
                        const SchedulePlan& adaptive) {
  os << "tile_id,layer_id,baseline_stall_us,adaptive_stall_us\n";
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (baseline.stall_of[i] > 0 || adaptive.stall_of[i] > 0)
      os << tasks[i].id << ',' << tasks[i].layer_id << ',' << fixed(baseline.stall_of[i] * 1e6) << ','
         << fixed(adaptive.stall_of[i] * 1e6) << '\n';
  os << "total,," << fixed(baseline.total_stall() * 1e6) << ',' << fixed(adaptive.total_stall() * 1e6) << '\n';
}

inline nlohmann::ordered_json summary_json(const SystemReport& rep) {
  nlohmann::ordered_json j;
  j["model"] = rep.model;
  j["first_layer"] = to_string(rep.first_layer);
  j["niu"] = to_string(rep.niu);
  j["pu_instances"] = rep.pu_instances;
  j["pus"] = nlohmann::ordered_json::array();
  for (const auto& r : rep.runs) {
    nlohmann::ordered_json p;
    p["name"] = r.pu.name;
    p["count"] = r.count;
    p["tops"] = fixed(pu_tops(r.pu), 4);
    p["latency_ms"] = fixed(r.timing.latency_s * 1e3);
    p["compute_ms"] = fixed(r.timing.compute_s * 1e3);
    p["baseline_stall_ms"] = fixed(r.baseline.total_stall() * 1e3);
    p["adaptive_stall_ms"] = fixed(r.adaptive.total_stall() * 1e3);
    p["tiles"] = r.tasks.size();
    j["pus"].push_back(p);
  }
  j["fps"] = fixed(rep.fps, 3);
  j["tops"] = fixed(rep.tops, 4);
  j["fps_per_tops"] = fixed(rep.fps_per_tops, 3);
  j["gops_per_frame"] = fixed(rep.ops_per_frame / 1e9, 4);
  j["measured_tops"] = fixed(rep.measured_tops, 4);
  j["efficiency"] = fixed(rep.efficiency, 4);
  j["fps_per_watt"] = rep.fps_per_watt ? nlohmann::ordered_json(fixed(*rep.fps_per_watt, 3)) : nlohmann::ordered_json();
  return j;
}

// One raw int8 blob per layer output plus a manifest entry with its shape
// and scale.
class ActivationDumper {
 public:
  explicit ActivationDumper(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    manifest_["activations"] = nlohmann::ordered_json::array();
  }

  void add(const ModelGraph& g, const std::vector<QTensor>& outs, std::uint64_t round, int sample = 0) {
    for (std::size_t i = 0; i < outs.size(); ++i) {
      const int layer = g.layers[i].id;
      const std::string name =
          "round" + std::to_string(round) + "_sample" + std::to_string(sample) + "_layer" + std::to_string(layer) + ".bin";
      std::ofstream out(dir_ / name, std::ios::binary);
      if (!out) throw ConfigError((dir_ / name).string() + ": cannot write file");
      out.write(reinterpret_cast<const char*>(outs[i].data.data()), static_cast<std::streamsize>(outs[i].data.size()));
      manifest_["activations"].push_back({{"layer", layer},
                                          {"round", round},
                                          {"sample", sample},
                                          {"dims", {outs[i].dims.h, outs[i].dims.w, outs[i].dims.c}},
                                          {"shift", outs[i].shift},
                                          {"file", name}});
    }
  }

  void finish() const {
    std::ofstream out(dir_ / "manifest.json");
    out << manifest_.dump(2) << '\n';
  }

 private:
  std::filesystem::path dir_;
  nlohmann::ordered_json manifest_;
};

}  // namespace gemmsim::report
