#pragma once

// Multi-PU system: every PU instance runs a whole frame per pass, so the
// aggregate frame rate is the sum of per-PU reciprocal latencies.

#include <optional>
#include <string>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/hbm.hpp"
#include "gemmsim/niu.hpp"
#include "gemmsim/pu_config.hpp"
#include "gemmsim/putiming.hpp"
#include "gemmsim/scheduler.hpp"
#include "gemmsim/workload.hpp"

namespace gemmsim {

inline std::string to_string(FirstLayerMode m) { return m == FirstLayerMode::host ? "host" : "fpga"; }

inline FirstLayerMode first_layer_mode_from_string(const std::string& s) {
  if (s == "host") return FirstLayerMode::host;
  if (s == "fpga") return FirstLayerMode::fpga;
  throw ConfigError("first_layer must be 'host' or 'fpga', got '" + s + "'");
}

// none: no NIU. replace: the NIU takes the place of one PU instance.
// share: one NIU on its own HBM channel serves every PU; no PU is lost.
enum class NiuMode { none, replace, share };

inline std::string to_string(NiuMode m) {
  switch (m) {
    case NiuMode::none: return "none";
    case NiuMode::replace: return "replace";
    case NiuMode::share: return "share";
  }
  return "?";
}

inline NiuMode niu_mode_from_string(const std::string& s) {
  if (s == "none") return NiuMode::none;
  if (s == "replace") return NiuMode::replace;
  if (s == "share") return NiuMode::share;
  throw ConfigError("niu mode must be none, replace or share, got '" + s + "'");
}

struct PuGroup {
  PUConfig pu;
  int count = 1;
};

// Informational HBM channel assignment (one weights and two activation
// regions per PU); channels are assumed contention-free.
struct HbmRegion {
  std::string pu;
  std::string role;
  int channel = 0;
};

inline PuPorts default_ports() {
  PuPorts ports;
  ports.io = HbmPortConfig{};  // 256 bits at 300 MHz
  ports.params = HbmPortConfig{};
  ports.params.width_bits = 128;  // weight path runs at the fast clock
  ports.params.clock_hz = 600e6;
  return ports;
}

struct SystemConfig {
  std::vector<PuGroup> groups{{pu_1x(), 5}, {pu_2x(), 5}};
  PuPorts ports = default_ports();
  std::vector<HbmRegion> regions;
  FirstLayerMode first_layer = FirstLayerMode::host;
  std::optional<double> power_watts;
  NiuMode niu = NiuMode::none;
  std::string niu_replaces = "pu2x";  // group losing an instance in replace mode
  std::optional<NoiseSpec> noise;

  void validate() const {
    if (groups.empty()) throw ConfigError("system has no PUs");
    for (const auto& g : groups) {
      g.pu.validate();
      if (g.count < 0) throw ConfigError("PU '" + g.pu.name + "': count must be >= 0");
    }
    ports.io.validate();
    ports.params.validate();
    if (power_watts && !(*power_watts > 0)) throw ConfigError("power_watts must be positive");
    if (noise) noise->validate();
    if (niu == NiuMode::replace) {
      bool found = false;
      for (const auto& g : groups) found = found || (g.pu.name == niu_replaces && g.count > 0);
      if (!found) throw ConfigError("niu replaces '" + niu_replaces + "' but no such PU instance exists");
    }
  }
};

// Default 5 x PU_1x + 5 x PU_2x system with a 3-channel region map per PU.
inline SystemConfig default_system() {
  SystemConfig cfg;
  int channel = 0;
  for (const auto& g : cfg.groups)
    for (int i = 0; i < g.count; ++i)
      for (const char* role : {"weights", "act0", "act1"})
        cfg.regions.push_back({g.pu.name + "#" + std::to_string(i), role, channel++});
  return cfg;
}

// Everything computed for one PU type.
struct PuRun {
  PUConfig pu;
  int count = 0;
  std::vector<LoweredLayer> lowered;
  std::vector<TileTask> tasks;
  SchedulePlan baseline;
  SchedulePlan adaptive;
  ModelTiming timing;  // with the adaptive plan's stalls
  double baseline_latency_s = 0.0;
};

inline PuRun simulate_pu(const ModelGraph& g, const PUConfig& pu, const PuPorts& ports, FirstLayerMode mode) {
  pu.validate();
  PuRun run;
  run.pu = pu;
  run.lowered = lower_model(g, mode);
  const auto timings = layer_timings(run.lowered, pu, ports);
  run.tasks = tasks_from_model(run.lowered, timings, pu, ports, true);
  const std::int64_t cap = uram_capacity(pu);
  run.baseline = baseline_schedule(run.tasks, cap);
  run.adaptive = adaptive_refine(run.baseline, run.tasks, cap);
  run.timing = model_latency(run.lowered, pu, ports, run.adaptive);
  run.baseline_latency_s = run.timing.compute_s + run.baseline.total_stall();
  return run;
}

struct SystemReport {
  std::string model;
  FirstLayerMode first_layer = FirstLayerMode::host;
  NiuMode niu = NiuMode::none;
  std::vector<PuRun> runs;     // one per PU group, count already NIU-adjusted
  int pu_instances = 0;
  double ops_per_frame = 0.0;  // 2 x useful MACs
  double fps = 0.0;
  double tops = 0.0;           // available, over active PU instances
  double fps_per_tops = 0.0;
  double measured_tops = 0.0;
  double efficiency = 0.0;     // measured / available
  std::optional<double> fps_per_watt;
};

inline SystemReport simulate(const SystemConfig& cfg, const ModelGraph& g) {
  cfg.validate();
  g.validate();
  SystemReport rep;
  rep.model = g.name;
  rep.first_layer = cfg.first_layer;
  rep.niu = cfg.niu;
  bool replaced = false;
  for (const auto& grp : cfg.groups) {
    int count = grp.count;
    if (cfg.niu == NiuMode::replace && !replaced && grp.pu.name == cfg.niu_replaces && count > 0) {
      --count;
      replaced = true;
    }
    PuRun run = simulate_pu(g, grp.pu, cfg.ports, cfg.first_layer);
    run.count = count;
    if (count > 0 && run.timing.latency_s > 0) rep.fps += count / run.timing.latency_s;
    rep.tops += count * pu_tops(grp.pu);
    rep.pu_instances += count;
    if (rep.ops_per_frame == 0.0) rep.ops_per_frame = model_ops(run.lowered);
    rep.runs.push_back(std::move(run));
  }
  rep.fps_per_tops = rep.tops > 0 ? rep.fps / rep.tops : 0.0;
  rep.measured_tops = rep.ops_per_frame * rep.fps / 1e12;
  rep.efficiency = rep.tops > 0 ? rep.measured_tops / rep.tops : 0.0;
  if (cfg.power_watts) rep.fps_per_watt = rep.fps / *cfg.power_watts;
  return rep;
}

}  // namespace gemmsim
