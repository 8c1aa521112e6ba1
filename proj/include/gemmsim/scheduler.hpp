#pragma once

// Weight-transfer scheduling under URAM capacity.
//
// Tiles execute in order. Tile 0 is resident before the pass starts; every
// other tile i has its HBM->URAM load placed in the execution window of an
// earlier tile w(i) < i. Loads sharing a window run back to back on the
// params port, in the time left after residual traffic. If they overrun the
// window, the next tile waits for the overrun. A load that cannot overlap
// its predecessor for lack of URAM space is issued after the predecessor
// completes and stalls the pipeline for its full duration.
//
// A tile occupies URAM from the start of its load window until its own
// execution completes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/hbm.hpp"
#include "gemmsim/putiming.hpp"

namespace gemmsim {

struct TileTask {
  int id = 0;
  int layer_id = -1;
  double load = 0.0;       // HBM -> URAM time
  double exec = 0.0;       // execution window length
  std::int64_t entries = 0;
  double port_busy = 0.0;  // params-port time taken by residual reads during exec

  double load_budget() const { return std::max(0.0, exec - port_busy); }
};

struct SchedulePlan {
  std::vector<int> window_of;           // -1 for the preloaded tile 0
  std::vector<bool> waits_for_memory;   // loaded only after the predecessor completes
  std::vector<double> stall_of;         // idle time right before each tile executes
  std::vector<bool> relocated;          // moved by the adaptive phase

  std::size_t size() const { return window_of.size(); }

  double total_stall() const { return std::accumulate(stall_of.begin(), stall_of.end(), 0.0); }

  // [first window the tile is resident in, last window]; a memory-wait
  // load is resident from the gap just before its own window.
  std::pair<int, int> resident_interval(std::size_t i) const {
    const int last = static_cast<int>(i);
    if (i == 0 || waits_for_memory[i]) return {last, last};
    return {window_of[i], last};
  }
};

namespace detail {

inline void check_tasks(const std::vector<TileTask>& tasks, std::int64_t capacity) {
  for (const auto& t : tasks) {
    if (t.load < 0 || t.exec < 0 || t.entries < 0 || t.port_busy < 0)
      throw Error("tile " + std::to_string(t.id) + ": negative load, exec or entries");
    if (t.port_busy > t.exec)
      throw Error("tile " + std::to_string(t.id) + ": residual port time exceeds its execution window");
    if (t.entries > capacity)
      throw Error("tile " + std::to_string(t.id) + " needs " + std::to_string(t.entries) +
                  " URAM entries, capacity is " + std::to_string(capacity));
  }
}

// Stall before each tile given the load placement.
inline std::vector<double> stalls_for(const std::vector<TileTask>& tasks, const std::vector<int>& window_of,
                                      const std::vector<bool>& waits) {
  const std::size_t n = tasks.size();
  std::vector<double> load_in(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    if (!waits[i]) load_in[static_cast<std::size_t>(window_of[i])] += tasks[i].load;
  std::vector<double> stall(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    stall[i] = std::max(0.0, load_in[i - 1] - tasks[i - 1].load_budget());
    if (waits[i]) stall[i] += tasks[i].load;
  }
  return stall;
}

// URAM entries in use during each execution window.
inline std::vector<std::int64_t> window_occupancy(const std::vector<TileTask>& tasks, const SchedulePlan& plan) {
  std::vector<std::int64_t> mem(tasks.size(), 0);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto [lo, hi] = plan.resident_interval(i);
    for (int k = lo; k <= hi; ++k) mem[static_cast<std::size_t>(k)] += tasks[i].entries;
  }
  return mem;
}

}  // namespace detail

inline SchedulePlan baseline_schedule(const std::vector<TileTask>& tasks, std::int64_t capacity) {
  detail::check_tasks(tasks, capacity);
  const std::size_t n = tasks.size();
  SchedulePlan plan;
  plan.window_of.assign(n, -1);
  plan.waits_for_memory.assign(n, false);
  plan.relocated.assign(n, false);
  for (std::size_t i = 1; i < n; ++i) {
    plan.window_of[i] = static_cast<int>(i) - 1;
    plan.waits_for_memory[i] = tasks[i - 1].entries + tasks[i].entries > capacity;
  }
  plan.stall_of = detail::stalls_for(tasks, plan.window_of, plan.waits_for_memory);
  return plan;
}

// Moves stalled loads into earlier windows with spare time and URAM space.
// Stalled tiles are visited by decreasing stall (lower id on ties); for
// each, windows are tried from nearest to farthest and the first relocation
// that lowers the total stall is kept.
inline SchedulePlan adaptive_refine(const SchedulePlan& baseline, const std::vector<TileTask>& tasks,
                                    std::int64_t capacity) {
  detail::check_tasks(tasks, capacity);
  const std::size_t n = tasks.size();
  SchedulePlan plan = baseline;
  if (plan.relocated.size() != n) plan.relocated.assign(n, false);

  std::vector<std::int64_t> mem = detail::window_occupancy(tasks, plan);
  std::vector<double> load_in(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    if (!plan.waits_for_memory[i]) load_in[static_cast<std::size_t>(plan.window_of[i])] += tasks[i].load;

  std::vector<std::size_t> order;
  for (std::size_t i = 1; i < n; ++i)
    if (plan.stall_of[i] > 0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return plan.stall_of[a] > plan.stall_of[b]; });

  for (const std::size_t j : order) {
    if (plan.stall_of[j] <= 0) continue;
    const double before = plan.total_stall();
    const int old_lo = plan.resident_interval(j).first;
    const int old_window = plan.window_of[j];
    const bool old_wait = plan.waits_for_memory[j];
    for (int k = static_cast<int>(j) - 2; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      if (tasks[j].load > tasks[ku].load_budget() - load_in[ku]) continue;
      // Windows newly covered by tile j's residency: [k, old_lo).
      bool fits = true;
      for (int x = k; x < old_lo && fits; ++x) fits = mem[static_cast<std::size_t>(x)] + tasks[j].entries <= capacity;
      if (!fits) continue;

      std::vector<int> win = plan.window_of;
      std::vector<bool> waits = plan.waits_for_memory;
      win[j] = k;
      waits[j] = false;
      std::vector<double> stall = detail::stalls_for(tasks, win, waits);
      const double after = std::accumulate(stall.begin(), stall.end(), 0.0);
      if (!(after < before)) continue;  // reverted

      for (int x = k; x < old_lo; ++x) mem[static_cast<std::size_t>(x)] += tasks[j].entries;
      if (!old_wait) load_in[static_cast<std::size_t>(old_window)] -= tasks[j].load;
      load_in[ku] += tasks[j].load;
      plan.window_of = std::move(win);
      plan.waits_for_memory = std::move(waits);
      plan.stall_of = std::move(stall);
      plan.relocated[j] = true;
      break;
    }
  }
  return plan;
}

struct BruteForceResult {
  double total_stall = 0.0;
  SchedulePlan witness;
  std::uint64_t nodes = 0;
};

inline constexpr std::size_t kBruteForceMaxTiles = 10;

// Exhaustive search over every placement w(i) < i (plus the memory-wait
// option) with branch-and-bound on the accumulated stall.
inline BruteForceResult brute_force_schedule(const std::vector<TileTask>& tasks, std::int64_t capacity) {
  detail::check_tasks(tasks, capacity);
  const std::size_t n = tasks.size();
  if (n > kBruteForceMaxTiles)
    throw Error("brute_force_schedule: " + std::to_string(n) + " tiles exceeds the limit of " +
                std::to_string(kBruteForceMaxTiles));
  BruteForceResult best;
  best.total_stall = std::numeric_limits<double>::infinity();
  std::vector<int> win(n, -1);
  std::vector<bool> waits(n, false);
  std::vector<std::int64_t> mem(n, 0);
  std::vector<double> load_in(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) mem[i] = tasks[i].entries;

  auto overflow = [&](std::size_t k) { return std::max(0.0, load_in[k] - tasks[k].load_budget()); };

  // `bound` = stall committed so far; it can only grow deeper in the tree.
  auto dfs = [&](auto&& self, std::size_t i, double bound) -> void {
    ++best.nodes;
    if (bound >= best.total_stall) return;
    if (i == n) {
      std::vector<double> stall = detail::stalls_for(tasks, win, waits);
      best.total_stall = std::accumulate(stall.begin(), stall.end(), 0.0);
      best.witness.window_of = win;
      best.witness.waits_for_memory = waits;
      best.witness.stall_of = std::move(stall);
      best.witness.relocated.assign(n, false);
      for (std::size_t t = 1; t < n; ++t) best.witness.relocated[t] = !waits[t] && win[t] != static_cast<int>(t) - 1;
      return;
    }
    const std::int64_t e = tasks[i].entries;
    for (int k = static_cast<int>(i) - 1; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      bool fits = true;
      for (std::size_t x = ku; x < i && fits; ++x) fits = mem[x] + e <= capacity;
      if (!fits) continue;
      const double before = overflow(ku);
      for (std::size_t x = ku; x < i; ++x) mem[x] += e;
      load_in[ku] += tasks[i].load;
      win[i] = k;
      waits[i] = false;
      self(self, i + 1, bound - before + overflow(ku));
      load_in[ku] -= tasks[i].load;
      for (std::size_t x = ku; x < i; ++x) mem[x] -= e;
    }
    win[i] = static_cast<int>(i) - 1;
    waits[i] = true;
    self(self, i + 1, bound + tasks[i].load);
    waits[i] = false;
  };

  if (n <= 1) {
    best.total_stall = 0.0;
    best.witness.window_of.assign(n, -1);
    best.witness.waits_for_memory.assign(n, false);
    best.witness.stall_of.assign(n, 0.0);
    best.witness.relocated.assign(n, false);
    return best;
  }
  dfs(dfs, 1, 0.0);
  return best;
}

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> problems;
  void fail(std::string msg) {
    ok = false;
    problems.push_back(std::move(msg));
  }
};

// Independent plan check. Memory: sweep over residency events on a slot
// line (slot 2i = gap before tile i, slot 2i+1 = window i). Time: replays
// the params port as a continuous timeline and compares the stalls.
inline ValidationResult validate_plan(const std::vector<TileTask>& tasks, const SchedulePlan& plan,
                                      std::int64_t capacity, double tolerance = 1e-12) {
  ValidationResult r;
  const std::size_t n = tasks.size();
  if (plan.window_of.size() != n || plan.waits_for_memory.size() != n || plan.stall_of.size() != n) {
    r.fail("plan size does not match the task list");
    return r;
  }
  if (n == 0) return r;
  if (plan.window_of[0] != -1 || plan.stall_of[0] != 0.0) r.fail("tile 0 must be preloaded with no stall");
  for (std::size_t i = 1; i < n; ++i) {
    if (plan.window_of[i] < 0 || plan.window_of[i] >= static_cast<int>(i))
      r.fail("tile " + std::to_string(i) + ": load window " + std::to_string(plan.window_of[i]) + " is not before it");
    if (plan.waits_for_memory[i] && plan.window_of[i] != static_cast<int>(i) - 1)
      r.fail("tile " + std::to_string(i) + ": memory-wait load must follow its predecessor");
  }
  if (!r.ok) return r;

  struct Event {
    std::int64_t slot;
    std::int64_t delta;
  };
  std::vector<Event> events;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t start = 0;
    if (i > 0) start = plan.waits_for_memory[i] ? 2 * static_cast<std::int64_t>(i) : 2 * plan.window_of[i] + 1;
    const std::int64_t end = 2 * static_cast<std::int64_t>(i) + 1;
    events.push_back({start, tasks[i].entries});
    events.push_back({end + 1, -tasks[i].entries});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.slot != b.slot ? a.slot < b.slot : a.delta < b.delta;
  });
  std::int64_t used = 0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    used += events[e].delta;
    const bool last_at_slot = e + 1 == events.size() || events[e + 1].slot != events[e].slot;
    if (last_at_slot && used > capacity) {
      r.fail("URAM over capacity at slot " + std::to_string(events[e].slot) + ": " + std::to_string(used) + " > " +
             std::to_string(capacity));
      break;
    }
  }

  // Timeline replay.
  std::vector<std::vector<std::size_t>> loads(n);
  for (std::size_t i = 1; i < n; ++i)
    if (!plan.waits_for_memory[i]) loads[static_cast<std::size_t>(plan.window_of[i])].push_back(i);
  double start = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double port_free = start + tasks[k].port_busy;
    for (const std::size_t t : loads[k]) port_free += tasks[t].load;
    const double window_end = start + tasks[k].exec;
    double next = std::max(window_end, port_free);
    if (plan.waits_for_memory[k + 1]) next += tasks[k + 1].load;
    const double stall = next - window_end;
    if (std::abs(stall - plan.stall_of[k + 1]) > tolerance * std::max(1.0, std::abs(stall)))
      r.fail("tile " + std::to_string(k + 1) + ": recorded stall " + std::to_string(plan.stall_of[k + 1]) +
             " differs from replayed " + std::to_string(stall));
    start = next;
  }
  return r;
}

struct RatioRow {
  int tile_id = 0;
  double time_ratio = 0.0;    // e_i / l_{i+1}
  double memory_ratio = 0.0;  // peak resident entries in window i / capacity
  bool relocated = false;     // load of tile i+1 moved to an earlier window
};

using RatioReport = std::vector<RatioRow>;

inline RatioReport ratios(const std::vector<TileTask>& tasks, const SchedulePlan& plan, std::int64_t capacity) {
  RatioReport rep;
  const std::vector<std::int64_t> mem = detail::window_occupancy(tasks, plan);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    RatioRow row;
    row.tile_id = tasks[i].id;
    if (i + 1 < tasks.size()) {
      const double next_load = tasks[i + 1].load;
      row.time_ratio = next_load > 0 ? tasks[i].exec / next_load : std::numeric_limits<double>::infinity();
      row.relocated = plan.relocated.size() > i + 1 && plan.relocated[i + 1];
    } else {
      row.time_ratio = std::numeric_limits<double>::infinity();
    }
    row.memory_ratio = capacity > 0 ? static_cast<double>(mem[i]) / static_cast<double>(capacity) : 0.0;
    rep.push_back(row);
  }
  return rep;
}

// One task per weight tile, in execution order. Execution windows split the
// layer's steady-state time evenly across its tiles; residual reads are
// charged to the same windows. With `steady_state`, the reload of tile 0
// for the next pass is appended as a zero-length task.
inline std::vector<TileTask> tasks_from_model(const std::vector<LoweredLayer>& lowered,
                                              const std::vector<LayerTiming>& timings, const PUConfig& pu,
                                              const PuPorts& ports, bool steady_state = true) {
  std::vector<TileTask> tasks;
  for (std::size_t l = 0; l < lowered.size(); ++l) {
    const LoweredLayer& lw = lowered[l];
    if (lw.layer.kind == LayerKind::maxpool) continue;
    const auto tiles = tile_layer(lw.shape, pu, lw.layer.id, static_cast<int>(tasks.size()));
    const double count = static_cast<double>(tiles.size());
    const double exec = timings[l].latency_s / count;
    const double busy = static_cast<double>(timings[l].residual_cycles) / pu.f_fast / count;
    for (const auto& tile : tiles) {
      TileTask t;
      t.id = tile.tile_id;
      t.layer_id = tile.layer_id;
      t.load = weight_load_time(tile, ports.params);
      t.exec = exec;
      t.entries = tile.uram_entries;
      t.port_busy = busy;
      tasks.push_back(t);
    }
  }
  if (steady_state && !tasks.empty()) {
    TileTask reload = tasks.front();
    reload.id = static_cast<int>(tasks.size());
    reload.exec = 0.0;
    reload.port_busy = 0.0;
    tasks.push_back(reload);
  }
  return tasks;
}

inline ModelTiming model_latency(const std::vector<LoweredLayer>& lowered, const PUConfig& pu, const PuPorts& ports,
                                 const SchedulePlan& plan) {
  return model_latency(lowered, pu, ports, plan.total_stall());
}

}  // namespace gemmsim
