#pragma once

// Randomized oracle-equivalence suites behind `gemmsim verify`.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gemmsim/functional.hpp"
#include "gemmsim/hbm.hpp"
#include "gemmsim/oracle.hpp"
#include "gemmsim/scheduler.hpp"
#include "gemmsim/workload.hpp"
#include "gemmsim/zoo.hpp"

namespace gemmsim::verify {

struct SuiteResult {
  std::string name;
  std::int64_t cases = 0;
  std::int64_t failures = 0;
  std::vector<std::string> messages;  // first few failures
  bool ok() const { return failures == 0; }

  void fail(const std::string& msg) {
    ++failures;
    if (messages.size() < 5) messages.push_back(msg);
  }
};

using RescaleFn = std::function<std::int8_t(std::int32_t, int)>;

inline std::string describe(const LayerSpec& l) {
  std::ostringstream os;
  os << to_string(l.kind) << " k=" << l.k << " s=" << l.s << " p=" << l.p << " in=" << l.h_in << "x" << l.w_in << "x"
     << l.c_in << " c_out=" << l.c_out;
  return os.str();
}

// Random conv or fc layer with dims <= 16, k in {1,3,7}, s in {1,2},
// p in {0,1,3}.
inline LayerSpec random_layer(zoo::SplitMix& rng, int id = 0) {
  LayerSpec l;
  l.id = id;
  if (rng.uniform(0, 4) == 0) {
    l.kind = LayerKind::fc;
    l.c_in = rng.uniform(1, 16);
  } else {
    static constexpr std::int64_t ks[] = {1, 3, 7};
    static constexpr std::int64_t ps[] = {0, 1, 3};
    l.kind = LayerKind::conv;
    l.k = ks[rng.uniform(0, 2)];
    l.s = rng.uniform(1, 2);
    l.p = ps[rng.uniform(0, 2)];
    l.c_in = rng.uniform(1, 16);
    const std::int64_t lo = std::max<std::int64_t>(1, l.k - 2 * l.p);
    l.h_in = rng.uniform(lo, 16);
    l.w_in = rng.uniform(lo, 16);
  }
  l.c_out = rng.uniform(1, 16);
  l.activation = rng.uniform(0, 1) ? Activation::relu : Activation::none;
  l.weight_shift = static_cast<int>(rng.uniform(0, 8));
  l.bias_shift = static_cast<int>(rng.uniform(0, 4));
  l.output_shift = static_cast<int>(rng.uniform(0, 12));
  return l;
}

inline SuiteResult rescale_suite(std::uint64_t seed, std::int64_t random_cases = 200000,
                                 const RescaleFn& impl = [](std::int32_t a, int s) { return rescale(a, s); }) {
  SuiteResult r;
  r.name = "rescale";
  auto check = [&](std::int32_t acc, int s) {
    ++r.cases;
    const std::int8_t got = impl(acc, s);
    const std::int8_t want = oracle::rescale_exact(acc, s);
    if (got != want)
      r.fail("rescale(" + std::to_string(acc) + ", " + std::to_string(s) + ") = " + std::to_string(got) +
             ", expected " + std::to_string(want));
  };
  for (int s = 0; s <= 16; ++s)
    for (std::int32_t acc = -1200; acc <= 1200; ++acc) check(acc, s);
  zoo::SplitMix rng(seed);
  for (std::int64_t i = 0; i < random_cases; ++i)
    check(static_cast<std::int32_t>(rng.uniform(-(std::int64_t{1} << 27), std::int64_t{1} << 27)),
          static_cast<int>(rng.uniform(0, 24)));
  return r;
}

// IM2COL + GEMM + rescale against a direct convolution.
inline SuiteResult functional_suite(std::uint64_t seed, int count = 500) {
  SuiteResult r;
  r.name = "functional";
  zoo::SplitMix rng(seed);
  for (int i = 0; i < count; ++i) {
    const LayerSpec l = random_layer(rng, i);
    const LayerParams lp = zoo::random_layer_params(l, rng);
    const QTensor x = zoo::random_tensor(l.input_dims(), rng);
    ++r.cases;
    const QTensor got = run_layer(l, x, &lp);
    const QTensor want = oracle::reference_layer(l, x, &lp);
    if (got.data != want.data || !(got.dims == want.dims)) r.fail("mismatch on " + describe(l));
  }
  return r;
}

inline SuiteResult maxpool_suite(std::uint64_t seed, int count = 200) {
  SuiteResult r;
  r.name = "maxpool";
  zoo::SplitMix rng(seed);
  for (int i = 0; i < count; ++i) {
    const std::int64_t k = rng.uniform(1, 4), s = rng.uniform(1, 3), p = rng.uniform(0, k / 2);
    const Dims d{rng.uniform(k, 12), rng.uniform(k, 12), rng.uniform(1, 8)};
    const QTensor x = zoo::random_tensor(d, rng);
    ++r.cases;
    if (maxpool(x, k, s, p).data != oracle::naive_maxpool(x, k, s, p).data)
      r.fail("maxpool k=" + std::to_string(k) + " s=" + std::to_string(s) + " p=" + std::to_string(p));
  }
  return r;
}

// ADM command replay against the functional IM2COL. Layers whose kernel
// rows are under 32 bytes must be rejected, then are checked again with
// the channel-padded IFM.
inline SuiteResult hbm_suite(std::uint64_t seed, int count = 200) {
  SuiteResult r;
  r.name = "hbm";
  zoo::SplitMix rng(seed);
  const HbmPortConfig port;
  for (int i = 0; i < count; ++i) {
    LayerSpec l = random_layer(rng, i);
    if (l.kind == LayerKind::fc) {
      l.kind = LayerKind::conv;
      l.h_in = l.w_in = rng.uniform(1, 16);
    }
    QTensor x = zoo::random_tensor(l.input_dims(), rng);
    ++r.cases;
    if (!l.fast_path() && l.k * l.c_in < kAdmAlignBytes) {
      bool threw = false;
      try {
        (void)im2col_commands(l, 0, port);
      } catch (const Im2colUnsupported&) {
        threw = true;
      }
      if (!threw) r.fail("short kernel rows accepted: " + describe(l));
      l = with_aligned_channels(l);
      x = pad_channels(x, l.c_in);
    }
    const std::int64_t base = 32 * rng.uniform(0, 1000);
    const TransferPlan plan = im2col_commands(l, base, port);
    for (const auto& c : plan.commands)
      if (c.kind == CmdKind::read && (c.len < kAdmAlignBytes || c.len % kAdmAlignBytes != 0)) {
        r.fail("command of " + std::to_string(c.len) + " bytes on " + describe(l));
        break;
      }
    try {
      if (!(reconstruct_matrix(plan, x) == im2col(x, l))) r.fail("replay differs on " + describe(l));
    } catch (const Error& e) {
      r.fail(std::string(e.what()) + " on " + describe(l));
    }
  }
  return r;
}

// Random scheduling instance: n in [1, max_n], loads and execution windows
// in [0, 20], footprints in [1, 100], capacity from the max footprint up to
// roughly four tiles.
inline std::vector<TileTask> random_tasks(zoo::SplitMix& rng, int max_n, std::int64_t& capacity) {
  const int n = static_cast<int>(rng.uniform(1, max_n));
  std::vector<TileTask> tasks(static_cast<std::size_t>(n));
  std::int64_t peak = 0;
  for (int i = 0; i < n; ++i) {
    TileTask& t = tasks[static_cast<std::size_t>(i)];
    t.id = i;
    t.load = rng.uniform(0, 4) == 0 ? 0.0 : 20.0 * rng.unit();
    t.exec = 20.0 * rng.unit();
    t.entries = rng.uniform(1, 100);
    if (rng.uniform(0, 3) == 0) t.port_busy = t.exec * rng.unit() * 0.5;
    peak = std::max(peak, t.entries);
  }
  capacity = peak + rng.uniform(0, 300);
  return tasks;
}

// The e=[20,5,5], l=[-,10,10] pattern scaled by `f`: one relocation
// removes the only stall.
inline std::vector<TileTask> relocation_pattern(double f, std::int64_t entries = 10) {
  std::vector<TileTask> t(3);
  const double e[] = {20, 5, 5}, ld[] = {0, 10, 10};
  for (int i = 0; i < 3; ++i) {
    t[static_cast<std::size_t>(i)].id = i;
    t[static_cast<std::size_t>(i)].exec = e[i] * f;
    t[static_cast<std::size_t>(i)].load = ld[i] * f;
    t[static_cast<std::size_t>(i)].entries = entries;
  }
  return t;
}

inline SuiteResult scheduler_suite(std::uint64_t seed, int count = 1000, int pattern_count = 50) {
  SuiteResult r;
  r.name = "scheduler";
  zoo::SplitMix rng(seed);
  constexpr double eps = 1e-9;
  auto check_one = [&](const std::vector<TileTask>& tasks, std::int64_t cap, const std::string& tag) {
    ++r.cases;
    const SchedulePlan base = baseline_schedule(tasks, cap);
    const SchedulePlan adapt = adaptive_refine(base, tasks, cap);
    const BruteForceResult opt = brute_force_schedule(tasks, cap);
    const double b = base.total_stall(), a = adapt.total_stall(), o = opt.total_stall;
    if (!(o <= a + eps && a <= b + eps)) {
      std::ostringstream os;
      os << tag << ": optimal " << o << ", adaptive " << a << ", baseline " << b;
      r.fail(os.str());
    }
    for (const SchedulePlan* p : {&base, &adapt, &opt.witness}) {
      const ValidationResult v = validate_plan(tasks, *p, cap, 1e-9);
      if (!v.ok) r.fail(tag + ": plan rejected by validator: " + v.problems.front());
    }
    return std::make_pair(b, a);
  };
  for (int i = 0; i < count; ++i) {
    std::int64_t cap = 0;
    const auto tasks = random_tasks(rng, static_cast<int>(kBruteForceMaxTiles), cap);
    check_one(tasks, cap, "instance " + std::to_string(i));
  }
  for (int i = 0; i < pattern_count; ++i) {
    const double f = 0.1 + 10.0 * rng.unit();
    const auto [b, a] = check_one(relocation_pattern(f), 1000, "pattern " + std::to_string(i));
    if (!(a < b - eps) || std::abs(a) > eps)
      r.fail("pattern " + std::to_string(i) + ": adaptive did not remove the stall (" + std::to_string(b) + " -> " +
             std::to_string(a) + ")");
  }
  return r;
}

struct VerifyOptions {
  std::uint64_t seed = 1;
  int functional_cases = 500;
  int hbm_cases = 200;
  int scheduler_cases = 1000;
  RescaleFn rescale_impl = [](std::int32_t a, int s) { return rescale(a, s); };
};

inline std::vector<SuiteResult> run_all(const VerifyOptions& opt) {
  return {rescale_suite(opt.seed, 200000, opt.rescale_impl), functional_suite(opt.seed + 1, opt.functional_cases),
          maxpool_suite(opt.seed + 2), hbm_suite(opt.seed + 3, opt.hbm_cases),
          scheduler_suite(opt.seed + 4, opt.scheduler_cases)};
}

}  // namespace gemmsim::verify
