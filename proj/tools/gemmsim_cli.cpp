// gemmsim command-line front end.
//
// Exit codes: 0 success, 1 configuration or input error, 2 verification
// failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gemmsim/config.hpp"
#include "gemmsim/niu.hpp"
#include "gemmsim/report.hpp"
#include "gemmsim/system.hpp"
#include "gemmsim/verify.hpp"
#include "gemmsim/zoo.hpp"

namespace fs = std::filesystem;
using namespace gemmsim;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitVerify = 2;

struct Options {
  std::string system;
  std::string model;
  std::string weights;
  std::string first_layer;
  std::optional<double> power_watts;
  std::uint64_t seed = 1;
  std::string out;
  std::string pu;
  std::string niu;
  std::string mutate = "none";
  int rounds = 20;
  std::optional<double> sigma;
  std::vector<int> targets;
  int samples = 1;
};

SystemConfig system_config(const Options& o) {
  SystemConfig cfg = o.system.empty() ? default_system() : load_system(o.system);
  if (!o.first_layer.empty()) cfg.first_layer = first_layer_mode_from_string(o.first_layer);
  if (o.power_watts) cfg.power_watts = *o.power_watts;
  if (!o.niu.empty()) cfg.niu = niu_mode_from_string(o.niu);
  cfg.validate();
  return cfg;
}

ModelGraph model(const Options& o) {
  if (o.model.empty()) throw ConfigError("--model is required");
  return load_model(o.model);
}

fs::path out_dir(const Options& o) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError(path.string() + ": cannot write file");
  return f;
}

std::vector<PuRun> pu_runs(const SystemConfig& cfg, const ModelGraph& g, const std::string& only) {
  std::vector<PuRun> runs;
  for (const auto& grp : cfg.groups) {
    if (!only.empty() && grp.pu.name != only) continue;
    PuRun r = simulate_pu(g, grp.pu, cfg.ports, cfg.first_layer);
    r.count = grp.count;
    runs.push_back(std::move(r));
  }
  if (runs.empty()) throw ConfigError("no PU named '" + only + "' in the system");
  return runs;
}

int cmd_simulate(const Options& o) {
  const SystemConfig cfg = system_config(o);
  const ModelGraph g = model(o);
  const SystemReport rep = simulate(cfg, g);
  const auto summary = report::summary_json(rep);
  std::cout << summary.dump(2) << '\n';
  if (!o.out.empty()) {
    const fs::path dir = out_dir(o);
    open_out(dir / "summary.json") << summary.dump(2) << '\n';
    for (const auto& r : rep.runs) {
      auto t = open_out(dir / ("timing_" + r.pu.name + ".csv"));
      report::timing_csv(t, r.timing.layers);
      auto p = open_out(dir / ("plan_" + r.pu.name + ".csv"));
      report::plan_csv(p, r.tasks, r.adaptive);
    }
  }
  return 0;
}

int cmd_schedule(const Options& o) {
  const SystemConfig cfg = system_config(o);
  const ModelGraph g = model(o);
  for (const auto& r : pu_runs(cfg, g, o.pu)) {
    std::cout << "# " << r.pu.name << ": " << r.tasks.size() << " tiles, capacity " << uram_capacity(r.pu)
              << " entries\n";
    report::stall_table(std::cout, r.tasks, r.baseline, r.adaptive);
    if (!o.out.empty()) {
      const fs::path dir = out_dir(o);
      auto b = open_out(dir / ("plan_" + r.pu.name + "_baseline.csv"));
      report::plan_csv(b, r.tasks, r.baseline);
      auto a = open_out(dir / ("plan_" + r.pu.name + "_adaptive.csv"));
      report::plan_csv(a, r.tasks, r.adaptive);
      auto s = open_out(dir / ("stalls_" + r.pu.name + ".csv"));
      report::stall_table(s, r.tasks, r.baseline, r.adaptive);
      auto q = open_out(dir / ("ratios_" + r.pu.name + ".csv"));
      report::ratio_csv(q, ratios(r.tasks, r.adaptive, uram_capacity(r.pu)));
    }
  }
  return 0;
}

int cmd_ratios(const Options& o) {
  const SystemConfig cfg = system_config(o);
  const ModelGraph g = model(o);
  for (const auto& r : pu_runs(cfg, g, o.pu.empty() ? cfg.groups.back().pu.name : o.pu)) {
    const RatioReport rep = ratios(r.tasks, r.adaptive, uram_capacity(r.pu));
    report::ratio_csv(std::cout, rep);
    if (!o.out.empty()) {
      auto f = open_out(out_dir(o) / ("ratios_" + r.pu.name + ".csv"));
      report::ratio_csv(f, rep);
    }
  }
  return 0;
}

int cmd_verify(const Options& o) {
  verify::VerifyOptions vo;
  vo.seed = o.seed;
  if (o.mutate == "rescale_off_by_one") {
    // Rounds ties the wrong way: a deliberately broken rescale.
    vo.rescale_impl = [](std::int32_t acc, int s) {
      if (s <= 0) return saturate_int8(acc);
      const std::int64_t bias = (std::int64_t{1} << (s - 1)) - 1;
      const std::int64_t mag = acc < 0 ? -static_cast<std::int64_t>(acc) : acc;
      const std::int64_t q = (mag + bias) >> s;
      return saturate_int8(acc < 0 ? -q : q);
    };
  } else if (o.mutate != "none") {
    throw ConfigError("unknown mutation '" + o.mutate + "'");
  }
  const auto results = verify::run_all(vo);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.ok() ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases, " << r.failures
              << " failures)\n";
    for (const auto& m : r.messages) std::cout << "  " << m << '\n';
    ok = ok && r.ok();
  }
  return ok ? 0 : kExitVerify;
}

int cmd_emulate(const Options& o) {
  std::optional<SystemConfig> cfg;
  if (!o.system.empty()) cfg = load_system(o.system);
  const ModelGraph g = load_model(o.model.empty() ? "toy" : o.model);
  const bool toy = g.name == "toy";  // has a labeled synthetic dataset

  ModelParams params;
  if (!o.weights.empty()) params = load_weights(o.weights);
  else if (toy) params = zoo::toy_params();
  else throw ConfigError("--weights is required for model '" + g.name + "'");
  check_weights(g, params);

  NoiseSpec spec;
  if (cfg && cfg->noise) spec = *cfg->noise;
  else
    for (const auto& l : g.layers)
      if (params.count(l.id)) spec.target_layers.insert(l.id);
  if (o.sigma) spec.sigma_rel = *o.sigma;
  if (!o.targets.empty()) spec.target_layers = {o.targets.begin(), o.targets.end()};
  spec.seed = o.seed;
  spec.validate();
  if (o.rounds < 1) throw ConfigError("--rounds must be >= 1");

  WeightStore store(params);
  const std::uint64_t hash_before = store.noiseless_hash();
  nlohmann::ordered_json summary;
  summary["model"] = g.name;
  summary["sigma_rel"] = report::fixed(spec.sigma_rel);
  summary["seed"] = spec.seed;
  summary["rounds"] = o.rounds;
  summary["target_layers"] = spec.target_layers;

  std::optional<report::ActivationDumper> dumper;
  if (!o.out.empty()) dumper.emplace(out_dir(o) / "activations");

  if (toy) {
    const auto data = zoo::toy_dataset();
    const AccuracyStats st = accuracy_eval(g, data, store, spec, o.rounds);
    summary["samples"] = data.size();
    summary["accuracy_mean"] = report::fixed(st.mean);
    summary["accuracy_std"] = report::fixed(st.stddev);
    summary["per_round"] = nlohmann::ordered_json::array();
    for (const double a : st.per_round) summary["per_round"].push_back(report::fixed(a));
    summary["niu_bytes_per_round"] = st.niu_bytes_per_round;
    if (dumper)
      for (int r = 0; r < o.rounds; ++r)
        for (int s = 0; s < std::min<int>(o.samples, static_cast<int>(data.size())); ++s) {
          const auto res = emulate_round(g, data[static_cast<std::size_t>(s)].x, store, spec, static_cast<std::uint64_t>(r));
          dumper->add(g, res.activations, static_cast<std::uint64_t>(r), s);
        }
  } else {
    zoo::SplitMix rng(o.seed);
    const QTensor x = zoo::random_tensor(g.input_dims(), rng);
    std::int64_t bytes = 0;
    for (int r = 0; r < o.rounds; ++r) {
      const auto res = emulate_round(g, x, store, spec, static_cast<std::uint64_t>(r));
      bytes = res.niu_bytes;
      if (dumper) dumper->add(g, res.activations, static_cast<std::uint64_t>(r));
    }
    summary["niu_bytes_per_round"] = bytes;
  }
  if (store.noiseless_hash() != hash_before) throw Error("noiseless weight region was modified");
  summary["noiseless_hash"] = store.noiseless_hash();
  if (dumper) {
    dumper->finish();
    open_out(out_dir(o) / "emulate.json") << summary.dump(2) << '\n';
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and INT8 functional model of a multi-PU systolic-array GEMM accelerator"};
  app.require_subcommand(1);
  Options o;

  auto add_system = [&](CLI::App* c) {
    c->add_option("--system", o.system, "System config JSON (default: 5 x pu1x + 5 x pu2x)");
    c->add_option("--model", o.model, "Model config JSON or built-in name (resnet18, resnet50, toy)");
    c->add_option("--first-layer", o.first_layer, "First-layer lowering")->check(CLI::IsMember({"host", "fpga"}));
    c->add_option("--out", o.out, "Output directory for reports");
  };

  auto* sim = app.add_subcommand("simulate", "Per-PU latency, FPS, TOPS and efficiency");
  add_system(sim);
  sim->add_option("--power-watts", o.power_watts, "Wall power for FPS/W");
  sim->add_option("--niu", o.niu, "NIU placement")->check(CLI::IsMember({"none", "replace", "share"}));

  auto* sched = app.add_subcommand("schedule", "Baseline and adaptive weight-transfer plans");
  add_system(sched);
  sched->add_option("--pu", o.pu, "Only this PU type");

  auto* rat = app.add_subcommand("ratios", "Time and memory ratio report of the adaptive plan");
  add_system(rat);
  rat->add_option("--pu", o.pu, "PU type (default: last in the system)");

  auto* ver = app.add_subcommand("verify", "Randomized oracle-equivalence suites");
  ver->add_option("--seed", o.seed, "Random seed");
  ver->add_option("--mutate", o.mutate, "Inject a known defect")
      ->check(CLI::IsMember({"none", "rescale_off_by_one"}))
      ->group("Testing");

  auto* emu = app.add_subcommand("emulate", "Noise-injection rounds and accuracy statistics");
  emu->add_option("--system", o.system, "System config JSON with a noise block");
  emu->add_option("--model", o.model, "Model config JSON or built-in name (default: toy)");
  emu->add_option("--weights", o.weights, "Weight manifest JSON");
  emu->add_option("--seed", o.seed, "Noise seed");
  emu->add_option("--sigma", o.sigma, "Noise std-dev relative to max |w|")->check(CLI::NonNegativeNumber);
  emu->add_option("--rounds", o.rounds, "Inference rounds");
  emu->add_option("--targets", o.targets, "Layer ids receiving noise (default: all)");
  emu->add_option("--samples", o.samples, "Samples per round to dump when --out is set");
  emu->add_option("--out", o.out, "Output directory for activation dumps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*sched) return cmd_schedule(o);
    if (*rat) return cmd_ratios(o);
    if (*ver) return cmd_verify(o);
    if (*emu) return cmd_emulate(o);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
