#pragma once

// JSON model, system and weight-manifest I/O.
//
// Errors carry the file name and, where the text is available, the line of
// the offending record.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gemmsim/common.hpp"
#include "gemmsim/functional.hpp"
#include "gemmsim/niu.hpp"
#include "gemmsim/system.hpp"
#include "gemmsim/workload.hpp"
#include "gemmsim/zoo.hpp"

namespace gemmsim {

using json = nlohmann::json;

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is 1-based and points just past the offending character.
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, col] = line_col(text, at);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error: " +
                      e.what());
  }
}

// Line on which each element of the top-level array `key` starts.
inline std::vector<std::size_t> record_lines(const std::string& text, const std::string& key) {
  std::vector<std::size_t> lines;
  std::size_t line = 1;
  int depth = 0;
  bool in_string = false, escaped = false;
  int array_depth = -1;  // depth inside the wanted array, -1 when not in it
  std::string last_string;
  std::string current;
  bool expect_value_of_key = false;
  for (char ch : text) {
    if (ch == '\n') ++line;
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
        last_string = current;
      } else {
        current += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_string = true;
        current.clear();
        break;
      case ':':
        expect_value_of_key = depth == 1 && last_string == key;
        break;
      case '[':
        ++depth;
        if (expect_value_of_key) array_depth = depth;
        expect_value_of_key = false;
        break;
      case '{':
        ++depth;
        if (array_depth >= 0 && depth == array_depth + 1) lines.push_back(line);
        expect_value_of_key = false;
        break;
      case ']':
        if (depth == array_depth) array_depth = -1;
        --depth;
        break;
      case '}':
        --depth;
        break;
      default:
        break;
    }
  }
  return lines;
}

inline std::string where(const std::string& origin, const std::vector<std::size_t>& lines, std::size_t index) {
  if (index < lines.size()) return origin + ":" + std::to_string(lines[index]);
  return origin;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing required field '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace detail

// ---- model ----

inline LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  l.id = detail::require<int>(j, "id");
  std::string kind = detail::require<std::string>(j, "kind");
  if (kind == "avgpool") kind = "avgpool_as_conv";
  l.kind = layer_kind_from_string(kind);
  l.k = detail::get_or<std::int64_t>(j, "k", 1);
  l.s = detail::get_or<std::int64_t>(j, "s", 1);
  l.p = detail::get_or<std::int64_t>(j, "p", 0);
  l.c_in = detail::require<std::int64_t>(j, "c_in");
  const bool pool = l.kind == LayerKind::avgpool_as_conv || l.kind == LayerKind::maxpool;
  l.c_out = pool ? detail::get_or<std::int64_t>(j, "c_out", l.c_in) : detail::require<std::int64_t>(j, "c_out");
  const bool fc = l.kind == LayerKind::fc;
  l.h_in = fc ? detail::get_or<std::int64_t>(j, "h_in", 1) : detail::require<std::int64_t>(j, "h_in");
  l.w_in = fc ? detail::get_or<std::int64_t>(j, "w_in", 1) : detail::require<std::int64_t>(j, "w_in");
  l.activation = activation_from_string(detail::get_or<std::string>(j, "activation", "none"));
  if (j.contains("residual_source") && !j.at("residual_source").is_null())
    l.residual_source = j.at("residual_source").get<int>();
  if (j.contains("input_source") && !j.at("input_source").is_null()) l.input_source = j.at("input_source").get<int>();
  l.weight_shift = detail::get_or<int>(j, "weight_shift", 0);
  l.bias_shift = detail::get_or<int>(j, "bias_shift", 0);
  l.output_shift = detail::get_or<int>(j, "output_shift", 0);
  if (l.kind == LayerKind::avgpool_as_conv && !j.contains("weight_shift") && !j.contains("output_shift")) {
    const LayerSpec lowered = avgpool_to_conv(l);
    l.weight_shift = lowered.weight_shift;
    l.output_shift = lowered.output_shift;
  }
  return l;
}

inline json layer_to_json(const LayerSpec& l) {
  json j;
  j["id"] = l.id;
  j["kind"] = to_string(l.kind);
  j["k"] = l.k;
  j["s"] = l.s;
  j["p"] = l.p;
  j["c_in"] = l.c_in;
  j["c_out"] = l.c_out;
  j["h_in"] = l.h_in;
  j["w_in"] = l.w_in;
  j["activation"] = to_string(l.activation);
  j["residual_source"] = l.residual_source ? json(*l.residual_source) : json(nullptr);
  if (l.input_source) j["input_source"] = *l.input_source;
  j["weight_shift"] = l.weight_shift;
  j["bias_shift"] = l.bias_shift;
  j["output_shift"] = l.output_shift;
  return j;
}

inline ModelGraph model_from_text(const std::string& text, const std::string& origin) {
  const json doc = detail::parse_json(text, origin);
  const auto lines = detail::record_lines(text, "layers");
  ModelGraph g;
  try {
    g.name = detail::get_or<std::string>(doc, "name", std::filesystem::path(origin).stem().string());
    if (!doc.contains("layers") || !doc.at("layers").is_array())
      throw ConfigError("model needs a 'layers' array");
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  const json& arr = doc.at("layers");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    try {
      g.layers.push_back(layer_from_json(arr[i]));
    } catch (const json::exception& e) {
      throw ConfigError(detail::where(origin, lines, i) + ": layer record " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(detail::where(origin, lines, i) + ": layer record " + std::to_string(i) + ": " + e.what());
    }
  }
  try {
    g.validate();
  } catch (const Error& e) {
    // Point at the record the message names, when it names one.
    std::string msg = e.what();
    std::string loc = origin;
    if (msg.rfind("layer ", 0) == 0) {
      const int id = std::atoi(msg.c_str() + 6);
      for (std::size_t i = 0; i < g.layers.size(); ++i)
        if (g.layers[i].id == id) loc = detail::where(origin, lines, i);
    }
    throw ConfigError(loc + ": " + msg);
  }
  return g;
}

inline json model_to_json(const ModelGraph& g) {
  json j;
  j["name"] = g.name;
  j["layers"] = json::array();
  for (const auto& l : g.layers) j["layers"].push_back(layer_to_json(l));
  return j;
}

// A path to a JSON model, or the name of a built-in model.
inline ModelGraph load_model(const std::string& path_or_name) {
  if (!std::filesystem::exists(path_or_name)) {
    if (path_or_name.find('/') == std::string::npos && path_or_name.find(".json") == std::string::npos)
      return zoo::by_name(path_or_name);
    throw ConfigError(path_or_name + ": cannot open file");
  }
  return model_from_text(detail::read_file(path_or_name), path_or_name);
}

// ---- system ----

inline HbmPortConfig port_from_json(const json& j, HbmPortConfig port) {
  port.width_bits = detail::get_or<std::int64_t>(j, "width_bits", port.width_bits);
  port.clock_hz = detail::get_or<double>(j, "clock_hz", port.clock_hz);
  port.efficiency = detail::get_or<double>(j, "efficiency", port.efficiency);
  port.cmd_overhead_cycles = detail::get_or<std::int64_t>(j, "cmd_overhead_cycles", port.cmd_overhead_cycles);
  return port;
}

inline json port_to_json(const HbmPortConfig& p) {
  return {{"width_bits", p.width_bits},
          {"clock_hz", p.clock_hz},
          {"efficiency", p.efficiency},
          {"cmd_overhead_cycles", p.cmd_overhead_cycles}};
}

inline PUConfig pu_from_json(const json& j) {
  const std::string preset = detail::get_or<std::string>(j, "preset", "");
  PUConfig pu;
  if (preset == "pu1x") pu = pu_1x();
  else if (preset == "pu2x" || preset.empty()) pu = pu_2x();
  else throw ConfigError("unknown PU preset '" + preset + "'");
  pu.name = detail::get_or<std::string>(j, "name", preset.empty() ? pu.name : preset);
  pu.r_sa = detail::get_or<std::int64_t>(j, "r_sa", pu.r_sa);
  pu.c_sa = detail::get_or<std::int64_t>(j, "c_sa", pu.c_sa);
  pu.r_g = detail::get_or<std::int64_t>(j, "r_g", pu.r_g);
  pu.f_fast = detail::get_or<double>(j, "f_fast", pu.f_fast);
  pu.f_sys = detail::get_or<double>(j, "f_sys", pu.f_sys);
  pu.uram_blocks = detail::get_or<std::int64_t>(j, "uram_blocks", pu.uram_blocks);
  pu.uram_depth = detail::get_or<std::int64_t>(j, "uram_depth", pu.uram_depth);
  pu.sub_regions = detail::get_or<std::int64_t>(j, "sub_regions", pu.sub_regions);
  pu.fill_cycles = detail::get_or<std::int64_t>(j, "fill_cycles", default_fill_cycles(pu.r_sa, pu.c_sa));
  return pu;
}

inline NoiseSpec noise_from_json(const json& j) {
  NoiseSpec n;
  n.model = noise_model_from_string(detail::get_or<std::string>(j, "model", "additive_gaussian"));
  n.sigma_rel = detail::get_or<double>(j, "sigma_rel", 0.0);
  n.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("target_layers"))
    for (const auto& id : j.at("target_layers")) n.target_layers.insert(id.get<int>());
  n.validate();
  return n;
}

inline SystemConfig system_from_text(const std::string& text, const std::string& origin) {
  const json doc = detail::parse_json(text, origin);
  const auto pu_lines = detail::record_lines(text, "pus");
  SystemConfig cfg;
  cfg.groups.clear();
  try {
    if (!doc.contains("pus") || !doc.at("pus").is_array() || doc.at("pus").empty())
      throw ConfigError("system needs a non-empty 'pus' array");
    const json& pus = doc.at("pus");
    for (std::size_t i = 0; i < pus.size(); ++i) {
      try {
        PuGroup grp;
        grp.pu = pu_from_json(pus[i]);
        grp.count = detail::get_or<int>(pus[i], "count", 1);
        grp.pu.validate();
        if (grp.count < 0) throw ConfigError("count must be >= 0");
        cfg.groups.push_back(grp);
      } catch (const json::exception& e) {
        throw ConfigError(detail::where(origin, pu_lines, i) + ": PU record " + std::to_string(i) + ": " + e.what());
      } catch (const ConfigError& e) {
        throw ConfigError(detail::where(origin, pu_lines, i) + ": PU record " + std::to_string(i) + ": " + e.what());
      }
    }
    if (doc.contains("ports")) {
      const json& ports = doc.at("ports");
      if (ports.contains("io")) cfg.ports.io = port_from_json(ports.at("io"), cfg.ports.io);
      if (ports.contains("params")) cfg.ports.params = port_from_json(ports.at("params"), cfg.ports.params);
    }
    if (doc.contains("hbm_regions"))
      for (const auto& r : doc.at("hbm_regions"))
        cfg.regions.push_back({detail::require<std::string>(r, "pu"), detail::require<std::string>(r, "role"),
                               detail::require<int>(r, "channel")});
    const std::string first = detail::get_or<std::string>(doc, "first_layer", "host");
    cfg.first_layer = first_layer_mode_from_string(first);
    if (doc.contains("power_watts") && !doc.at("power_watts").is_null())
      cfg.power_watts = doc.at("power_watts").get<double>();
    if (doc.contains("noise")) cfg.noise = noise_from_json(doc.at("noise"));
    if (doc.contains("niu")) {
      cfg.niu = niu_mode_from_string(detail::get_or<std::string>(doc.at("niu"), "mode", "none"));
      cfg.niu_replaces = detail::get_or<std::string>(doc.at("niu"), "replaces", cfg.niu_replaces);
    }
    cfg.validate();
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(origin, 0) == 0) throw;
    throw ConfigError(origin + ": " + msg);
  }
  return cfg;
}

inline SystemConfig load_system(const std::string& path) {
  return system_from_text(detail::read_file(path), path);
}

inline json system_to_json(const SystemConfig& cfg) {
  json j;
  j["pus"] = json::array();
  for (const auto& g : cfg.groups) {
    const PUConfig& p = g.pu;
    j["pus"].push_back({{"name", p.name},
                        {"count", g.count},
                        {"r_sa", p.r_sa},
                        {"c_sa", p.c_sa},
                        {"r_g", p.r_g},
                        {"f_fast", p.f_fast},
                        {"f_sys", p.f_sys},
                        {"uram_blocks", p.uram_blocks},
                        {"uram_depth", p.uram_depth},
                        {"sub_regions", p.sub_regions},
                        {"fill_cycles", p.fill_cycles}});
  }
  j["ports"] = {{"io", port_to_json(cfg.ports.io)}, {"params", port_to_json(cfg.ports.params)}};
  j["hbm_regions"] = json::array();
  for (const auto& r : cfg.regions) j["hbm_regions"].push_back({{"pu", r.pu}, {"role", r.role}, {"channel", r.channel}});
  j["first_layer"] = to_string(cfg.first_layer);
  j["power_watts"] = cfg.power_watts ? json(*cfg.power_watts) : json(nullptr);
  j["niu"] = {{"mode", to_string(cfg.niu)}, {"replaces", cfg.niu_replaces}};
  if (cfg.noise) {
    json n = {{"model", "additive_gaussian"}, {"sigma_rel", cfg.noise->sigma_rel}, {"seed", cfg.noise->seed}};
    n["target_layers"] = json::array();
    for (const int id : cfg.noise->target_layers) n["target_layers"].push_back(id);
    j["noise"] = n;
  }
  return j;
}

// ---- weights ----
//
// Manifest: {"layers": [{"layer", "n", "m", "weight_shift", "bias_shift",
// "weights": file, "bias": file}]}. Blobs are raw int8, row-major; paths
// are relative to the manifest.

inline void write_blob(const std::filesystem::path& path, const std::vector<std::int8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path.string() + ": cannot write file");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

inline std::vector<std::int8_t> read_blob(const std::filesystem::path& path, std::size_t expected) {
  const std::string raw = detail::read_file(path);
  if (raw.size() != expected)
    throw ConfigError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(raw.size()));
  return {raw.begin(), raw.end()};
}

inline void save_weights(const std::filesystem::path& manifest, const ModelParams& params) {
  const auto dir = manifest.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  json j;
  j["layers"] = json::array();
  for (const auto& [id, lp] : params) {
    const std::string wname = "layer" + std::to_string(id) + ".weights.bin";
    const std::string bname = "layer" + std::to_string(id) + ".bias.bin";
    write_blob(dir / wname, lp.weights.data);
    write_blob(dir / bname, lp.bias.values);
    j["layers"].push_back({{"layer", id},
                           {"n", lp.weights.n},
                           {"m", lp.weights.m},
                           {"weight_shift", lp.weights.shift},
                           {"bias_shift", lp.bias.bias_shift},
                           {"weights", wname},
                           {"bias", bname}});
  }
  std::ofstream out(manifest);
  if (!out) throw ConfigError(manifest.string() + ": cannot write file");
  out << j.dump(2) << '\n';
}

inline ModelParams load_weights(const std::filesystem::path& manifest) {
  const std::string text = detail::read_file(manifest);
  const json doc = detail::parse_json(text, manifest.string());
  const auto lines = detail::record_lines(text, "layers");
  const auto dir = manifest.parent_path();
  ModelParams params;
  if (!doc.contains("layers") || !doc.at("layers").is_array())
    throw ConfigError(manifest.string() + ": manifest needs a 'layers' array");
  const json& arr = doc.at("layers");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    try {
      const json& r = arr[i];
      const int id = detail::require<int>(r, "layer");
      LayerParams lp;
      const auto n = detail::require<std::int64_t>(r, "n");
      const auto m = detail::require<std::int64_t>(r, "m");
      if (n < 1 || m < 1) throw ConfigError("n and m must be >= 1");
      lp.weights = WeightMatrix(n, m, detail::get_or<int>(r, "weight_shift", 0));
      lp.weights.data = read_blob(dir / detail::require<std::string>(r, "weights"), static_cast<std::size_t>(n * m));
      lp.bias.bias_shift = detail::get_or<int>(r, "bias_shift", 0);
      if (r.contains("bias")) lp.bias.values = read_blob(dir / r.at("bias").get<std::string>(), static_cast<std::size_t>(n));
      else lp.bias.values.assign(static_cast<std::size_t>(n), 0);
      params[id] = std::move(lp);
    } catch (const json::exception& e) {
      throw ConfigError(detail::where(manifest.string(), lines, i) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(detail::where(manifest.string(), lines, i) + ": " + e.what());
    }
  }
  return params;
}

// Checks weights against the model: every GEMM layer present with n x m.
inline void check_weights(const ModelGraph& g, const ModelParams& params) {
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::maxpool || l.kind == LayerKind::avgpool_as_conv) continue;
    const auto it = params.find(l.id);
    if (it == params.end()) throw ConfigError("weights: no entry for layer " + std::to_string(l.id));
    const GemmShape s = conv_to_gemm(l);
    if (it->second.weights.n != s.n || it->second.weights.m != s.m)
      throw ConfigError("weights: layer " + std::to_string(l.id) + " is " + std::to_string(it->second.weights.n) +
                        "x" + std::to_string(it->second.weights.m) + ", model expects " + std::to_string(s.n) + "x" +
                        std::to_string(s.m));
  }
}

}  // namespace gemmsim
