#pragma once

// Noise injection unit: each inference round, weights of the targeted
// layers are read from an untouched noiseless region, perturbed, and
// written over the region the PU reads from.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/functional.hpp"
#include "gemmsim/workload.hpp"

namespace gemmsim {

enum class NoiseModel { additive_gaussian };

inline NoiseModel noise_model_from_string(const std::string& s) {
  if (s == "additive_gaussian") return NoiseModel::additive_gaussian;
  throw ConfigError("unknown noise model '" + s + "'");
}

struct NoiseSpec {
  NoiseModel model = NoiseModel::additive_gaussian;
  double sigma_rel = 0.0;  // std-dev as a fraction of max |w| of the layer
  std::uint64_t seed = 0;
  std::set<int> target_layers;

  void validate() const {
    if (!(sigma_rel >= 0.0)) throw ConfigError("noise sigma_rel must be >= 0");
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1] from the top 53 bits.
inline double to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

}  // namespace detail

// Standard normal sample addressed by (seed, layer, round, index); no state
// is carried between calls, so rounds and elements can be drawn in any order.
inline double keyed_normal(std::uint64_t seed, int layer, std::uint64_t round, std::uint64_t index) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(layer)));
  h = detail::splitmix64(h ^ round);
  h = detail::splitmix64(h ^ index);
  const double u1 = detail::to_unit(h);
  const double u2 = detail::to_unit(detail::splitmix64(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline WeightMatrix inject_noise(const WeightMatrix& w, const NoiseSpec& spec, int layer_id, std::uint64_t round) {
  spec.validate();
  WeightMatrix out = w;
  if (spec.sigma_rel == 0.0) return out;
  int max_abs = 0;
  for (const auto v : w.data) max_abs = std::max(max_abs, std::abs(static_cast<int>(v)));
  const double sigma = spec.sigma_rel * max_abs;
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    const double noisy = w.data[i] + sigma * keyed_normal(spec.seed, layer_id, round, i);
    out.data[i] = saturate_int8(std::llround(noisy));
  }
  return out;
}

// Noiseless weights are fixed at construction; the working copy is what
// inference reads and is rewritten every round.
class WeightStore {
 public:
  WeightStore() = default;
  explicit WeightStore(ModelParams params) : noiseless_(std::move(params)), working_(noiseless_) {}

  const ModelParams& noiseless() const { return noiseless_; }
  const ModelParams& working() const { return working_; }

  // Rewrites the working region for one round. Returns the bytes the NIU
  // moves (read + write of every targeted weight matrix).
  std::int64_t refresh(const NoiseSpec& spec, std::uint64_t round) {
    std::int64_t bytes = 0;
    for (const auto& [id, lp] : noiseless_) {
      LayerParams& dst = working_.at(id);
      if (spec.target_layers.count(id)) {
        dst.weights = inject_noise(lp.weights, spec, id, round);
        bytes += 2 * static_cast<std::int64_t>(lp.weights.data.size());
      } else if (!(dst.weights == lp.weights)) {
        dst.weights = lp.weights;
      }
    }
    return bytes;
  }

  // FNV-1a over the noiseless weights and biases.
  std::uint64_t noiseless_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](std::uint8_t b) {
      h ^= b;
      h *= 0x100000001B3ULL;
    };
    for (const auto& [id, lp] : noiseless_) {
      for (int s = 0; s < 4; ++s) mix(static_cast<std::uint8_t>(id >> (8 * s)));
      for (const auto v : lp.weights.data) mix(static_cast<std::uint8_t>(v));
      for (const auto v : lp.bias.values) mix(static_cast<std::uint8_t>(v));
    }
    return h;
  }

 private:
  ModelParams noiseless_;
  ModelParams working_;
};

struct RoundResult {
  std::vector<QTensor> activations;  // every layer's output, in layer order
  std::int64_t niu_bytes = 0;
};

inline RoundResult emulate_round(const ModelGraph& g, const QTensor& x, WeightStore& store, const NoiseSpec& spec,
                                 std::uint64_t round) {
  RoundResult r;
  r.niu_bytes = store.refresh(spec, round);
  r.activations = run_model(g, x, store.working());
  return r;
}

struct LabeledSample {
  QTensor x;
  int label = 0;
};

// Index of the largest logit; the lowest index wins ties.
inline int predict(const QTensor& logits) {
  return static_cast<int>(std::max_element(logits.data.begin(), logits.data.end()) - logits.data.begin());
}

struct AccuracyStats {
  std::vector<double> per_round;
  double mean = 0.0;
  double stddev = 0.0;  // population std over rounds
  std::int64_t niu_bytes_per_round = 0;
};

inline AccuracyStats accuracy_eval(const ModelGraph& g, const std::vector<LabeledSample>& dataset, WeightStore& store,
                                   const NoiseSpec& spec, int rounds) {
  if (rounds < 1) throw ConfigError("accuracy_eval: rounds must be >= 1");
  if (dataset.empty()) throw ConfigError("accuracy_eval: empty dataset");
  AccuracyStats st;
  for (int r = 0; r < rounds; ++r) {
    st.niu_bytes_per_round = store.refresh(spec, static_cast<std::uint64_t>(r));
    int correct = 0;
    for (const auto& s : dataset) {
      const auto outs = run_model(g, s.x, store.working());
      correct += predict(outs.back()) == s.label;
    }
    st.per_round.push_back(static_cast<double>(correct) / static_cast<double>(dataset.size()));
  }
  for (const double a : st.per_round) st.mean += a;
  st.mean /= rounds;
  for (const double a : st.per_round) st.stddev += (a - st.mean) * (a - st.mean);
  st.stddev = std::sqrt(st.stddev / rounds);
  return st;
}

}  // namespace gemmsim
