#pragma once

// Built-in model descriptions.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gemmsim/functional.hpp"
#include "gemmsim/niu.hpp"
#include "gemmsim/workload.hpp"

namespace gemmsim::zoo {

namespace detail {

struct Builder {
  ModelGraph g;
  int next_id = 0;

  int add(LayerSpec l) {
    l.id = next_id++;
    g.layers.push_back(l);
    return l.id;
  }

  int conv(const Dims& in, std::int64_t k, std::int64_t s, std::int64_t p, std::int64_t c_out, Activation act,
           std::optional<int> input_source = {}, std::optional<int> residual = {}) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.k = k;
    l.s = s;
    l.p = p;
    l.h_in = in.h;
    l.w_in = in.w;
    l.c_in = in.c;
    l.c_out = c_out;
    l.activation = act;
    l.input_source = input_source;
    l.residual_source = residual;
    l.weight_shift = 7;
    l.bias_shift = 7;
    l.output_shift = 7;
    return add(l);
  }

  Dims out(int id) const { return g.layers[static_cast<std::size_t>(id)].output_dims(); }
};

// Stem: 7x7/2 conv + 3x3/2 max pool. Returns the pool's id.
inline int stem(Builder& b) {
  const int c1 = b.conv({224, 224, 3}, 7, 2, 3, 64, Activation::relu);
  LayerSpec pool;
  pool.kind = LayerKind::maxpool;
  pool.k = 3;
  pool.s = 2;
  pool.p = 1;
  const Dims d = b.out(c1);
  pool.h_in = d.h;
  pool.w_in = d.w;
  pool.c_in = pool.c_out = d.c;
  return b.add(pool);
}

inline void head(Builder& b, int last) {
  const Dims d = b.out(last);
  LayerSpec pool;
  pool.kind = LayerKind::avgpool_as_conv;
  pool.k = d.h;
  pool.h_in = d.h;
  pool.w_in = d.w;
  pool.c_in = pool.c_out = d.c;
  const int ap = b.add(avgpool_to_conv(pool));
  LayerSpec fc;
  fc.kind = LayerKind::fc;
  fc.c_in = b.out(ap).size();
  fc.c_out = 1000;
  fc.weight_shift = 7;
  fc.bias_shift = 7;
  fc.output_shift = 7;
  b.add(fc);
}

}  // namespace detail

// ResNet-50 with the stride on the first 1x1 of each downsampling block.
inline ModelGraph resnet50() {
  detail::Builder b;
  b.g.name = "resnet50";
  int x = detail::stem(b);
  const std::array<std::array<std::int64_t, 3>, 4> stages{{{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}}};
  for (const auto& [width, blocks, stride] : stages) {
    for (std::int64_t i = 0; i < blocks; ++i) {
      const std::int64_t s = i == 0 ? stride : 1;
      const Dims in = b.out(x);
      int shortcut = x;
      if (i == 0) shortcut = b.conv(in, 1, s, 0, width * 4, Activation::none, x);
      const int a = b.conv(in, 1, s, 0, width, Activation::relu, x);
      const int c = b.conv(b.out(a), 3, 1, 1, width, Activation::relu);
      x = b.conv(b.out(c), 1, 1, 0, width * 4, Activation::relu, {}, shortcut);
    }
  }
  detail::head(b, x);
  return b.g;
}

inline ModelGraph resnet18() {
  detail::Builder b;
  b.g.name = "resnet18";
  int x = detail::stem(b);
  const std::array<std::array<std::int64_t, 2>, 4> stages{{{64, 1}, {128, 2}, {256, 2}, {512, 2}}};
  for (const auto& [width, stride] : stages) {
    for (int i = 0; i < 2; ++i) {
      const std::int64_t s = i == 0 ? stride : 1;
      const Dims in = b.out(x);
      int shortcut = x;
      if (s != 1 || in.c != width) shortcut = b.conv(in, 1, s, 0, width, Activation::none, x);
      const int a = b.conv(in, 3, s, 1, width, Activation::relu, x);
      x = b.conv(b.out(a), 3, 1, 1, width, Activation::relu, {}, shortcut);
    }
  }
  detail::head(b, x);
  return b.g;
}

// Deterministic 64-bit stream for generating test data and weights.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return gemmsim::detail::splitmix64(state_++); }
  // Uniform integer in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double unit() { return gemmsim::detail::to_unit(next()); }

 private:
  std::uint64_t state_;
};

inline QTensor random_tensor(const Dims& d, SplitMix& rng, std::int64_t lo = -128, std::int64_t hi = 127) {
  QTensor t(d);
  for (auto& v : t.data) v = static_cast<std::int8_t>(rng.uniform(lo, hi));
  return t;
}

inline LayerParams random_layer_params(const LayerSpec& l, SplitMix& rng, std::int64_t lo = -128,
                                       std::int64_t hi = 127) {
  if (l.kind == LayerKind::avgpool_as_conv) return avgpool_params(l);
  const GemmShape g = conv_to_gemm(l);
  LayerParams lp;
  lp.weights = WeightMatrix(g.n, g.m, l.weight_shift);
  for (auto& v : lp.weights.data) v = static_cast<std::int8_t>(rng.uniform(lo, hi));
  lp.bias.values.resize(static_cast<std::size_t>(g.n));
  for (auto& v : lp.bias.values) v = static_cast<std::int8_t>(rng.uniform(lo, hi));
  lp.bias.bias_shift = l.bias_shift;
  return lp;
}

inline ModelParams random_params(const ModelGraph& g, std::uint64_t seed) {
  SplitMix rng(seed);
  ModelParams out;
  for (const auto& l : g.layers)
    if (l.kind != LayerKind::maxpool) out[l.id] = random_layer_params(l, rng);
  return out;
}

// Four-class matched-filter classifier on 4x4 single-channel images.
// Layer 0 splits the input into relu(x) and relu(-x); layer 1 correlates
// both halves against one +/-1 template per class.
inline constexpr int kToyClasses = 4;

inline std::array<std::array<int, 16>, kToyClasses> toy_templates() {
  std::array<std::array<int, 16>, kToyClasses> t{};
  // Rows 1, 2, 4 and 8 of a 16x16 Sylvester Hadamard matrix.
  const int rows[kToyClasses] = {1, 2, 4, 8};
  for (int c = 0; c < kToyClasses; ++c)
    for (int i = 0; i < 16; ++i) t[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = (__builtin_popcount(rows[c] & i) % 2) ? -1 : 1;
  return t;
}

inline ModelGraph toy_classifier() {
  ModelGraph g;
  g.name = "toy";
  LayerSpec split;
  split.id = 0;
  split.kind = LayerKind::conv;
  split.h_in = split.w_in = 4;
  split.c_in = 1;
  split.c_out = 2;
  split.activation = Activation::relu;
  split.weight_shift = 6;
  split.output_shift = 6;
  g.layers.push_back(split);
  LayerSpec fc;
  fc.id = 1;
  fc.kind = LayerKind::fc;
  fc.c_in = 32;
  fc.c_out = kToyClasses;
  fc.weight_shift = 8;
  fc.output_shift = 8;
  g.layers.push_back(fc);
  return g;
}

inline ModelParams toy_params() {
  ModelParams p;
  LayerParams split;
  split.weights = WeightMatrix(2, 1, 6);
  split.weights.at(0, 0) = 64;
  split.weights.at(1, 0) = -64;
  split.bias.values = {0, 0};
  p[0] = split;
  LayerParams fc;
  fc.weights = WeightMatrix(kToyClasses, 32, 8);
  const auto t = toy_templates();
  for (int c = 0; c < kToyClasses; ++c)
    for (int i = 0; i < 16; ++i) {
      const int v = t[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] * 32;
      fc.weights.at(c, 2 * i) = static_cast<std::int8_t>(v);
      fc.weights.at(c, 2 * i + 1) = static_cast<std::int8_t>(-v);
    }
  fc.bias.values.assign(kToyClasses, 0);
  p[1] = fc;
  return p;
}

// Balanced labeled set: template * 30 plus uniform noise in [-25, 25].
inline std::vector<LabeledSample> toy_dataset(int per_class = 25, std::uint64_t seed = 7) {
  SplitMix rng(seed);
  const auto t = toy_templates();
  std::vector<LabeledSample> out;
  for (int n = 0; n < per_class; ++n)
    for (int c = 0; c < kToyClasses; ++c) {
      LabeledSample s;
      s.label = c;
      s.x = QTensor({4, 4, 1});
      for (int i = 0; i < 16; ++i)
        s.x.data[static_cast<std::size_t>(i)] =
            saturate_int8(30 * t[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] + rng.uniform(-25, 25));
      out.push_back(std::move(s));
    }
  return out;
}

inline ModelGraph by_name(const std::string& name) {
  if (name == "resnet50") return resnet50();
  if (name == "resnet18") return resnet18();
  if (name == "toy") return toy_classifier();
  throw ConfigError("unknown built-in model '" + name + "'");
}

}  // namespace gemmsim::zoo
