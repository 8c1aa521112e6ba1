#pragma once

// Layer descriptions, GEMM lowering and weight tiling.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/pu_config.hpp"

namespace gemmsim {

enum class LayerKind { conv, fc, avgpool_as_conv, maxpool };
enum class Activation { none, relu };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::fc: return "fc";
    case LayerKind::avgpool_as_conv: return "avgpool_as_conv";
    case LayerKind::maxpool: return "maxpool";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "fc") return LayerKind::fc;
  if (s == "avgpool_as_conv" || s == "avgpool") return LayerKind::avgpool_as_conv;
  if (s == "maxpool") return LayerKind::maxpool;
  throw ConfigError("unknown layer kind '" + s + "'");
}

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "none"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "none") return Activation::none;
  throw ConfigError("unknown activation '" + s + "'");
}

struct Dims {
  std::int64_t h = 0, w = 0, c = 0;
  std::int64_t size() const { return h * w * c; }
  bool operator==(const Dims&) const = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.h) + "x" + std::to_string(d.w) + "x" + std::to_string(d.c);
}

struct LayerSpec {
  int id = 0;
  LayerKind kind = LayerKind::conv;
  std::int64_t k = 1, s = 1, p = 0;
  std::int64_t c_in = 1, c_out = 1;
  std::int64_t h_in = 1, w_in = 1;
  Activation activation = Activation::none;
  std::optional<int> residual_source;
  // Layer whose output feeds this one; the previous layer when absent.
  std::optional<int> input_source;
  int weight_shift = 0, bias_shift = 0, output_shift = 0;

  std::int64_t h_out() const { return (h_in + 2 * p - k) / s + 1; }
  std::int64_t w_out() const { return (w_in + 2 * p - k) / s + 1; }

  Dims input_dims() const { return {h_in, w_in, c_in}; }

  Dims output_dims() const {
    switch (kind) {
      case LayerKind::fc: return {1, 1, c_out};
      case LayerKind::conv: return {h_out(), w_out(), c_out};
      default: return {h_out(), w_out(), c_in};
    }
  }

  // k=1, p=0, s in {1,2}: streamed linearly or with a fixed stride, no IM2COL.
  bool fast_path() const { return kind == LayerKind::conv && k == 1 && p == 0 && (s == 1 || s == 2); }

  void validate() const {
    const std::string tag = "layer " + std::to_string(id) + ": ";
    if (k < 1) throw ConfigError(tag + "k must be >= 1");
    if (s < 1) throw ConfigError(tag + "s must be >= 1");
    if (p < 0) throw ConfigError(tag + "p must be >= 0");
    if (c_in < 1 || c_out < 1) throw ConfigError(tag + "channel counts must be >= 1");
    if (h_in < 1 || w_in < 1) throw ConfigError(tag + "input spatial dims must be >= 1");
    if (output_shift < 0 || bias_shift < 0) throw ConfigError(tag + "output_shift and bias_shift must be >= 0");
    if (h_in + 2 * p < k || w_in + 2 * p < k)
      throw ShapeError(tag + "kernel larger than padded input");
    if (kind == LayerKind::fc && (k != 1 || s != 1 || p != 0 || h_in != 1 || w_in != 1))
      throw ConfigError(tag + "fc layers take a 1x1 input with k=1, s=1, p=0");
    if ((kind == LayerKind::avgpool_as_conv || kind == LayerKind::maxpool) && c_out != c_in)
      throw ConfigError(tag + "pooling layers keep the channel count");
    if (kind == LayerKind::avgpool_as_conv && p != 0)
      throw ConfigError(tag + "average pooling takes no padding");
  }
};

// Lowered N x M x P matrix product for one layer.
struct GemmShape {
  std::int64_t n = 0;         // weight rows
  std::int64_t m = 0;         // reduction length
  std::int64_t m_padded = 0;  // m rounded up to the ADM alignment
  std::int64_t p = 0;         // activation columns
  bool operator==(const GemmShape&) const = default;
};

inline GemmShape conv_to_gemm(const LayerSpec& layer) {
  const std::int64_t ho = layer.h_out();
  const std::int64_t wo = layer.w_out();
  if (ho <= 0 || wo <= 0)
    throw ShapeError("layer " + std::to_string(layer.id) + ": non-positive output dims");
  GemmShape g;
  switch (layer.kind) {
    case LayerKind::conv:
      g.n = layer.c_out;
      g.m = layer.k * layer.k * layer.c_in;
      g.p = ho * wo;
      break;
    case LayerKind::fc:
      g.n = layer.c_out;
      g.m = layer.c_in;
      g.p = 1;
      break;
    case LayerKind::avgpool_as_conv:
      // One shared row of window weights; every (pixel, channel) is a column.
      g.n = 1;
      g.m = layer.k * layer.k;
      g.p = ho * wo * layer.c_in;
      break;
    case LayerKind::maxpool:
      throw ShapeError("layer " + std::to_string(layer.id) + ": maxpool has no GEMM form");
  }
  g.m_padded = round_up(g.m, kAdmAlignBytes);
  return g;
}

// Layer whose IFM is stored with channels zero-padded to the ADM alignment,
// so every IM2COL kernel-row command is a whole number of 32-byte beats.
inline LayerSpec with_aligned_channels(LayerSpec layer) {
  layer.c_in = round_up(layer.c_in, kAdmAlignBytes);
  return layer;
}

struct TileSpec {
  int tile_id = 0;
  int layer_id = 0;
  std::int64_t rows = 0;
  std::int64_t uram_entries = 0;
  std::int64_t weight_bytes = 0;
};

inline std::vector<TileSpec> tile_layer(const GemmShape& shape, const PUConfig& pu, int layer_id = 0,
                                        int first_tile_id = 0) {
  const std::int64_t entries = ceil_div(shape.m_padded, pu.c_sa);
  if (entries > uram_capacity(pu))
    throw ConfigError("layer " + std::to_string(layer_id) + ": tile needs " + std::to_string(entries) +
                      " URAM entries, capacity is " + std::to_string(uram_capacity(pu)));
  const std::int64_t count = ceil_div(shape.n, pu.r_sa);
  std::vector<TileSpec> tiles;
  tiles.reserve(static_cast<std::size_t>(count));
  for (std::int64_t t = 0; t < count; ++t) {
    TileSpec tile;
    tile.tile_id = first_tile_id + static_cast<int>(t);
    tile.layer_id = layer_id;
    tile.rows = std::min(pu.r_sa, shape.n - t * pu.r_sa);
    tile.uram_entries = entries;
    tile.weight_bytes = tile.rows * shape.m_padded;
    tiles.push_back(tile);
  }
  return tiles;
}

// Uniform window weight q and shift with q / 2^shift ~ 1 / window^2.
struct AvgPoolQuant {
  int q = 1;
  int shift = 0;
};

inline double avgpool_relative_error(int window, int q, int shift) {
  const double target = 1.0 / static_cast<double>(window * window);
  return std::abs(std::ldexp(static_cast<double>(q), -shift) - target) / target;
}

// Exact representations take the smallest shift; otherwise the most
// precise int8 weight (largest q) among the minimal-error pairs.
inline AvgPoolQuant avgpool_quant(int window, int max_shift = 15) {
  const std::int64_t area = static_cast<std::int64_t>(window) * window;
  AvgPoolQuant best{1, 0};
  std::int64_t best_num = -1;  // |q*area - 2^s| scaled to 2^max_shift
  for (int sh = 0; sh <= max_shift; ++sh) {
    const std::int64_t pow2 = std::int64_t{1} << sh;
    std::int64_t q = (pow2 + area / 2) / area;
    if (q < 1) q = 1;
    if (q > 127) break;
    const std::int64_t num = std::abs(q * area - pow2) << (max_shift - sh);
    if (best_num < 0 || num <= best_num) {
      best = {static_cast<int>(q), sh};
      best_num = num;
    }
    if (num == 0) break;
  }
  return best;
}

// Rewrites a k x k average pool as a GEMM layer with uniform weights.
inline LayerSpec avgpool_to_conv(LayerSpec pool, AvgPoolQuant* quant_out = nullptr) {
  const AvgPoolQuant qt = avgpool_quant(static_cast<int>(pool.k));
  pool.kind = LayerKind::avgpool_as_conv;
  pool.c_out = pool.c_in;
  pool.weight_shift = qt.shift;
  pool.output_shift = qt.shift;
  pool.bias_shift = 0;
  if (quant_out) *quant_out = qt;
  return pool;
}

struct ModelGraph {
  std::string name;
  std::vector<LayerSpec> layers;

  std::size_t index_of(int id) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].id == id) return i;
    throw ConfigError("unknown layer id " + std::to_string(id));
  }

  const LayerSpec& by_id(int id) const { return layers[index_of(id)]; }

  Dims input_dims() const { return layers.empty() ? Dims{} : layers.front().input_dims(); }

  // Dims of the tensor feeding layer at index i.
  Dims source_dims(std::size_t i) const {
    const LayerSpec& l = layers[i];
    if (l.input_source) return by_id(*l.input_source).output_dims();
    if (i == 0) return l.input_dims();
    return layers[i - 1].output_dims();
  }

  void validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      l.validate();
      const std::string tag = "layer " + std::to_string(l.id) + ": ";
      if (i > 0 && l.id <= layers[i - 1].id) throw ConfigError(tag + "layer ids must be strictly increasing");
      if (l.input_source && index_of(*l.input_source) >= i)
        throw ConfigError(tag + "input_source must refer to an earlier layer");
      const Dims src = source_dims(i);
      if (l.kind == LayerKind::fc) {
        if (src.size() != l.c_in)
          throw ShapeError(tag + "fc input has " + std::to_string(src.size()) + " elements, expected " +
                           std::to_string(l.c_in));
      } else if (!(src == l.input_dims())) {
        throw ShapeError(tag + "input dims " + to_string(l.input_dims()) + " do not match producer output " +
                         to_string(src));
      }
      if (l.residual_source) {
        const std::size_t r = index_of(*l.residual_source);
        if (r >= i) throw ConfigError(tag + "residual_source must refer to an earlier layer");
        if (!(layers[r].output_dims() == l.output_dims()))
          throw ShapeError(tag + "residual branch shape " + to_string(layers[r].output_dims()) +
                           " differs from output " + to_string(l.output_dims()));
        if (l.kind == LayerKind::maxpool) throw ConfigError(tag + "maxpool cannot take a residual input");
      }
    }
  }
};

}  // namespace gemmsim
