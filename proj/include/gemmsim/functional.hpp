#pragma once

// Bit-exact INT8 model of the PU datapath: IM2COL lowering, GEMM with
// shifted bias, power-of-two rescale, ReLU, saturating residual add and
// max pooling. Serves as the reference for everything the timing model
// abstracts.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/workload.hpp"

namespace gemmsim {

// INT8 activations in height-width-channel order; real value = q * 2^-shift.
struct QTensor {
  Dims dims;
  std::vector<std::int8_t> data;
  int shift = 0;

  QTensor() = default;
  QTensor(Dims d, int sh = 0) : dims(d), data(static_cast<std::size_t>(d.size()), 0), shift(sh) {}

  std::size_t offset(std::int64_t y, std::int64_t x, std::int64_t ch) const {
    return static_cast<std::size_t>((y * dims.w + x) * dims.c + ch);
  }
  std::int8_t at(std::int64_t y, std::int64_t x, std::int64_t ch) const { return data[offset(y, x, ch)]; }
  std::int8_t& at(std::int64_t y, std::int64_t x, std::int64_t ch) { return data[offset(y, x, ch)]; }
};

// Row-major INT8 matrix. IM2COL output is (m_padded x p): column j is the
// patch of output pixel j.
struct Int8Matrix {
  std::int64_t rows = 0, cols = 0;
  std::vector<std::int8_t> data;

  Int8Matrix() = default;
  Int8Matrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0) {}

  std::int8_t at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
  std::int8_t& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
  bool operator==(const Int8Matrix&) const = default;
};

// n x m weights, rows = output channels, row layout = IM2COL patch order.
struct WeightMatrix {
  std::int64_t n = 0, m = 0;
  std::vector<std::int8_t> data;
  int shift = 0;

  WeightMatrix() = default;
  WeightMatrix(std::int64_t rows, std::int64_t cols, int sh = 0)
      : n(rows), m(cols), data(static_cast<std::size_t>(rows * cols), 0), shift(sh) {}

  std::int8_t at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * m + c)]; }
  std::int8_t& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * m + c)]; }
  bool operator==(const WeightMatrix&) const = default;
};

struct BiasVector {
  std::vector<std::int8_t> values;
  int bias_shift = 0;
};

struct AccMatrix {
  std::int64_t n = 0, p = 0;
  std::vector<std::int32_t> data;

  std::int32_t at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * p + c)]; }
};

struct LayerParams {
  WeightMatrix weights;
  BiasVector bias;
};

using ModelParams = std::map<int, LayerParams>;

inline std::int8_t saturate_int8(std::int64_t v) {
  return static_cast<std::int8_t>(std::clamp<std::int64_t>(v, -128, 127));
}

// Round to nearest, ties away from zero, then saturate.
inline std::int8_t rescale(std::int32_t acc, int output_shift) {
  if (output_shift <= 0) return saturate_int8(acc);
  const std::int64_t mag = acc < 0 ? -static_cast<std::int64_t>(acc) : acc;
  const std::int64_t q = (mag + (std::int64_t{1} << (output_shift - 1))) >> output_shift;
  return saturate_int8(acc < 0 ? -q : q);
}

inline std::int8_t relu(std::int8_t x) { return x < 0 ? std::int8_t{0} : x; }

inline std::int8_t residual_add(std::int8_t a, std::int8_t b) {
  return saturate_int8(static_cast<std::int64_t>(a) + b);
}

inline std::int8_t apply_activation(std::int8_t x, Activation act) {
  return act == Activation::relu ? relu(x) : x;
}

inline QTensor residual_add(const QTensor& a, const QTensor& b) {
  if (!(a.dims == b.dims)) throw ShapeError("residual_add: dims " + to_string(a.dims) + " vs " + to_string(b.dims));
  if (a.shift != b.shift)
    throw ShapeError("residual_add: scale mismatch (shift " + std::to_string(a.shift) + " vs " +
                     std::to_string(b.shift) + ")");
  QTensor out(a.dims, a.shift);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = residual_add(a.data[i], b.data[i]);
  return out;
}

inline Int8Matrix im2col(const QTensor& x, const LayerSpec& layer) {
  if (!(x.dims == layer.input_dims()))
    throw ShapeError("im2col: input " + to_string(x.dims) + " does not match layer " + to_string(layer.input_dims()));
  const GemmShape g = conv_to_gemm(layer);
  const std::int64_t ho = layer.h_out(), wo = layer.w_out();
  const std::int64_t k = layer.k, c = layer.c_in;
  Int8Matrix out(g.m_padded, g.p);
  for (std::int64_t oy = 0; oy < ho; ++oy) {
    for (std::int64_t ox = 0; ox < wo; ++ox) {
      const std::int64_t col = oy * wo + ox;
      for (std::int64_t ky = 0; ky < k; ++ky) {
        const std::int64_t iy = oy * layer.s - layer.p + ky;
        if (iy < 0 || iy >= layer.h_in) continue;
        for (std::int64_t kx = 0; kx < k; ++kx) {
          const std::int64_t ix = ox * layer.s - layer.p + kx;
          if (ix < 0 || ix >= layer.w_in) continue;
          const std::int64_t row0 = (ky * k + kx) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) out.at(row0 + ch, col) = x.at(iy, ix, ch);
        }
      }
    }
  }
  return out;
}

// Activation matrix seen by the SA for any GEMM-lowered layer.
inline Int8Matrix lower_activations(const QTensor& x, const LayerSpec& layer) {
  const GemmShape g = conv_to_gemm(layer);
  switch (layer.kind) {
    case LayerKind::conv:
      return im2col(x, layer);
    case LayerKind::fc: {
      if (x.dims.size() != layer.c_in) throw ShapeError("fc: input size mismatch");
      Int8Matrix out(g.m_padded, 1);
      for (std::int64_t i = 0; i < layer.c_in; ++i) out.at(i, 0) = x.data[static_cast<std::size_t>(i)];
      return out;
    }
    case LayerKind::avgpool_as_conv: {
      if (!(x.dims == layer.input_dims())) throw ShapeError("avgpool: input dims mismatch");
      const std::int64_t wo = layer.w_out(), c = layer.c_in;
      Int8Matrix out(g.m_padded, g.p);
      for (std::int64_t oy = 0; oy < layer.h_out(); ++oy)
        for (std::int64_t ox = 0; ox < wo; ++ox)
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::int64_t col = (oy * wo + ox) * c + ch;
            for (std::int64_t ky = 0; ky < layer.k; ++ky)
              for (std::int64_t kx = 0; kx < layer.k; ++kx)
                out.at(ky * layer.k + kx, col) = x.at(oy * layer.s + ky, ox * layer.s + kx, ch);
          }
      return out;
    }
    case LayerKind::maxpool:
      break;
  }
  throw ShapeError("lower_activations: maxpool has no GEMM form");
}

inline AccMatrix gemm_int8(const WeightMatrix& w, const Int8Matrix& x, const BiasVector& b) {
  if (w.m != x.rows)
    throw ShapeError("gemm: weight width " + std::to_string(w.m) + " != activation rows " + std::to_string(x.rows));
  if (static_cast<std::int64_t>(b.values.size()) != w.n)
    throw ShapeError("gemm: bias length " + std::to_string(b.values.size()) + " != " + std::to_string(w.n));
  AccMatrix acc{w.n, x.cols, std::vector<std::int32_t>(static_cast<std::size_t>(w.n * x.cols))};
  std::vector<std::int32_t> column(static_cast<std::size_t>(x.rows));
  for (std::int64_t j = 0; j < x.cols; ++j) {
    for (std::int64_t r = 0; r < x.rows; ++r) column[static_cast<std::size_t>(r)] = x.at(r, j);
    for (std::int64_t i = 0; i < w.n; ++i) {
      std::int32_t sum = static_cast<std::int32_t>(b.values[static_cast<std::size_t>(i)]) * (1 << b.bias_shift);
      const std::int8_t* row = w.data.data() + i * w.m;
      for (std::int64_t r = 0; r < w.m; ++r) sum += static_cast<std::int32_t>(row[r]) * column[static_cast<std::size_t>(r)];
      acc.data[static_cast<std::size_t>(i * x.cols + j)] = sum;
    }
  }
  return acc;
}

// Zero columns appended up to the padded reduction length.
inline WeightMatrix pad_weights(const WeightMatrix& w, std::int64_t m_padded) {
  if (m_padded < w.m) throw ShapeError("pad_weights: target narrower than matrix");
  WeightMatrix out(w.n, m_padded, w.shift);
  for (std::int64_t i = 0; i < w.n; ++i)
    std::copy_n(w.data.begin() + i * w.m, w.m, out.data.begin() + i * m_padded);
  return out;
}

// Padding positions never win the max.
inline QTensor maxpool(const QTensor& x, std::int64_t k, std::int64_t s, std::int64_t p) {
  if (k < 1 || s < 1 || p < 0 || p >= k) throw ShapeError("maxpool: invalid window");
  const std::int64_t ho = (x.dims.h + 2 * p - k) / s + 1;
  const std::int64_t wo = (x.dims.w + 2 * p - k) / s + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("maxpool: window larger than input");
  QTensor out({ho, wo, x.dims.c}, x.shift);
  for (std::int64_t oy = 0; oy < ho; ++oy)
    for (std::int64_t ox = 0; ox < wo; ++ox)
      for (std::int64_t ch = 0; ch < x.dims.c; ++ch) {
        int best = std::numeric_limits<int>::min();
        for (std::int64_t ky = 0; ky < k; ++ky) {
          const std::int64_t iy = oy * s - p + ky;
          if (iy < 0 || iy >= x.dims.h) continue;
          for (std::int64_t kx = 0; kx < k; ++kx) {
            const std::int64_t ix = ox * s - p + kx;
            if (ix < 0 || ix >= x.dims.w) continue;
            best = std::max<int>(best, x.at(iy, ix, ch));
          }
        }
        out.at(oy, ox, ch) = static_cast<std::int8_t>(best);
      }
  return out;
}

// Weights of an average-pool layer lowered to a single-row GEMM.
inline LayerParams avgpool_params(const LayerSpec& layer) {
  const AvgPoolQuant qt = avgpool_quant(static_cast<int>(layer.k));
  LayerParams lp;
  lp.weights = WeightMatrix(1, layer.k * layer.k, layer.weight_shift);
  std::fill(lp.weights.data.begin(), lp.weights.data.end(), static_cast<std::int8_t>(qt.q));
  lp.bias.values.assign(1, 0);
  lp.bias.bias_shift = layer.bias_shift;
  return lp;
}

// One layer through lowering, GEMM, rescale, residual add and activation.
// For layers with a residual input the activation follows the add.
inline QTensor run_layer(const LayerSpec& layer, const QTensor& input, const LayerParams* params,
                         const QTensor* residual = nullptr) {
  if (layer.kind == LayerKind::maxpool) {
    QTensor out = maxpool(input, layer.k, layer.s, layer.p);
    for (auto& v : out.data) v = apply_activation(v, layer.activation);
    return out;
  }
  LayerParams pool_params;
  if (layer.kind == LayerKind::avgpool_as_conv && params == nullptr) {
    pool_params = avgpool_params(layer);
    params = &pool_params;
  }
  if (params == nullptr) throw ConfigError("layer " + std::to_string(layer.id) + ": missing weights");
  const GemmShape g = conv_to_gemm(layer);
  if (params->weights.n != g.n || params->weights.m != g.m)
    throw ShapeError("layer " + std::to_string(layer.id) + ": weights are " + std::to_string(params->weights.n) + "x" +
                     std::to_string(params->weights.m) + ", expected " + std::to_string(g.n) + "x" +
                     std::to_string(g.m));
  const Int8Matrix x = lower_activations(input, layer);
  const AccMatrix acc = gemm_int8(pad_weights(params->weights, g.m_padded), x, params->bias);

  const Dims od = layer.output_dims();
  QTensor out(od, input.shift + params->weights.shift - layer.output_shift);
  if (layer.kind == LayerKind::avgpool_as_conv) {
    for (std::int64_t j = 0; j < g.p; ++j)
      out.data[static_cast<std::size_t>(j)] = rescale(acc.at(0, j), layer.output_shift);
  } else {
    for (std::int64_t j = 0; j < g.p; ++j)
      for (std::int64_t ch = 0; ch < g.n; ++ch)
        out.data[static_cast<std::size_t>(j * g.n + ch)] = rescale(acc.at(ch, j), layer.output_shift);
  }
  if (residual != nullptr) out = residual_add(out, *residual);
  for (auto& v : out.data) v = apply_activation(v, layer.activation);
  return out;
}

// Runs every layer in order and keeps all intermediate outputs.
inline std::vector<QTensor> run_model(const ModelGraph& g, const QTensor& x, const ModelParams& params) {
  g.validate();
  if (!(x.dims == g.input_dims()) && !(g.layers.front().kind == LayerKind::fc && x.dims.size() == g.layers.front().c_in))
    throw ShapeError("run_model: input " + to_string(x.dims) + " does not match model input " +
                     to_string(g.input_dims()));
  std::vector<QTensor> outs;
  outs.reserve(g.layers.size());
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const LayerSpec& l = g.layers[i];
    const QTensor* in = &x;
    if (l.input_source) in = &outs[g.index_of(*l.input_source)];
    else if (i > 0) in = &outs[i - 1];
    const QTensor* res = l.residual_source ? &outs[g.index_of(*l.residual_source)] : nullptr;
    auto it = params.find(l.id);
    outs.push_back(run_layer(l, *in, it == params.end() ? nullptr : &it->second, res));
  }
  return outs;
}

}  // namespace gemmsim
