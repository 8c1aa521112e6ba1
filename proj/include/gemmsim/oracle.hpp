#pragma once

// Naive reference implementations. These share data types with the
// functional engine but none of its code paths: no IM2COL, no GEMM, no
// shift-based rounding. Used by the verify suites and the tests.

#include <cstdint>
#include <vector>

#include "gemmsim/functional.hpp"

namespace gemmsim::oracle {

// acc / 2^s rounded to nearest with ties away from zero, via floor division
// and an explicit remainder comparison, then clamped.
inline std::int8_t rescale_exact(std::int64_t acc, int s) {
  std::int64_t y = acc;
  if (s > 0) {
    const std::int64_t den = std::int64_t{1} << s;
    std::int64_t q = acc / den;
    std::int64_t r = acc % den;
    if (r < 0) {  // floor semantics
      q -= 1;
      r += den;
    }
    if (2 * r > den) q += 1;
    else if (2 * r == den && acc >= 0) q += 1;  // tie: away from zero for positives
    y = q;
  }
  if (y > 127) return 127;
  if (y < -128) return -128;
  return static_cast<std::int8_t>(y);
}

// Six-loop direct convolution producing wide accumulators, (oy, ox, co) order.
inline std::vector<std::int64_t> direct_conv_acc(const QTensor& x, const LayerSpec& l, const LayerParams& lp) {
  const std::int64_t ho = l.h_out(), wo = l.w_out();
  std::vector<std::int64_t> acc(static_cast<std::size_t>(ho * wo * l.c_out));
  for (std::int64_t oy = 0; oy < ho; ++oy)
    for (std::int64_t ox = 0; ox < wo; ++ox)
      for (std::int64_t co = 0; co < l.c_out; ++co) {
        std::int64_t sum = static_cast<std::int64_t>(lp.bias.values[static_cast<std::size_t>(co)]) *
                           (std::int64_t{1} << lp.bias.bias_shift);
        for (std::int64_t ky = 0; ky < l.k; ++ky)
          for (std::int64_t kx = 0; kx < l.k; ++kx)
            for (std::int64_t ci = 0; ci < l.c_in; ++ci) {
              const std::int64_t iy = oy * l.s - l.p + ky;
              const std::int64_t ix = ox * l.s - l.p + kx;
              if (iy < 0 || ix < 0 || iy >= l.h_in || ix >= l.w_in) continue;
              const std::int64_t widx = co * l.k * l.k * l.c_in + (ky * l.k + kx) * l.c_in + ci;
              const std::int64_t xv = x.data[static_cast<std::size_t>((iy * l.w_in + ix) * l.c_in + ci)];
              sum += static_cast<std::int64_t>(lp.weights.data[static_cast<std::size_t>(widx)]) * xv;
            }
        acc[static_cast<std::size_t>((oy * wo + ox) * l.c_out + co)] = sum;
      }
  return acc;
}

inline QTensor naive_maxpool(const QTensor& x, std::int64_t k, std::int64_t s, std::int64_t p) {
  const std::int64_t ho = (x.dims.h + 2 * p - k) / s + 1;
  const std::int64_t wo = (x.dims.w + 2 * p - k) / s + 1;
  QTensor out({ho, wo, x.dims.c}, x.shift);
  for (std::int64_t oy = 0; oy < ho; ++oy)
    for (std::int64_t ox = 0; ox < wo; ++ox)
      for (std::int64_t ch = 0; ch < x.dims.c; ++ch) {
        bool seen = false;
        std::int8_t best = 0;
        for (std::int64_t iy = oy * s - p; iy < oy * s - p + k; ++iy)
          for (std::int64_t ix = ox * s - p; ix < ox * s - p + k; ++ix) {
            if (iy < 0 || ix < 0 || iy >= x.dims.h || ix >= x.dims.w) continue;
            const std::int8_t v = x.at(iy, ix, ch);
            if (!seen || v > best) best = v;
            seen = true;
          }
        out.at(oy, ox, ch) = best;
      }
  return out;
}

// Reference for one layer: direct convolution / dot product / window sum,
// exact rescale, then the residual add and activation.
inline QTensor reference_layer(const LayerSpec& l, const QTensor& x, const LayerParams* lp,
                               const QTensor* residual = nullptr) {
  auto finish = [&](std::int64_t v, std::size_t idx) {
    std::int64_t y = rescale_exact(v, l.output_shift);
    if (residual) {
      y += residual->data[idx];
      y = y > 127 ? 127 : (y < -128 ? -128 : y);
    }
    if (l.activation == Activation::relu && y < 0) y = 0;
    return static_cast<std::int8_t>(y);
  };
  if (l.kind == LayerKind::maxpool) {
    QTensor out = naive_maxpool(x, l.k, l.s, l.p);
    if (l.activation == Activation::relu)
      for (auto& v : out.data) v = v < 0 ? 0 : v;
    return out;
  }
  const Dims od = l.output_dims();
  if (l.kind == LayerKind::avgpool_as_conv) {
    const AvgPoolQuant qt = avgpool_quant(static_cast<int>(l.k));
    QTensor out(od, x.shift + l.weight_shift - l.output_shift);
    for (std::int64_t oy = 0; oy < od.h; ++oy)
      for (std::int64_t ox = 0; ox < od.w; ++ox)
        for (std::int64_t ch = 0; ch < od.c; ++ch) {
          std::int64_t sum = 0;
          for (std::int64_t ky = 0; ky < l.k; ++ky)
            for (std::int64_t kx = 0; kx < l.k; ++kx) sum += x.at(oy * l.s + ky, ox * l.s + kx, ch);
          const std::size_t idx = out.offset(oy, ox, ch);
          out.data[idx] = finish(sum * qt.q, idx);
        }
    return out;
  }
  QTensor out(od, x.shift + lp->weights.shift - l.output_shift);
  if (l.kind == LayerKind::fc) {
    for (std::int64_t co = 0; co < l.c_out; ++co) {
      std::int64_t sum = static_cast<std::int64_t>(lp->bias.values[static_cast<std::size_t>(co)])
                         << lp->bias.bias_shift;
      for (std::int64_t i = 0; i < l.c_in; ++i)
        sum += static_cast<std::int64_t>(lp->weights.data[static_cast<std::size_t>(co * l.c_in + i)]) *
               x.data[static_cast<std::size_t>(i)];
      out.data[static_cast<std::size_t>(co)] = finish(sum, static_cast<std::size_t>(co));
    }
    return out;
  }
  const std::vector<std::int64_t> acc = direct_conv_acc(x, l, *lp);
  for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = finish(acc[i], i);
  return out;
}

inline std::vector<QTensor> reference_model(const ModelGraph& g, const QTensor& x, const ModelParams& params) {
  std::vector<QTensor> outs;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const LayerSpec& l = g.layers[i];
    const QTensor* in = l.input_source ? &outs[g.index_of(*l.input_source)] : (i == 0 ? &x : &outs[i - 1]);
    const QTensor* res = l.residual_source ? &outs[g.index_of(*l.residual_source)] : nullptr;
    auto it = params.find(l.id);
    outs.push_back(reference_layer(l, *in, it == params.end() ? nullptr : &it->second, res));
  }
  return outs;
}

}  // namespace gemmsim::oracle
