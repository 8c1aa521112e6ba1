#pragma once

// Cycle model of one PU. A layer runs as P x ceil(N/R_SA) input rounds of
// ceil(M/C_SA) fast cycles each; the I/O port, the WRB drain and the
// residual stream on the params port all run concurrently with the array,
// so the steady-state layer time is the slowest of those terms plus the
// pipeline fill.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/hbm.hpp"
#include "gemmsim/pu_config.hpp"
#include "gemmsim/workload.hpp"

namespace gemmsim {

enum class Bound { compute, input, output, params };

inline std::string to_string(Bound b) {
  switch (b) {
    case Bound::compute: return "compute";
    case Bound::input: return "input";
    case Bound::output: return "output";
    case Bound::params: return "params";
  }
  return "?";
}

// How the first convolution is fed. `host` streams a host-built IM2COL
// matrix as a plain GEMM; `fpga` uses the ADM IM2COL unit.
enum class FirstLayerMode { host, fpga };

struct PuPorts {
  HbmPortConfig io;      // activations in, results out
  HbmPortConfig params;  // weights, biases, residual inputs
};

inline std::int64_t compute_cycles(const GemmShape& shape, const PUConfig& pu) {
  return shape.p * ceil_div(shape.n, pu.r_sa) * ceil_div(shape.m_padded, pu.c_sa) + pu.fill_cycles;
}

// WRB keeps up when its R_g-byte drain outpaces one wave per round.
inline bool wrb_ok(const GemmShape& shape, const PUConfig& pu) {
  const std::int64_t interval = ceil_div(shape.m_padded, pu.c_sa);
  return pu.r_g * interval >= pu.r_sa;
}

inline std::int64_t output_cycles(const GemmShape& shape, const PUConfig& pu) {
  const std::int64_t interval = ceil_div(shape.m_padded, pu.c_sa);
  return shape.p * ceil_div(shape.n, pu.r_sa) * std::max(interval, pu.r_sa / pu.r_g);
}

// A layer as it is actually fed to a PU: the GEMM shape plus HBM traffic.
struct LoweredLayer {
  LayerSpec layer;
  GemmShape shape;
  TrafficSummary input;
  TrafficSummary output;
  TrafficSummary residual;
  bool host_im2col = false;      // first layer streamed as a host-built matrix
  bool channel_padded = false;   // IFM stored with channels padded to 32 bytes
  std::int64_t useful_macs = 0;  // n * m * p of the unpadded layer
};

inline LoweredLayer lower_layer(const LayerSpec& layer, bool first_conv, FirstLayerMode mode) {
  LoweredLayer lw;
  lw.layer = layer;
  if (layer.kind == LayerKind::maxpool) return lw;
  lw.shape = conv_to_gemm(layer);
  lw.useful_macs = lw.shape.n * lw.shape.m * lw.shape.p;

  const Dims od = layer.output_dims();
  const std::int64_t out_rows = od.h;
  const std::int64_t out_row_bytes = round_up(od.w * od.c, kAdmAlignBytes);
  lw.output = {out_row_bytes * out_rows, out_rows, 0};
  if (layer.residual_source) lw.residual = lw.output;

  switch (layer.kind) {
    case LayerKind::fc:
      lw.input = {lw.shape.m_padded, 1, 0};
      break;
    case LayerKind::avgpool_as_conv:
      lw.input = {layer.h_in * round_up(layer.w_in * layer.c_in, kAdmAlignBytes), layer.h_in, 0};
      break;
    case LayerKind::conv:
      if (first_conv && mode == FirstLayerMode::host && !layer.fast_path()) {
        lw.host_im2col = true;
        lw.input = {lw.shape.p * lw.shape.m_padded, layer.h_out(), 0};
      } else {
        LayerSpec fed = layer;
        if (!fed.fast_path() && fed.k * fed.c_in < kAdmAlignBytes) {
          fed = with_aligned_channels(fed);
          lw.channel_padded = true;
        }
        lw.layer = fed;
        lw.shape = conv_to_gemm(fed);
        lw.input = im2col_traffic(fed);
      }
      break;
    case LayerKind::maxpool:
      break;
  }
  return lw;
}

// Lowers every layer; the first convolution follows `mode`.
inline std::vector<LoweredLayer> lower_model(const ModelGraph& g, FirstLayerMode mode) {
  std::vector<LoweredLayer> out;
  bool seen_conv = false;
  for (const auto& l : g.layers) {
    const bool first_conv = l.kind == LayerKind::conv && !seen_conv;
    seen_conv = seen_conv || l.kind == LayerKind::conv;
    out.push_back(lower_layer(l, first_conv, mode));
  }
  return out;
}

struct LayerTiming {
  int layer_id = 0;
  LayerKind kind = LayerKind::conv;
  GemmShape shape;
  // Steady-state terms in fast cycles.
  std::int64_t compute_cycles = 0;
  std::int64_t input_cycles = 0;   // I/O port: reads plus result writes
  std::int64_t output_cycles = 0;  // WRB drain
  std::int64_t weight_cycles = 0;  // params port time to load every tile once
  std::int64_t residual_cycles = 0;
  std::int64_t fill_cycles = 0;
  std::int64_t tiles = 0;
  double latency_s = 0.0;
  Bound bound = Bound::compute;
  bool wrb_ok = true;

  std::int64_t latency_cycles() const {
    return std::max({compute_cycles, input_cycles, output_cycles, residual_cycles}) + fill_cycles;
  }
};

inline std::int64_t to_fast_cycles(std::int64_t port_cycles, const HbmPortConfig& port, const PUConfig& pu) {
  return static_cast<std::int64_t>(std::ceil(static_cast<double>(port_cycles) * pu.f_fast / port.clock_hz - 1e-9));
}

inline LayerTiming layer_latency(const LoweredLayer& lw, const PUConfig& pu, const PuPorts& ports) {
  LayerTiming t;
  t.layer_id = lw.layer.id;
  t.kind = lw.layer.kind;
  t.shape = lw.shape;
  if (lw.layer.kind == LayerKind::maxpool) return t;  // fused into post-processing

  t.compute_cycles = compute_cycles(lw.shape, pu) - pu.fill_cycles;
  t.output_cycles = output_cycles(lw.shape, pu);
  t.wrb_ok = wrb_ok(lw.shape, pu);
  const std::int64_t io = transfer_cycles(lw.input.bytes, lw.input.commands, ports.io) +
                          transfer_cycles(lw.output.bytes, lw.output.commands, ports.io);
  t.input_cycles = to_fast_cycles(io, ports.io, pu);
  if (lw.residual.bytes > 0)
    t.residual_cycles =
        to_fast_cycles(transfer_cycles(lw.residual.bytes, lw.residual.commands, ports.params), ports.params, pu);
  t.tiles = ceil_div(lw.shape.n, pu.r_sa);
  for (const auto& tile : tile_layer(lw.shape, pu, lw.layer.id))
    t.weight_cycles += to_fast_cycles(transfer_cycles(tile.weight_bytes, 1, ports.params), ports.params, pu);
  t.fill_cycles = pu.fill_cycles;

  const std::int64_t terms[] = {t.compute_cycles, t.input_cycles, t.output_cycles, t.residual_cycles};
  const Bound names[] = {Bound::compute, Bound::input, Bound::output, Bound::params};
  std::size_t arg = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (terms[i] > terms[arg]) arg = i;
  t.bound = names[arg];
  t.latency_s = static_cast<double>(t.latency_cycles()) / pu.f_fast;
  return t;
}

inline std::vector<LayerTiming> layer_timings(const std::vector<LoweredLayer>& lowered, const PUConfig& pu,
                                              const PuPorts& ports) {
  std::vector<LayerTiming> out;
  out.reserve(lowered.size());
  for (const auto& lw : lowered) out.push_back(layer_latency(lw, pu, ports));
  return out;
}

struct ModelTiming {
  std::vector<LayerTiming> layers;
  double compute_s = 0.0;  // sum of steady-state layer latencies
  double stall_s = 0.0;    // weight-load stalls from the schedule
  double latency_s = 0.0;
};

// Sum of layer latencies plus the schedule's weight-load stall time.
inline ModelTiming model_latency(const std::vector<LoweredLayer>& lowered, const PUConfig& pu, const PuPorts& ports,
                                 double stall_s) {
  ModelTiming mt;
  mt.layers = layer_timings(lowered, pu, ports);
  for (const auto& t : mt.layers) mt.compute_s += t.latency_s;
  mt.stall_s = stall_s;
  mt.latency_s = mt.compute_s + stall_s;
  return mt;
}

// INT8 operations (2 per MAC) of one inference over the unpadded layers.
inline double model_ops(const std::vector<LoweredLayer>& lowered) {
  double macs = 0.0;
  for (const auto& lw : lowered) macs += static_cast<double>(lw.useful_macs);
  return 2.0 * macs;
}

}  // namespace gemmsim
