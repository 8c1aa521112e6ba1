#pragma once

// HBM port bandwidth and ADM command streams, including the IM2COL
// address/length generator that lets the data mover assemble patches
// directly from an HWC feature map.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gemmsim/common.hpp"
#include "gemmsim/functional.hpp"
#include "gemmsim/workload.hpp"

namespace gemmsim {

struct HbmPortConfig {
  std::int64_t width_bits = 256;
  double clock_hz = 300e6;
  double efficiency = 0.90;  // sustained fraction of peak
  std::int64_t cmd_overhead_cycles = 4;

  std::int64_t bytes_per_cycle() const { return width_bits / 8; }

  void validate() const {
    if (width_bits != 256 && width_bits != 128) throw ConfigError("HBM port width must be 256 or 128 bits");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ConfigError("HBM port efficiency must be in (0, 1]");
    if (clock_hz <= 0) throw ConfigError("HBM port clock must be positive");
    if (cmd_overhead_cycles < 0) throw ConfigError("HBM command overhead must be >= 0");
  }
};

// Port clock cycles to move `bytes` with `n_commands` ADM commands.
inline std::int64_t transfer_cycles(std::int64_t bytes, std::int64_t n_commands, const HbmPortConfig& port) {
  if (bytes < 0) throw Error("transfer_cycles: negative byte count");
  const std::int64_t beats = ceil_div(bytes, port.bytes_per_cycle());
  // The epsilon keeps exact quotients such as 9 / 0.9 from rounding up.
  const auto stretched = static_cast<std::int64_t>(std::ceil(static_cast<double>(beats) / port.efficiency - 1e-9));
  return stretched + n_commands * port.cmd_overhead_cycles;
}

inline double transfer_seconds(std::int64_t bytes, std::int64_t n_commands, const HbmPortConfig& port) {
  return static_cast<double>(transfer_cycles(bytes, n_commands, port)) / port.clock_hz;
}

enum class CmdKind { read, zfill };

// One ADM read, or a zero-fill directive synthesized in the activation
// buffer. A read delivers `valid` bytes (of `len` fetched) as `ncols`
// consecutive chunks into columns col, col+1, ..., each at patch row `dst`.
struct AdmCommand {
  CmdKind kind = CmdKind::read;
  std::int64_t addr = 0;
  std::int64_t len = 0;
  std::int64_t valid = 0;
  std::int64_t col = 0;
  std::int64_t ncols = 1;
  std::int64_t dst = 0;
};

struct TrafficSummary {
  std::int64_t bytes = 0;     // HBM bytes fetched or written
  std::int64_t commands = 0;  // ADM commands issued
  std::int64_t zfill_bytes = 0;
};

struct TransferPlan {
  std::vector<AdmCommand> commands;
  std::int64_t total_bytes = 0;  // sum of read lengths
  std::int64_t total_cycles = 0;
  std::int64_t ifm_base = 0;
  std::int64_t rows = 0, cols = 0;  // shape of the matrix the plan assembles

  std::int64_t read_count() const {
    std::int64_t n = 0;
    for (const auto& c : commands) n += c.kind == CmdKind::read;
    return n;
  }
};

namespace detail {

inline void check_im2col_supported(const LayerSpec& layer) {
  if (layer.kind != LayerKind::conv) throw Im2colUnsupported("IM2COL commands apply to conv layers only");
  if (!layer.fast_path() && layer.k * layer.c_in < kAdmAlignBytes)
    throw Im2colUnsupported("layer " + std::to_string(layer.id) + ": kernel rows of " +
                            std::to_string(layer.k * layer.c_in) +
                            " bytes are below the 32-byte ADM minimum; run IM2COL on the host");
}

}  // namespace detail

// Calls fn(AdmCommand) for every command of the layer's input stream,
// in issue order. Fast-path layers stream whole rows (s=1) or one strided
// pixel per column (s=2); other convolutions get one command per kernel row
// per output pixel, clipped at the borders.
template <typename Fn>
void for_each_im2col_command(const LayerSpec& layer, std::int64_t ifm_base, Fn&& fn) {
  detail::check_im2col_supported(layer);
  const GemmShape g = conv_to_gemm(layer);
  const std::int64_t c = layer.c_in, k = layer.k;
  const std::int64_t ho = layer.h_out(), wo = layer.w_out();
  const std::int64_t tail = g.m_padded - g.m;
  auto tail_fill = [&](std::int64_t col) {
    if (tail > 0) fn(AdmCommand{CmdKind::zfill, 0, tail, tail, col, 1, g.m});
  };

  if (layer.fast_path() && layer.s == 1) {
    const std::int64_t row_bytes = layer.w_in * c;
    for (std::int64_t y = 0; y < layer.h_in; ++y) {
      fn(AdmCommand{CmdKind::read, ifm_base + y * row_bytes, round_up(row_bytes, kAdmAlignBytes), row_bytes, y * wo,
                    wo, 0});
      for (std::int64_t x = 0; x < wo; ++x) tail_fill(y * wo + x);
    }
    return;
  }
  if (layer.fast_path()) {
    for (std::int64_t oy = 0; oy < ho; ++oy)
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const std::int64_t col = oy * wo + ox;
        const std::int64_t addr = ifm_base + ((oy * layer.s) * layer.w_in + ox * layer.s) * c;
        fn(AdmCommand{CmdKind::read, addr, round_up(c, kAdmAlignBytes), c, col, 1, 0});
        tail_fill(col);
      }
    return;
  }

  const std::int64_t row_len = k * c;
  for (std::int64_t oy = 0; oy < ho; ++oy)
    for (std::int64_t ox = 0; ox < wo; ++ox) {
      const std::int64_t col = oy * wo + ox;
      const std::int64_t x0 = ox * layer.s - layer.p;
      const std::int64_t kx_lo = std::max<std::int64_t>(0, -x0);
      const std::int64_t kx_hi = std::min<std::int64_t>(k, layer.w_in - x0);
      for (std::int64_t ky = 0; ky < k; ++ky) {
        const std::int64_t y = oy * layer.s - layer.p + ky;
        const std::int64_t dst = ky * row_len;
        if (y < 0 || y >= layer.h_in || kx_hi <= kx_lo) {
          fn(AdmCommand{CmdKind::zfill, 0, row_len, row_len, col, 1, dst});
          continue;
        }
        if (kx_lo > 0) fn(AdmCommand{CmdKind::zfill, 0, kx_lo * c, kx_lo * c, col, 1, dst});
        const std::int64_t valid = (kx_hi - kx_lo) * c;
        const std::int64_t addr = ifm_base + (y * layer.w_in + x0 + kx_lo) * c;
        fn(AdmCommand{CmdKind::read, addr, round_up(valid, kAdmAlignBytes), valid, col, 1, dst + kx_lo * c});
        if (kx_hi < k) fn(AdmCommand{CmdKind::zfill, 0, (k - kx_hi) * c, (k - kx_hi) * c, col, 1, dst + kx_hi * c});
      }
      tail_fill(col);
    }
}

inline TransferPlan im2col_commands(const LayerSpec& layer, std::int64_t ifm_base, const HbmPortConfig& port) {
  TransferPlan plan;
  const GemmShape g = conv_to_gemm(layer);
  plan.ifm_base = ifm_base;
  plan.rows = g.m_padded;
  plan.cols = g.p;
  std::int64_t reads = 0;
  for_each_im2col_command(layer, ifm_base, [&](const AdmCommand& c) {
    if (c.kind == CmdKind::read) {
      plan.total_bytes += c.len;
      ++reads;
    }
    plan.commands.push_back(c);
  });
  plan.total_cycles = transfer_cycles(plan.total_bytes, reads, port);
  return plan;
}

// Commands belonging to one output column (for inspection and dumps).
inline TransferPlan im2col_column_commands(const LayerSpec& layer, std::int64_t oy, std::int64_t ox,
                                           std::int64_t ifm_base, const HbmPortConfig& port) {
  const std::int64_t col = oy * layer.w_out() + ox;
  TransferPlan full = im2col_commands(layer, ifm_base, port);
  TransferPlan plan;
  plan.ifm_base = ifm_base;
  plan.rows = full.rows;
  plan.cols = full.cols;
  std::int64_t reads = 0;
  for (const auto& c : full.commands)
    if (col >= c.col && col < c.col + c.ncols) {
      plan.commands.push_back(c);
      if (c.kind == CmdKind::read) {
        plan.total_bytes += c.len;
        ++reads;
      }
    }
  plan.total_cycles = transfer_cycles(plan.total_bytes, reads, port);
  return plan;
}

inline TrafficSummary im2col_traffic(const LayerSpec& layer) {
  TrafficSummary t;
  for_each_im2col_command(layer, 0, [&](const AdmCommand& c) {
    if (c.kind == CmdKind::read) {
      t.bytes += c.len;
      ++t.commands;
    } else {
      t.zfill_bytes += c.len;
    }
  });
  return t;
}

// Replays the plan against the IFM bytes. Every matrix byte must be written
// exactly by a read or a zero-fill, otherwise the plan is incomplete.
inline Int8Matrix reconstruct_matrix(const TransferPlan& plan, const QTensor& ifm) {
  Int8Matrix out(plan.rows, plan.cols);
  std::vector<std::uint8_t> covered(out.data.size(), 0);
  const auto ifm_size = static_cast<std::int64_t>(ifm.data.size());
  auto put = [&](std::int64_t row, std::int64_t col, std::int8_t v) {
    if (row < 0 || row >= out.rows || col < 0 || col >= out.cols)
      throw Error("reconstruct_matrix: command writes outside the matrix");
    const auto idx = static_cast<std::size_t>(row * out.cols + col);
    out.data[idx] = v;
    covered[idx] = 1;
  };
  for (const auto& c : plan.commands) {
    const std::int64_t chunk = c.valid / c.ncols;
    for (std::int64_t i = 0; i < c.valid; ++i) {
      const std::int64_t col = c.col + i / chunk;
      const std::int64_t row = c.dst + i % chunk;
      std::int8_t v = 0;
      if (c.kind == CmdKind::read) {
        const std::int64_t off = c.addr - plan.ifm_base + i;
        if (off < 0 || off >= ifm_size) throw Error("reconstruct_matrix: read outside the feature map");
        v = ifm.data[static_cast<std::size_t>(off)];
      }
      put(row, col, v);
    }
  }
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (!covered[i]) throw Error("reconstruct_matrix: plan leaves matrix byte " + std::to_string(i) + " unwritten");
  return out;
}

// Feature map re-laid out with zero channels up to `channels`.
inline QTensor pad_channels(const QTensor& x, std::int64_t channels) {
  QTensor out({x.dims.h, x.dims.w, channels}, x.shift);
  for (std::int64_t y = 0; y < x.dims.h; ++y)
    for (std::int64_t xx = 0; xx < x.dims.w; ++xx)
      for (std::int64_t ch = 0; ch < x.dims.c; ++ch) out.at(y, xx, ch) = x.at(y, xx, ch);
  return out;
}

inline double weight_load_time(const TileSpec& tile, const HbmPortConfig& port) {
  if (tile.weight_bytes == 0) return 0.0;
  return transfer_seconds(tile.weight_bytes, 1, port);
}

// `addr,len` per read and `zfill,len` per padding directive.
inline void dump_plan(std::ostream& os, const TransferPlan& plan) {
  for (const auto& c : plan.commands) {
    if (c.kind == CmdKind::read) os << c.addr << ',' << c.len << '\n';
    else os << "zfill," << c.len << '\n';
  }
}

}  // namespace gemmsim
