#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

#include "gemmsim/workload.hpp"
#include "gemmsim/zoo.hpp"

using namespace gemmsim;

namespace {

LayerSpec conv(std::int64_t k, std::int64_t s, std::int64_t p, std::int64_t c_in, std::int64_t c_out, std::int64_t hw) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.k = k;
  l.s = s;
  l.p = p;
  l.c_in = c_in;
  l.c_out = c_out;
  l.h_in = l.w_in = hw;
  return l;
}

}  // namespace

TEST(ConvToGemm, FirstResNetConvPadsPatchTo160) {
  const GemmShape g = conv_to_gemm(conv(7, 2, 3, 3, 64, 224));
  EXPECT_EQ(g.n, 64);
  EXPECT_EQ(g.m, 147);
  EXPECT_EQ(g.m_padded, 160);
  EXPECT_EQ(g.p, 12544);
}

TEST(ConvToGemm, PointwiseConv) {
  const GemmShape g = conv_to_gemm(conv(1, 1, 0, 64, 64, 56));
  EXPECT_EQ(g, (GemmShape{64, 64, 64, 3136}));
}

TEST(ConvToGemm, FullyConnected) {
  LayerSpec fc;
  fc.kind = LayerKind::fc;
  fc.c_in = 512;
  fc.c_out = 1000;
  EXPECT_EQ(conv_to_gemm(fc), (GemmShape{1000, 512, 512, 1}));
}

TEST(ConvToGemm, RejectsKernelLargerThanPaddedInput) {
  EXPECT_THROW(conv_to_gemm(conv(7, 1, 0, 3, 8, 5)), ShapeError);
}

TEST(ConvToGemm, PaddingInvariantOverManyShapes) {
  for (std::int64_t k : {1, 3, 5, 7})
    for (std::int64_t c = 1; c <= 70; ++c) {
      const GemmShape g = conv_to_gemm(conv(k, 1, k / 2, c, 8, 9));
      EXPECT_EQ(g.m, k * k * c);
      EXPECT_EQ(g.m_padded % 32, 0);
      EXPECT_GE(g.m_padded, g.m);
      EXPECT_LT(g.m_padded - g.m, 32);
    }
}

TEST(TileLayer, EvenSplit) {
  const auto tiles = tile_layer({256, 1152, 1152, 1}, pu_2x());
  ASSERT_EQ(tiles.size(), 4u);
  for (const auto& t : tiles) {
    EXPECT_EQ(t.uram_entries, 144);
    EXPECT_EQ(t.rows, 64);
  }
}

TEST(TileLayer, SingleTile) {
  const auto tiles = tile_layer({64, 147, 160, 12544}, pu_2x());
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0].uram_entries, 20);
  EXPECT_EQ(tiles[0].weight_bytes, 64 * 160);
}

TEST(TileLayer, RaggedLastTile) {
  const auto tiles = tile_layer({1000, 512, 512, 1}, pu_1x(), 7, 100);
  ASSERT_EQ(tiles.size(), 16u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(tiles[i].rows, 64);
  EXPECT_EQ(tiles[15].rows, 40);
  EXPECT_EQ(tiles[15].weight_bytes, 40 * 512);
  for (const auto& t : tiles) {
    EXPECT_EQ(t.uram_entries, 128);
    EXPECT_EQ(t.layer_id, 7);
  }
  EXPECT_EQ(tiles.front().tile_id, 100);
  EXPECT_EQ(tiles.back().tile_id, 115);
}

TEST(TileLayer, RejectsTileLargerThanUram) {
  PUConfig pu = pu_2x();
  pu.uram_depth = 100;
  EXPECT_THROW(tile_layer({64, 1152, 1152, 1}, pu), ConfigError);
}

TEST(TileLayer, LosesNoWeights) {
  for (std::int64_t n : {1, 63, 64, 65, 1000, 2048})
    for (std::int64_t m : {32, 160, 1152, 4608}) {
      for (const PUConfig& pu : {pu_2x(), pu_1x()}) {
        const auto tiles = tile_layer({n, m, m, 1}, pu);
        std::int64_t rows = 0, capacity = 0;
        for (const auto& t : tiles) {
          rows += t.rows;
          capacity += t.rows * t.uram_entries * pu.c_sa;
        }
        EXPECT_EQ(rows, n);
        EXPECT_GE(capacity, n * m);
        EXPECT_EQ(static_cast<std::int64_t>(tiles.size()), (n + pu.r_sa - 1) / pu.r_sa);
      }
    }
}

// Exhaustive scan of all int8 (q, shift) pairs, exact rational comparison.
std::pair<int, int> best_pair_by_scan(int window) {
  const std::int64_t area = static_cast<std::int64_t>(window) * window;
  int bq = 0, bs = 0;
  std::int64_t best_num = -1;
  for (int s = 0; s <= 15; ++s)
    for (int q = 1; q <= 127; ++q) {
      // |q/2^s - 1/area| scaled by area * 2^15.
      const std::int64_t num = std::llabs(q * area - (std::int64_t{1} << s)) << (15 - s);
      if (best_num < 0 || num < best_num) {
        best_num = num;
        bq = q;
        bs = s;
      }
    }
  return {bq, bs};
}

TEST(AvgPoolQuant, SevenBySevenWindow) {
  const AvgPoolQuant qt = avgpool_quant(7);
  EXPECT_EQ(qt.q, 84);
  EXPECT_EQ(qt.shift, 12);
  EXPECT_NEAR(std::ldexp(84.0, -12), 0.020508, 1e-6);
}

TEST(AvgPoolQuant, PowerOfTwoWindowsAreExact) {
  EXPECT_EQ(avgpool_quant(2).q, 1);
  EXPECT_EQ(avgpool_quant(2).shift, 2);
  EXPECT_EQ(avgpool_quant(4).q, 1);
  EXPECT_EQ(avgpool_quant(4).shift, 4);
  EXPECT_EQ(avgpool_relative_error(4, 1, 4), 0.0);
}

TEST(AvgPoolQuant, ErrorIsMinimalOverAllInt8Pairs) {
  for (int w = 1; w <= 11; ++w) {
    const AvgPoolQuant qt = avgpool_quant(w);
    const auto [q, s] = best_pair_by_scan(w);
    EXPECT_DOUBLE_EQ(avgpool_relative_error(w, qt.q, qt.shift), avgpool_relative_error(w, q, s)) << "window " << w;
  }
}

// With an int8 weight and shift <= 15 the 1/49 factor cannot get closer
// than 20/4096 (0.49%).
TEST(AvgPoolQuant, SevenBySevenErrorIsTheAttainableMinimum) {
  EXPECT_NEAR(avgpool_relative_error(7, 84, 12), 20.0 / 4096.0, 1e-12);
  const auto [q, s] = best_pair_by_scan(7);
  EXPECT_GE(avgpool_relative_error(7, q, s), 0.0048);
}

TEST(AvgPoolToConv, KeepsChannelsAndSetsShifts) {
  LayerSpec pool;
  pool.kind = LayerKind::avgpool_as_conv;
  pool.k = 7;
  pool.h_in = pool.w_in = 7;
  pool.c_in = 2048;
  AvgPoolQuant qt;
  const LayerSpec l = avgpool_to_conv(pool, &qt);
  EXPECT_EQ(l.kind, LayerKind::avgpool_as_conv);
  EXPECT_EQ(l.c_out, 2048);
  EXPECT_EQ(l.output_shift, 12);
  EXPECT_EQ(qt.q, 84);
  EXPECT_EQ(l.output_dims(), (Dims{1, 1, 2048}));
  const GemmShape g = conv_to_gemm(l);
  EXPECT_EQ(g.n, 1);
  EXPECT_EQ(g.m, 49);
  EXPECT_EQ(g.p, 2048);
}

TEST(ModelGraph, RejectsBrokenChain) {
  ModelGraph g;
  g.layers.push_back(conv(3, 1, 1, 3, 16, 8));
  LayerSpec b = conv(3, 1, 1, 8, 16, 8);  // expects 8 channels, gets 16
  b.id = 1;
  g.layers.push_back(b);
  EXPECT_THROW(g.validate(), ShapeError);
}

TEST(ModelGraph, RejectsResidualShapeMismatch) {
  ModelGraph g;
  g.layers.push_back(conv(3, 1, 1, 3, 16, 8));
  LayerSpec b = conv(3, 2, 1, 16, 16, 8);
  b.id = 1;
  b.residual_source = 0;
  g.layers.push_back(b);
  EXPECT_THROW(g.validate(), ShapeError);
}

TEST(ModelGraph, RejectsForwardResidual) {
  ModelGraph g;
  LayerSpec a = conv(3, 1, 1, 3, 16, 8);
  a.residual_source = 1;
  g.layers.push_back(a);
  LayerSpec b = conv(3, 1, 1, 16, 16, 8);
  b.id = 1;
  g.layers.push_back(b);
  EXPECT_THROW(g.validate(), ConfigError);
}

// MAC totals counted from first principles, independent of the builder.
TEST(Zoo, ResNet50MacCount) {
  const ModelGraph g = zoo::resnet50();
  EXPECT_NO_THROW(g.validate());
  double macs = 0;
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::maxpool) continue;
    const GemmShape s = conv_to_gemm(l);
    macs += static_cast<double>(s.n * s.m * s.p);
  }
  // conv1 118.0M + stages 3739.2M + avgpool 0.1M + fc 2.048M
  EXPECT_NEAR(macs / 1e9, 3.858, 0.005);
  int convs = 0, residuals = 0;
  for (const auto& l : g.layers) {
    convs += l.kind == LayerKind::conv;
    residuals += l.residual_source.has_value();
  }
  EXPECT_EQ(convs, 53);  // 1 + 16 x 3 + 4 projections
  EXPECT_EQ(residuals, 16);
}

TEST(Zoo, ResNet18MacCount) {
  const ModelGraph g = zoo::resnet18();
  EXPECT_NO_THROW(g.validate());
  double macs = 0;
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::maxpool) continue;
    const GemmShape s = conv_to_gemm(l);
    macs += static_cast<double>(s.n * s.m * s.p);
  }
  EXPECT_NEAR(macs / 1e9, 1.814, 0.005);
  EXPECT_EQ(g.layers.back().c_out, 1000);
}
