#include <gtest/gtest.h>

#include "gemmsim/putiming.hpp"
#include "gemmsim/scheduler.hpp"
#include "gemmsim/system.hpp"
#include "gemmsim/zoo.hpp"

using namespace gemmsim;

namespace {

PUConfig no_fill(PUConfig pu) {
  pu.fill_cycles = 0;
  return pu;
}

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

TEST(PuConfig, UramCapacity) {
  EXPECT_EQ(uram_capacity(pu_2x()), 4096);
  EXPECT_EQ(uram_capacity(pu_1x()), 8192);
  PUConfig z = pu_2x();
  z.uram_depth = 0;
  EXPECT_EQ(uram_capacity(z), 0);
}

TEST(PuConfig, Validation) {
  PUConfig pu = pu_2x();
  pu.f_fast = 500e6;
  EXPECT_THROW(pu.validate(), ConfigError);
  pu = pu_2x();
  pu.r_g = 7;
  EXPECT_THROW(pu.validate(), ConfigError);
  pu = pu_2x();
  pu.sub_regions = 3;
  EXPECT_THROW(pu.validate(), ConfigError);
  EXPECT_NO_THROW(pu_1x().validate());
}

TEST(PuConfig, DefaultFill) {
  EXPECT_EQ(pu_2x().fill_cycles, 64 + 8 + 16);
  EXPECT_EQ(pu_1x().fill_cycles, 64 + 4 + 16);
}

TEST(PuTops, Examples) {
  EXPECT_NEAR(pu_tops(pu_2x()), 0.6144, 1e-12);
  EXPECT_NEAR(pu_tops(pu_1x()), 0.3072, 1e-12);
  EXPECT_NEAR(5 * pu_tops(pu_2x()) + 5 * pu_tops(pu_1x()), 4.608, 1e-12);
}

TEST(ComputeCycles, Examples) {
  EXPECT_EQ(compute_cycles({64, 64, 64, 3136}, no_fill(pu_2x())), 25088);
  EXPECT_EQ(compute_cycles({128, 576, 576, 3136}, no_fill(pu_2x())), 3136 * 2 * 72);
  EXPECT_EQ(compute_cycles({128, 576, 576, 3136}, no_fill(pu_2x())), 451584);
  EXPECT_EQ(compute_cycles({64, 64, 64, 0}, pu_2x()), pu_2x().fill_cycles);
}

TEST(ComputeCycles, LinearInPAndTiles) {
  const PUConfig pu = no_fill(pu_2x());
  const std::int64_t base = compute_cycles({64, 288, 288, 100}, pu);
  for (std::int64_t k = 1; k <= 8; ++k) {
    EXPECT_EQ(compute_cycles({64, 288, 288, 100 * k}, pu), k * base);
    EXPECT_EQ(compute_cycles({64 * k, 288, 288, 100}, pu), k * base);
  }
}

TEST(ComputeCycles, HalvingColumnsDoubles) {
  for (std::int64_t m : {32, 64, 160, 1152, 4608})
    EXPECT_EQ(compute_cycles({256, m, m, 49}, no_fill(pu_1x())), 2 * compute_cycles({256, m, m, 49}, no_fill(pu_2x())));
}

TEST(Wrb, Examples) {
  const PUConfig pu = pu_2x();
  EXPECT_TRUE(wrb_ok({64, 64, 64, 1}, pu));  // 8 = 64 / 8, boundary
  EXPECT_FALSE(wrb_ok({64, 32, 32, 1}, pu));
  EXPECT_EQ(output_cycles({64, 32, 32, 10}, pu), 10 * 8);  // drain-bound
  EXPECT_TRUE(wrb_ok({64, 1152, 1152, 1}, pu));
  EXPECT_EQ(output_cycles({64, 1152, 1152, 10}, pu), 10 * 144);
}

TEST(Wrb, HoldsForEveryResNet50ConvOnFullWidthPu) {
  const auto lowered = lower_model(zoo::resnet50(), FirstLayerMode::host);
  for (const auto& lw : lowered)
    if (lw.layer.kind == LayerKind::conv && lw.shape.m_padded >= 64) {
      EXPECT_TRUE(wrb_ok(lw.shape, pu_2x())) << "layer " << lw.layer.id;
    }
}

TEST(LayerLatency, ResNet50ThreeByThreeIsComputeBound) {
  const LoweredLayer lw = lower_layer(conv(3, 1, 1, 64, 64, 56), false, FirstLayerMode::host);
  EXPECT_EQ(lw.shape, (GemmShape{64, 576, 576, 3136}));
  const LayerTiming t = layer_latency(lw, pu_2x(), default_ports());
  EXPECT_EQ(t.compute_cycles, 225792);
  EXPECT_EQ(t.bound, Bound::compute);
  EXPECT_NEAR(t.latency_s * 1e6, 376.3, 0.2);
  EXPECT_DOUBLE_EQ(t.latency_s * pu_2x().f_fast, static_cast<double>(t.compute_cycles + t.fill_cycles));
}

TEST(LayerLatency, HalfWidthPuIsTwiceAsSlowOnComputeBoundLayers) {
  const LoweredLayer lw = lower_layer(conv(3, 1, 1, 128, 128, 28), false, FirstLayerMode::host);
  const LayerTiming a = layer_latency(lw, pu_2x(), default_ports());
  const LayerTiming b = layer_latency(lw, pu_1x(), default_ports());
  ASSERT_EQ(a.bound, Bound::compute);
  ASSERT_EQ(b.bound, Bound::compute);
  EXPECT_EQ(b.compute_cycles, 2 * a.compute_cycles);
  const double fill_s = static_cast<double>(pu_2x().fill_cycles) / pu_2x().f_fast;
  EXPECT_NEAR(b.latency_s / a.latency_s, 2.0, 2.0 * fill_s / a.latency_s);
}

TEST(LayerLatency, EmptyLayerCostsFillOnly) {
  LayerTiming t;
  t.fill_cycles = 88;
  EXPECT_EQ(t.latency_cycles(), 88);
}

TEST(LayerLatency, MaxPoolIsFree) {
  LayerSpec pool;
  pool.kind = LayerKind::maxpool;
  pool.k = 3;
  pool.s = 2;
  pool.p = 1;
  pool.h_in = pool.w_in = 112;
  pool.c_in = pool.c_out = 64;
  const LayerTiming t = layer_latency(lower_layer(pool, false, FirstLayerMode::host), pu_2x(), default_ports());
  EXPECT_EQ(t.latency_s, 0.0);
}

TEST(LayerLatency, BoundNamesTheLargestTerm) {
  for (const auto& lw : lower_model(zoo::resnet18(), FirstLayerMode::fpga)) {
    const LayerTiming t = layer_latency(lw, pu_2x(), default_ports());
    if (lw.layer.kind == LayerKind::maxpool) continue;
    const std::int64_t terms[] = {t.compute_cycles, t.input_cycles, t.output_cycles, t.residual_cycles};
    const std::int64_t max = *std::max_element(std::begin(terms), std::end(terms));
    EXPECT_EQ(terms[static_cast<int>(t.bound)], max);
    EXPECT_GE(t.latency_s * pu_2x().f_fast + 1e-6, static_cast<double>(t.compute_cycles));
  }
}

TEST(ModelLatency, ResNet50PerPu) {
  const ModelGraph g = zoo::resnet50();
  const PUConfig pus[] = {pu_2x(), pu_1x()};
  const double target_ms[] = {12.9, 25.3};
  for (int i = 0; i < 2; ++i) {
    const PuRun run = simulate_pu(g, pus[i], default_ports(), FirstLayerMode::host);
    EXPECT_NEAR(run.timing.latency_s * 1e3, target_ms[i], 0.1 * target_ms[i]) << pus[i].name;
  }
}

TEST(ModelLatency, EmptyModelIsZero) {
  const ModelTiming t = model_latency({}, pu_2x(), default_ports(), 0.0);
  EXPECT_EQ(t.latency_s, 0.0);
}

TEST(ModelLatency, AddsScheduleStalls) {
  const auto lowered = lower_model(zoo::resnet18(), FirstLayerMode::host);
  const ModelTiming a = model_latency(lowered, pu_2x(), default_ports(), 0.0);
  const ModelTiming b = model_latency(lowered, pu_2x(), default_ports(), 1e-3);
  EXPECT_DOUBLE_EQ(b.latency_s - a.latency_s, 1e-3);
}

TEST(ModelLatency, InsensitiveToFillConstant) {
  const ModelGraph g = zoo::resnet50();
  PUConfig a = pu_2x(), b = pu_2x();
  b.fill_cycles = 0;
  const double la = simulate_pu(g, a, default_ports(), FirstLayerMode::host).timing.latency_s;
  const double lb = simulate_pu(g, b, default_ports(), FirstLayerMode::host).timing.latency_s;
  EXPECT_LT(std::abs(la - lb) / la, 0.01);
}
