#include <gtest/gtest.h>

#include <cmath>

#include "gemmsim/niu.hpp"
#include "gemmsim/zoo.hpp"

using namespace gemmsim;

namespace {

NoiseSpec spec(double sigma, std::uint64_t seed, std::set<int> targets) {
  NoiseSpec s;
  s.sigma_rel = sigma;
  s.seed = seed;
  s.target_layers = std::move(targets);
  return s;
}

std::vector<LabeledSample> toy_set() { return zoo::toy_dataset(); }

}  // namespace

TEST(InjectNoise, ZeroSigmaIsIdentity) {
  zoo::SplitMix rng(51);
  WeightMatrix w(16, 40);
  for (auto& v : w.data) v = static_cast<std::int8_t>(rng.uniform(-128, 127));
  EXPECT_EQ(inject_noise(w, spec(0.0, 9, {0}), 0, 3), w);
}

TEST(InjectNoise, DeterministicPerSeedAndRound) {
  WeightMatrix w(8, 64);
  for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] = static_cast<std::int8_t>(i % 100);
  const NoiseSpec s = spec(0.2, 5, {0});
  EXPECT_EQ(inject_noise(w, s, 0, 1), inject_noise(w, s, 0, 1));
  EXPECT_NE(inject_noise(w, s, 0, 1), inject_noise(w, s, 0, 2));
  EXPECT_NE(inject_noise(w, s, 0, 1), inject_noise(w, s, 1, 1));
  EXPECT_NE(inject_noise(w, s, 0, 1), inject_noise(w, spec(0.2, 6, {0}), 0, 1));
}

TEST(InjectNoise, EmpiricalStdMatchesSigma) {
  // One 127 entry sets max |w|; the zero entries then carry pure noise.
  WeightMatrix w(1000, 1000);
  w.data[0] = 127;
  const double sigma_rel = 0.1;
  const WeightMatrix out = inject_noise(w, spec(sigma_rel, 77, {0}), 0, 0);
  double sum = 0, sq = 0;
  const std::size_t n = out.data.size() - 1;
  for (std::size_t i = 1; i < out.data.size(); ++i) {
    sum += out.data[i];
    sq += static_cast<double>(out.data[i]) * out.data[i];
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(sd, sigma_rel * 127, 0.05 * sigma_rel * 127);
  EXPECT_NEAR(mean, 0.0, 0.05);
}

TEST(InjectNoise, NegativeSigmaRejected) { EXPECT_THROW(inject_noise(WeightMatrix(1, 1), spec(-0.1, 0, {}), 0, 0), ConfigError); }

TEST(WeightStore, RefreshTouchesOnlyTargets) {
  WeightStore store(zoo::toy_params());
  const std::uint64_t h = store.noiseless_hash();
  const std::int64_t bytes = store.refresh(spec(0.5, 3, {1}), 0);
  EXPECT_EQ(bytes, 2 * 4 * 32);
  EXPECT_EQ(store.working().at(0).weights, store.noiseless().at(0).weights);
  EXPECT_NE(store.working().at(1).weights, store.noiseless().at(1).weights);
  EXPECT_EQ(store.noiseless_hash(), h);
}

TEST(WeightStore, NoCrossContaminationBetweenRounds) {
  WeightStore store(zoo::toy_params());
  store.refresh(spec(0.5, 3, {0, 1}), 0);
  const WeightMatrix round0 = store.working().at(1).weights;
  store.refresh(spec(0.5, 3, {0, 1}), 1);
  store.refresh(spec(0.5, 3, {0, 1}), 0);
  EXPECT_EQ(store.working().at(1).weights, round0);  // noise from round 1 did not accumulate
  store.refresh(spec(0.5, 3, {}), 2);
  EXPECT_EQ(store.working().at(0).weights, store.noiseless().at(0).weights);
  EXPECT_EQ(store.working().at(1).weights, store.noiseless().at(1).weights);
}

TEST(EmulateRound, NoTargetsMatchesNoiselessInference) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore store(zoo::toy_params());
  const auto data = toy_set();
  const RoundResult r = emulate_round(g, data[0].x, store, spec(1.0, 1, {}), 0);
  EXPECT_EQ(r.niu_bytes, 0);
  const auto ref = run_model(g, data[0].x, zoo::toy_params());
  ASSERT_EQ(r.activations.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(r.activations[i].data, ref[i].data);
}

TEST(EmulateRound, ZeroSigmaMatchesNoiselessInference) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore store(zoo::toy_params());
  const auto data = toy_set();
  const RoundResult r = emulate_round(g, data[5].x, store, spec(0.0, 1, {0, 1}), 4);
  EXPECT_EQ(r.activations.back().data, run_model(g, data[5].x, zoo::toy_params()).back().data);
  EXPECT_EQ(r.niu_bytes, 2 * (2 + 4 * 32));
}

TEST(EmulateRound, NoiseOnLastLayerLeavesEarlierOutputs) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore store(zoo::toy_params());
  const auto data = toy_set();
  const auto ref = run_model(g, data[2].x, zoo::toy_params());
  const RoundResult r = emulate_round(g, data[2].x, store, spec(1.0, 8, {1}), 0);
  EXPECT_EQ(r.activations[0].data, ref[0].data);
}

TEST(AccuracyEval, NoiselessIsPerfectAndStable) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore store(zoo::toy_params());
  const AccuracyStats st = accuracy_eval(g, toy_set(), store, spec(0.0, 1, {0, 1}), 5);
  EXPECT_DOUBLE_EQ(st.mean, 1.0);
  EXPECT_DOUBLE_EQ(st.stddev, 0.0);
  EXPECT_EQ(st.per_round.size(), 5u);
}

TEST(AccuracyEval, RepeatableForFixedSeed) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore a(zoo::toy_params()), b(zoo::toy_params());
  const AccuracyStats x = accuracy_eval(g, toy_set(), a, spec(1.0, 11, {0, 1}), 8);
  const AccuracyStats y = accuracy_eval(g, toy_set(), b, spec(1.0, 11, {0, 1}), 8);
  EXPECT_EQ(x.per_round, y.per_round);
}

TEST(AccuracyEval, DegradesMonotonicallyWithSigma) {
  const ModelGraph g = zoo::toy_classifier();
  double prev = 2.0;
  for (const double sigma : {0.0, 1.0, 3.0}) {
    WeightStore store(zoo::toy_params());
    const AccuracyStats st = accuracy_eval(g, toy_set(), store, spec(sigma, 21, {0, 1}), 20);
    EXPECT_LE(st.mean, prev) << "sigma " << sigma;
    prev = st.mean;
  }
}

TEST(AccuracyEval, LargeSigmaApproachesChance) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore store(zoo::toy_params());
  const AccuracyStats st = accuracy_eval(g, toy_set(), store, spec(8.0, 31, {0, 1}), 60);
  EXPECT_NEAR(st.mean, 1.0 / zoo::kToyClasses, 0.1);
}

TEST(AccuracyEval, RejectsBadArguments) {
  const ModelGraph g = zoo::toy_classifier();
  WeightStore store(zoo::toy_params());
  EXPECT_THROW(accuracy_eval(g, toy_set(), store, spec(0.0, 1, {}), 0), ConfigError);
  EXPECT_THROW(accuracy_eval(g, {}, store, spec(0.0, 1, {}), 1), ConfigError);
}
