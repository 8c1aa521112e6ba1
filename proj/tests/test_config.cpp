#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "gemmsim/config.hpp"
#include "gemmsim/zoo.hpp"

using namespace gemmsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("gemmsim_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ModelJson, RoundTripsBuiltins) {
  for (const char* name : {"resnet50", "resnet18", "toy"}) {
    const ModelGraph g = zoo::by_name(name);
    const ModelGraph back = model_from_text(model_to_json(g).dump(2), "mem.json");
    EXPECT_EQ(back.name, g.name);
    ASSERT_EQ(back.layers.size(), g.layers.size());
    for (std::size_t i = 0; i < g.layers.size(); ++i)
      EXPECT_EQ(layer_to_json(back.layers[i]), layer_to_json(g.layers[i])) << name << " layer " << i;
  }
}

TEST(ModelJson, DefaultsAndAvgPoolAlias) {
  const std::string text = R"({"name": "m", "layers": [
    {"id": 0, "kind": "conv", "k": 3, "p": 1, "c_in": 8, "c_out": 16, "h_in": 7, "w_in": 7},
    {"id": 1, "kind": "avgpool", "k": 7, "c_in": 16, "h_in": 7, "w_in": 7},
    {"id": 2, "kind": "fc", "c_in": 16, "c_out": 10}
  ]})";
  const ModelGraph g = model_from_text(text, "m.json");
  ASSERT_EQ(g.layers.size(), 3u);
  EXPECT_EQ(g.layers[0].s, 1);
  EXPECT_EQ(g.layers[1].kind, LayerKind::avgpool_as_conv);
  EXPECT_EQ(g.layers[1].c_out, 16);
  EXPECT_EQ(g.layers[1].output_shift, 12);
  EXPECT_EQ(g.layers[2].h_in, 1);
}

TEST(ModelJson, SyntaxErrorReportsLineAndColumn) {
  const std::string text = "{\n  \"layers\": [\n    {\"id\": 0,, }\n  ]\n}\n";
  const std::string msg = error_of([&] { model_from_text(text, "bad.json"); });
  EXPECT_NE(msg.find("bad.json:3:"), std::string::npos) << msg;
}

TEST(ModelJson, SemanticErrorNamesTheRecordLine) {
  const std::string text = R"({"layers": [
    {"id": 0, "kind": "conv", "k": 3, "p": 1, "c_in": 3, "c_out": 16, "h_in": 8, "w_in": 8},
    {"id": 1, "kind": "conv", "k": 3, "p": 1, "c_in": 8, "c_out": 16, "h_in": 8, "w_in": 8}
  ]})";
  const std::string msg = error_of([&] { model_from_text(text, "chain.json"); });
  EXPECT_NE(msg.find("chain.json:3"), std::string::npos) << msg;
}

TEST(ModelJson, MissingFieldNamesTheRecordLine) {
  const std::string text = "{\"layers\": [\n{\"id\": 0, \"kind\": \"conv\", \"c_in\": 3, \"h_in\": 8, \"w_in\": 8}\n]}";
  const std::string msg = error_of([&] { model_from_text(text, "miss.json"); });
  EXPECT_NE(msg.find("miss.json:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("c_out"), std::string::npos) << msg;
}

TEST(ModelJson, UnknownKindRejected) {
  const std::string text = R"({"layers": [{"id": 0, "kind": "lstm", "c_in": 3, "c_out": 3, "h_in": 1, "w_in": 1}]})";
  EXPECT_THROW(model_from_text(text, "k.json"), ConfigError);
}

TEST(LoadModel, BuiltinNamesAndMissingFiles) {
  EXPECT_EQ(load_model("toy").layers.size(), 2u);
  EXPECT_THROW(load_model("nonexistent_model"), ConfigError);
  EXPECT_THROW(load_model("/no/such/file.json"), ConfigError);
}

TEST(SystemJson, ParsesPresetsAndOverrides) {
  const std::string text = R"({
    "pus": [{"preset": "pu1x", "count": 3}, {"preset": "pu2x", "count": 2, "uram_depth": 2048}],
    "ports": {"params": {"efficiency": 0.8}},
    "first_layer": "fpga",
    "power_watts": 75,
    "niu": {"mode": "replace"},
    "noise": {"sigma_rel": 0.3, "seed": 4, "target_layers": [0, 1]}
  })";
  const SystemConfig cfg = system_from_text(text, "sys.json");
  ASSERT_EQ(cfg.groups.size(), 2u);
  EXPECT_EQ(cfg.groups[0].pu.c_sa, pu_1x().c_sa);
  EXPECT_EQ(cfg.groups[0].count, 3);
  EXPECT_EQ(cfg.groups[1].pu.uram_depth, 2048);
  EXPECT_DOUBLE_EQ(cfg.ports.params.efficiency, 0.8);
  EXPECT_EQ(cfg.ports.params.width_bits, 128);
  EXPECT_EQ(cfg.first_layer, FirstLayerMode::fpga);
  EXPECT_DOUBLE_EQ(*cfg.power_watts, 75.0);
  EXPECT_EQ(cfg.niu, NiuMode::replace);
  ASSERT_TRUE(cfg.noise.has_value());
  EXPECT_EQ(cfg.noise->target_layers, (std::set<int>{0, 1}));
}

TEST(SystemJson, RoundTrip) {
  SystemConfig cfg = default_system();
  cfg.power_watts = 60;
  const SystemConfig back = system_from_text(system_to_json(cfg).dump(), "rt.json");
  EXPECT_EQ(system_to_json(back), system_to_json(cfg));
}

TEST(SystemJson, BadPuRecordIsLocated) {
  const std::string text = "{\"pus\": [\n  {\"preset\": \"pu1x\"},\n  {\"preset\": \"pu2x\", \"r_g\": 7}\n]}";
  const std::string msg = error_of([&] { system_from_text(text, "s.json"); });
  EXPECT_NE(msg.find("s.json:3"), std::string::npos) << msg;
}

TEST(SystemJson, RejectsBadValues) {
  EXPECT_THROW(system_from_text(R"({"pus": []})", "a.json"), ConfigError);
  EXPECT_THROW(system_from_text(R"({"pus": [{"preset": "pu3x"}]})", "b.json"), ConfigError);
  EXPECT_THROW(system_from_text(R"({"pus": [{}], "first_layer": "gpu"})", "c.json"), ConfigError);
  EXPECT_THROW(system_from_text(R"({"pus": [{"preset": "pu1x"}], "niu": {"mode": "replace"}})", "d.json"),
               ConfigError);
  EXPECT_THROW(system_from_text(R"({"pus": [{}], "noise": {"sigma_rel": -1}})", "e.json"), ConfigError);
}

TEST(Weights, RoundTripThroughBlobs) {
  const fs::path dir = temp_dir("weights");
  const ModelGraph g = zoo::resnet18();
  const ModelParams p = zoo::random_params(g, 3);
  save_weights(dir / "manifest.json", p);
  const ModelParams back = load_weights(dir / "manifest.json");
  ASSERT_EQ(back.size(), p.size());
  for (const auto& [id, lp] : p) {
    EXPECT_EQ(back.at(id).weights, lp.weights);
    EXPECT_EQ(back.at(id).bias.values, lp.bias.values);
    EXPECT_EQ(back.at(id).bias.bias_shift, lp.bias.bias_shift);
  }
  EXPECT_NO_THROW(check_weights(g, back));
  fs::remove_all(dir);
}

TEST(Weights, TruncatedBlobRejected) {
  const fs::path dir = temp_dir("trunc");
  save_weights(dir / "manifest.json", zoo::toy_params());
  fs::resize_file(dir / "layer1.weights.bin", 100);
  const std::string msg = error_of([&] { load_weights(dir / "manifest.json"); });
  EXPECT_NE(msg.find("expected 128 bytes"), std::string::npos) << msg;
  fs::remove_all(dir);
}

TEST(Weights, ShapeMismatchRejected) {
  ModelParams p = zoo::toy_params();
  p[1].weights = WeightMatrix(4, 31);
  EXPECT_THROW(check_weights(zoo::toy_classifier(), p), ConfigError);
  p.erase(1);
  EXPECT_THROW(check_weights(zoo::toy_classifier(), p), ConfigError);
}
