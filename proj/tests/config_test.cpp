#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ldacp/config.hpp"

using namespace ldacp;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_run_config_string(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults are valid and propagate the seed") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.generator.seed == 42);
  CHECK(c.train.seed == 42);
  CHECK(c.scenario.seed == 42);
  c.set_seed(9);
  CHECK(c.generator.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.scenario.world.seed == 9);
}

TEST_CASE("write then parse reproduces every field") {
  RunConfig c;
  c.set_seed(1234);
  c.generator.n_samples = 777;
  c.generator.z_noise_sigma = 0.1 + 0.2;  // not exactly representable in short form
  c.model.kind = ModelKind::kValueRegressionPcoc;
  c.model.trunk_widths = {7, 5, 3};
  c.model.label_mode = LabelMode::kHard;
  c.model.kernel.sharpness = 1000.0;
  c.model.use_vrmp = false;
  c.train.lr = 3e-4;
  c.train.joint_moe = true;
  c.zero_label_threshold = 0.25;
  c.ablation.seeds = {5, 6};
  c.ablation.variants = {Variant::kHardTpm, Variant::kRm};
  c.scenario.campaigns = 17;
  c.scenario.zero_delay = true;
  c.scenario.campaign_type = CampaignType::kApp;

  const std::string text = run_config_to_string(c);
  const RunConfig back = parse_run_config_string(text);
  CHECK(run_config_to_string(back) == text);
  CHECK(back.seed == 1234);
  CHECK(back.generator.n_samples == 777);
  CHECK(back.generator.z_noise_sigma == c.generator.z_noise_sigma);
  CHECK(back.model.kind == ModelKind::kValueRegressionPcoc);
  CHECK(back.model.trunk_widths == std::vector<int>{7, 5, 3});
  CHECK(back.model.label_mode == LabelMode::kHard);
  CHECK(back.model.kernel.sharpness == 1000.0);
  CHECK(!back.model.use_vrmp);
  CHECK(back.train.lr == 3e-4);
  CHECK(back.train.joint_moe);
  CHECK(back.train.seed == 1234);
  CHECK(back.zero_label_threshold == 0.25);
  CHECK(back.ablation.seeds == std::vector<std::uint64_t>{5, 6});
  CHECK(back.ablation.variants == std::vector<Variant>{Variant::kHardTpm, Variant::kRm});
  CHECK(back.scenario.campaigns == 17);
  CHECK(back.scenario.zero_delay);
  CHECK(back.scenario.campaign_type == CampaignType::kApp);
  CHECK(!parse_run_config_string("[scenario]\ncampaign_type = mixed\n").scenario.campaign_type);
  CHECK(back.scenario.world.n_samples == 777);
}

TEST_CASE("partial files keep defaults") {
  const auto c = parse_run_config_string("[train]\nmax_epochs = 3\n[run]\nseed = 5\n");
  CHECK(c.train.max_epochs == 3);
  CHECK(c.train.seed == 5);
  CHECK(c.train.batch_size == TrainConfig{}.batch_size);
  CHECK(c.model.num_leaves == 64);
  CHECK(parse_run_config_string("").seed == 42);
}

TEST_CASE("booleans") {
  CHECK(parse_run_config_string("[model]\nuse_vrmp = no\n").model.use_vrmp == false);
  CHECK(parse_run_config_string("[model]\nuse_vrmp = 1\n").model.use_vrmp == true);
  CHECK_THROWS(parse_run_config_string("[model]\nuse_vrmp = maybe\n"));
}

TEST_CASE("errors name the offending key") {
  CHECK(message_of("[train]\nlearning_rate = 0.1\n").find("learning_rate") != std::string::npos);
  CHECK(message_of("[nope]\nx = 1\n").find("nope") != std::string::npos);
  CHECK(message_of("[train]\nmax_epochs = ten\n").find("max_epochs") != std::string::npos);
  CHECK(message_of("[train]\nmax_epochs = 3x\n").find("max_epochs") != std::string::npos);
  CHECK(message_of("[model]\nkind = forest\n").find("kind") != std::string::npos);
  CHECK(message_of("[ablation]\nvariants = full, bogus\n").find("variants") != std::string::npos);
  CHECK(!message_of("[train\n").empty());
}

TEST_CASE("validation catches bad values after parsing") {
  auto c = parse_run_config_string("[train]\nmax_epochs = 0\n");
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = parse_run_config_string("[scenario]\nhorizon_minutes = 5\n");
  CHECK_THROWS(c.validate());
  c = parse_run_config_string("[metrics]\nzero_label_threshold = -1\n");
  CHECK_THROWS(c.validate());
}

TEST_CASE("files") {
  const auto path = std::filesystem::temp_directory_path() / "ldacp_config_test.ini";
  RunConfig c;
  c.set_seed(77);
  {
    std::ofstream out(path);
    write_run_config(c, out);
  }
  CHECK(load_run_config(path).seed == 77);
  std::filesystem::remove(path);
  try {
    load_run_config(path);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
  }
}
