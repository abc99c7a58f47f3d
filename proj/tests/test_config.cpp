#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "ssae/pipeline.hpp"
#include "ssae/run_config.hpp"

using namespace ssae;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
  try {
    run_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST_CASE("empty document resolves to defaults") {
  const RunConfig cfg = run_config_from_json(json::object());
  CHECK(cfg.root_seed == 1);
  CHECK(cfg.train.lr0 == 0.1);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.epochs == 50);
  CHECK(cfg.probe.lr0 == 0.01);
  CHECK(cfg.probe.pool_out == 4);
  CHECK(cfg.encoder.blocks.size() == 5);
  CHECK(cfg.source.count == 2000);
  CHECK(cfg.patch.crop == 64);
  CHECK(cfg.eval.count == 2000);
}

TEST_CASE("unknown keys name the offending key") {
  CHECK(config_error({{"bogus", 1}}).find("bogus") != std::string::npos);
  CHECK(config_error({{"train", {{"learning_rate", 0.1}}}}).find("train.learning_rate") != std::string::npos);
  CHECK(config_error({{"encoder", {{"blocks", {{{"out_channels", 8}, {"stride", 2}}}}}}}).find("stride") !=
        std::string::npos);
  CHECK_FALSE(config_error({{"train", {{"lr0", "fast"}}}}).empty());
  CHECK_FALSE(config_error({{"exclude_attribute_groups", {"Sharpness"}}}).empty());
  CHECK_FALSE(config_error({{"disable_deg", true}, {"disable_trp", true}}).empty());
  CHECK_FALSE(config_error({{"patch", {{"crop", 32}}}}).empty());
  CHECK_FALSE(config_error({{"probe", {{"head", "forest"}}}}).empty());
}

TEST_CASE("shared settings propagate into the stage configs") {
  const json j = {{"root_seed", 42},
                  {"exclude_attribute_groups", {"Camera shake", "fuzzy"}},
                  {"disable_weighting", true},
                  {"train", {{"ops_per_patch", 2}, {"epochs", 3}}}};
  const RunConfig cfg = run_config_from_json(j);
  CHECK(cfg.train.root_seed == 42);
  CHECK(cfg.source.root_seed == 42);
  CHECK(cfg.probe.root_seed == 42);
  CHECK(cfg.patch.ops_per_patch == 2);
  CHECK(cfg.train.disable_weighting);
  CHECK(cfg.train.excluded_groups.size() == 2);
  CHECK(cfg.patch.excluded_groups == cfg.train.excluded_groups);
}

TEST_CASE("resolved config round trips through JSON and disk") {
  const json j = {{"root_seed", 7},
                  {"encoder", {{"input_size", 32}, {"embed_dim", 16}}},
                  {"patch", {{"crop", 32}, {"resize_short", 36}}},
                  {"probe", {{"head", "mlp"}, {"hidden", 64}}},
                  {"eval", {{"blocks", {2, 4}}, {"fractions", {0.1, 1.0}}}}};
  const RunConfig cfg = run_config_from_json(j);
  const json resolved = run_config_to_json(cfg);
  const RunConfig again = run_config_from_json(resolved);
  CHECK(run_config_to_json(again) == resolved);
  CHECK(again.encoder == cfg.encoder);
  CHECK(again.eval.blocks == std::vector<int>{2, 4});

  const auto path = std::filesystem::temp_directory_path() / "ssae_cfg_test.json";
  write_resolved_config(cfg, path);
  CHECK(run_config_to_json(load_run_config(path)) == resolved);
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_run_config(path), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("standard ablations cover every group and both losses") {
  const auto variants = standard_ablations(run_config_from_json(json::object()));
  REQUIRE(variants.size() == 10);
  CHECK(variants[0].name == "full");
  int without_group = 0;
  for (const auto& v : variants) {
    if (v.config.exclude_attribute_groups.size() == 1) ++without_group;
  }
  CHECK(without_group == 6);
  CHECK(variants[7].config.train.disable_weighting);
  CHECK(variants[8].config.train.disable_trp);
  CHECK(variants[9].config.train.disable_deg);
}
