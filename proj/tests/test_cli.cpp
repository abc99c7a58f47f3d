#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <json.hpp>

#include "ssae/corpus.hpp"
#include "ssae/report.hpp"
#include "ssae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "ssae_cli_tests";

int run(const std::string& args, const std::string& tag = "cmd") {
  const std::string cmd = std::string(SSAE_CLI_PATH) + " " + args + " > " + (kWork / (tag + ".out")).string() + " 2> " +
                          (kWork / (tag + ".err")).string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const std::string& name, const json& j) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

json small_config() {
  return {{"root_seed", 5},
          {"source", {{"count", 24}, {"source_height", 40}, {"source_width", 48}}},
          {"patch", {{"resize_short", 18}, {"crop", 16}, {"val_fraction", 0.25}}},
          {"encoder", {{"input_size", 16}}},
          {"train", {{"epochs", 1}, {"batch_size", 8}}},
          {"probe", {{"epochs", 3}}},
          {"eval", {{"count", 100}}}};
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

} // namespace

TEST_CASE_FIXTURE(Workspace, "config errors exit 2 and name the key") {
  const auto bad = write_config("bad.json", {{"train", {{"learnin_rate", 0.1}}}});
  CHECK(run("synth --config " + bad.string() + " --out " + (kWork / "c").string(), "bad") == 2);
  CHECK(slurp(kWork / "bad.err").find("train.learnin_rate") != std::string::npos);

  json both = small_config();
  both["disable_deg"] = true;
  both["disable_trp"] = true;
  const auto nothing = write_config("nothing.json", both);
  CHECK(run("pretrain --config " + nothing.string() + " --corpus " + kWork.string() + " --out " +
            (kWork / "m.ckpt").string()) == 2);

  CHECK(run("synth --out x") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("synth --config " + (kWork / "absent.json").string() + " --out " + (kWork / "c").string()) == 3);
}

TEST_CASE_FIXTURE(Workspace, "synth is byte-identical across reruns and honours exclusions") {
  const auto cfg = write_config("small.json", small_config());
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (kWork / "a").string()) == 0);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (kWork / "b").string()) == 0);
  const auto a = dir_bytes(kWork / "a"), b = dir_bytes(kWork / "b");
  CHECK(a.size() > 24);
  CHECK(a == b);
  CHECK(a.count("manifest.jsonl") == 1);
  CHECK(a.count("resolved_config.json") == 1);

  // Rerunning from the emitted resolved config reproduces the corpus.
  REQUIRE(run("synth --config " + (kWork / "a" / "resolved_config.json").string() + " --out " +
              (kWork / "r").string()) == 0);
  CHECK(dir_bytes(kWork / "r") == a);

  json no_shake = small_config();
  no_shake["exclude_attribute_groups"] = {"Camera shake"};
  no_shake["source"]["count"] = 60;
  const auto ns = write_config("noshake.json", no_shake);
  REQUIRE(run("synth --config " + ns.string() + " --out " + (kWork / "ns").string()) == 0);
  const ssae::Corpus c = ssae::load_corpus(kWork / "ns");
  for (const auto& e : c.entries)
    for (int cls : e.ops_applied) CHECK(ssae::catalog()[cls].family != ssae::OpFamily::Rotation);
}

TEST_CASE_FIXTURE(Workspace, "pretrain, probe, lowdata and report") {
  json base = small_config();
  base["disable_trp"] = true;
  base["train"]["trp_activation_epoch"] = 0;
  const auto cfg = write_config("pipe.json", base);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (kWork / "corpus").string()) == 0);
  const auto ckpt = kWork / "model.ckpt";
  REQUIRE(run("pretrain --config " + cfg.string() + " --corpus " + (kWork / "corpus").string() + " --out " +
              ckpt.string(), "pre") == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(kWork / "model.resolved.json"));
  const auto hist = ssae::read_history_csv(kWork / "model.history.csv");
  REQUIRE(hist.size() == 1);
  for (const auto& row : hist) CHECK(row.l_trp == 0.0);

  REQUIRE(run("probe --config " + cfg.string() + " --checkpoint " + ckpt.string() + " --out " +
              (kWork / "probe").string() + " --blocks 1..5", "probe") == 0);
  const auto rep = ssae::parse_block_report_csv(ssae::read_text(kWork / "probe" / "probe_report.csv"));
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.block_count() == 5);
  CHECK(fs::exists(kWork / "probe" / "probe_report.md"));

  REQUIRE(run("lowdata --config " + cfg.string() + " --checkpoint " + ckpt.string() + " --out " +
              (kWork / "low").string() + " --fractions 0.25,0.5", "low") == 0);
  const auto curve = ssae::parse_curve_csv(ssae::read_text(kWork / "low" / "lowdata.csv"));
  int pretrained_points = 0;
  for (const auto& p : curve) pretrained_points += p.method == "pretrained";
  CHECK(pretrained_points == 2);

  REQUIRE(run("report --probe " + (kWork / "probe" / "probe_report.csv").string() + " --lowdata " +
              (kWork / "low" / "lowdata.csv").string() + " --out " + (kWork / "summary.md").string()) == 0);
  CHECK(slurp(kWork / "summary.md").find("conv5") != std::string::npos);

  CHECK(run("probe --config " + cfg.string() + " --checkpoint " + (kWork / "nope.ckpt").string() + " --out " +
            (kWork / "p2").string()) == 3);
  CHECK(run("lowdata --config " + cfg.string() + " --checkpoint " + ckpt.string() + " --out " +
            (kWork / "p3").string() + " --fractions 0,2") == 2);
}

TEST_CASE_FIXTURE(Workspace, "gradcheck exits 0 on the default architecture") {
  const auto out = kWork / "grad.json";
  CHECK(run("gradcheck --samples 40 --out " + out.string(), "grad") == 0);
  const json rep = json::parse(slurp(out));
  CHECK(rep["max_rel_error"].get<double>() < 1e-5);
}
