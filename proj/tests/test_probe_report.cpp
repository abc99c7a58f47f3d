#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "ssae/encoder.hpp"
#include "ssae/pixel_ops.hpp"
#include "ssae/probe.hpp"
#include "ssae/report.hpp"

using namespace ssae;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig enc;
  enc.input_size = 16;
  return enc;
}

const EvalDataset& shared_set() {
  static const EvalDataset data = make_synthetic_aesthetic_set(200, 4, 16, 24, 32);
  return data;
}

ProbeConfig quick_probe(int block) {
  ProbeConfig pc;
  pc.block_index = block;
  pc.epochs = 5;
  return pc;
}

std::size_t count_label(const EvalDataset& d, std::span<const std::size_t> idx, int label) {
  return static_cast<std::size_t>(std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return d.labels[i] == label; }));
}

} // namespace

TEST_CASE("synthetic aesthetic set construction") {
  const EvalDataset d = make_synthetic_aesthetic_set(1000, 7, 16, 24, 32);
  CHECK(d.images.size() == 1000);
  CHECK(std::count(d.labels.begin(), d.labels.end(), 1) == 500);
  CHECK(d.train.size() == 700);
  CHECK(d.val.size() == 100);
  CHECK(d.test.size() == 200);
  CHECK_NOTHROW(d.validate());
  std::set<std::size_t> all(d.train.begin(), d.train.end());
  all.insert(d.val.begin(), d.val.end());
  all.insert(d.test.begin(), d.test.end());
  CHECK(all.size() == 1000);
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    if (d.labels[i] == 1) {
      CHECK(d.images[i] == d.sources[i]);
      CHECK(d.applied_class[i] == 0);
    } else {
      CHECK(std::isfinite(psnr(d.sources[i], d.images[i])));
      CHECK(d.applied_class[i] >= 1);
    }
  }
  const EvalDataset again = make_synthetic_aesthetic_set(1000, 7, 16, 24, 32);
  CHECK(again.images == d.images);
  CHECK(again.labels == d.labels);
  CHECK(again.train == d.train);
  CHECK_THROWS_AS(make_synthetic_aesthetic_set(99, 7, 16), std::invalid_argument);
}

TEST_CASE("probe training keeps the trunk frozen and counts head scalars") {
  const EncoderConfig enc = tiny_encoder();
  const ParamSet params = init_params(enc, 2);
  const ParamSet before = params;
  const ProbeResult r = probe_train(params, enc, shared_set(), quick_probe(5));
  CHECK(params == before);
  CHECK(r.trainable_scalars == (4 * 4 * 64 + 1) * 2);
  CHECK(r.test_accuracy >= 0.0);
  CHECK(r.test_accuracy <= 1.0);
  CHECK(r.train_count == shared_set().train.size());
  CHECK(r.test_count == shared_set().test.size());
  const ProbeResult again = probe_train(params, enc, shared_set(), quick_probe(5));
  CHECK(again.test_accuracy == r.test_accuracy);
  CHECK(again.best_epoch == r.best_epoch);

  ProbeConfig mlp = quick_probe(3);
  mlp.head = ProbeHead::Mlp;
  mlp.hidden = 16;
  const ProbeResult m = probe_train(params, enc, shared_set(), mlp);
  CHECK(m.trainable_scalars == (16 * 64 + 1) * 16 + (16 + 1) * 2);
  CHECK(params == before);

  ProbeConfig bad = quick_probe(6);
  CHECK_THROWS_AS(probe_train(params, enc, shared_set(), bad), std::invalid_argument);
}

TEST_CASE("adaptive pooling") {
  Tensor act({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) act.data[i] = static_cast<double>(i);
  const Tensor p2 = adaptive_avg_pool_flatten(act, 2);
  CHECK(p2.shape == std::vector<std::size_t>{1, 4});
  CHECK(p2.data[0] == (0 + 1 + 4 + 5) / 4.0);
  CHECK(p2.data[3] == (10 + 11 + 14 + 15) / 4.0);
  const Tensor p1 = adaptive_avg_pool_flatten(act, 1);
  CHECK(p1.data[0] == 7.5);
  // Upsampling a 2x2 map to 4x4 repeats cells.
  Tensor small({1, 1, 2, 2});
  small.data = {1, 2, 3, 4};
  const Tensor up = adaptive_avg_pool_flatten(small, 4);
  CHECK(up.data[0] == 1);
  CHECK(up.data[3] == 2);
  CHECK(up.data[15] == 4);
}

TEST_CASE("stratified subsample and low-data sweep") {
  const EvalDataset& d = shared_set();
  for (double f : {0.05, 0.25, 0.5, 1.0}) {
    const auto sub = stratified_subsample(d.train, d.labels, f, 9);
    for (int label : {0, 1}) {
      const double want = f * static_cast<double>(count_label(d, d.train, label));
      CHECK(std::abs(static_cast<double>(count_label(d, sub, label)) - want) <= 1.0);
    }
    for (std::size_t i : sub) CHECK(std::find(d.train.begin(), d.train.end(), i) != d.train.end());
  }
  CHECK_THROWS_AS(stratified_subsample(d.train, d.labels, 0.001, 9), std::invalid_argument);
  CHECK_THROWS_AS(stratified_subsample(d.train, d.labels, 1.5, 9), std::invalid_argument);

  const EncoderConfig enc = tiny_encoder();
  const ParamSet params = init_params(enc, 3);
  const std::vector<double> full = {1.0};
  const auto sweep = low_data_sweep(params, enc, d, full, quick_probe(4));
  REQUIRE(sweep.size() == 1);
  CHECK(sweep[0].test_accuracy == probe_train(params, enc, d, quick_probe(4)).test_accuracy);
  const std::vector<double> two = {0.25, 1.0};
  const auto curve = low_data_sweep(params, enc, d, two, quick_probe(4));
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].train_count < curve[1].train_count);
}

TEST_CASE("wilson interval") {
  const auto [lo, hi] = wilson_interval(0.5, 100);
  CHECK(lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(hi == doctest::Approx(0.5962).epsilon(1e-3));
  const auto [l0, h0] = wilson_interval(0.0, 10);
  CHECK(l0 == 0.0);
  CHECK(h0 > 0.0);
}

TEST_CASE("labels folder loader") {
  const auto dir = std::filesystem::temp_directory_path() / "ssae_labels_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "img");
  std::ofstream csv(dir / "labels.csv");
  csv << "path,label\n";
  for (int i = 0; i < 40; ++i) {
    RngStream r(1, static_cast<std::uint64_t>(i));
    Image img(20, 24, 3);
    for (double& v : img.data()) v = r.uniform();
    write_png(dir / "img" / ("p" + std::to_string(i) + ".png"), quantize_u8(img));
    csv << "img/p" << i << ".png," << (i % 2) << "\n";
  }
  csv.close();
  const EvalDataset d = load_labeled_folder(dir / "labels.csv", 16, 5);
  CHECK(d.images.size() == 40);
  CHECK(d.images[0].height() == 16);
  CHECK(d.images[0].width() == 16);
  CHECK(d.train.size() + d.val.size() + d.test.size() == 40);
  CHECK_NOTHROW(d.validate());

  std::ofstream(dir / "bad.csv") << "file,y\nimg/p0.png,1\n";
  CHECK_THROWS_AS(load_labeled_folder(dir / "bad.csv", 16, 5), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("block report tables and CSV round trip") {
  BlockReport rep;
  rep.rows.push_back({"pretrained", {0.61, 0.7, 0.8125, 0.83, 1.0 / 3.0}});
  rep.rows.push_back({"random-init", {0.5, 0.55, 0.6, 0.65, 0.7}});
  CHECK(rep.block_count() == 5);
  CHECK(std::abs(rep.rows[0].average() - (0.61 + 0.7 + 0.8125 + 0.83 + 1.0 / 3.0) / 5) <= 1e-9);

  const std::string csv = block_report_csv(rep);
  CHECK(csv.substr(0, csv.find('\n')) == "method,conv1,conv2,conv3,conv4,conv5,average");
  CHECK(parse_block_report_csv(csv) == rep);

  const std::string md = block_report_markdown(rep);
  const std::string header = md.substr(0, md.find('\n'));
  CHECK(std::count(header.begin(), header.end(), '|') == 8);
  CHECK(header.find("Average") != std::string::npos);

  std::string tampered = csv;
  tampered.replace(tampered.find("0.61"), 4, "0.99");
  CHECK_THROWS(parse_block_report_csv(tampered));
}

TEST_CASE("block report columns follow the probed blocks") {
  BlockReport rep;
  rep.blocks = {3, 4};
  rep.rows.push_back({"pretrained", {0.8, 0.75}});
  const std::string csv = block_report_csv(rep);
  CHECK(csv.substr(0, csv.find('\n')) == "method,conv3,conv4,average");
  CHECK(parse_block_report_csv(csv) == rep);
  CHECK(block_report_markdown(rep).find("| conv3 | conv4 |") != std::string::npos);
  rep.blocks = {3};
  CHECK_THROWS(block_report_csv(rep));
  CHECK_THROWS(parse_block_report_csv("method,pool3,average\npretrained,0.5,0.5\n"));
}

TEST_CASE("curve and ablation tables") {
  ProbeResult r;
  r.label_fraction = 0.25;
  r.train_count = 35;
  r.test_count = 40;
  r.test_accuracy = 0.775;
  const CurvePoint p = curve_point("pretrained", r);
  CHECK(p.ci_low < 0.775);
  CHECK(p.ci_high > 0.775);
  const std::vector<CurvePoint> pts = {p, curve_point("random-init", r)};
  CHECK(parse_curve_csv(curve_csv(pts)) == pts);
  CHECK(curve_markdown(pts).find("random-init") != std::string::npos);

  const std::vector<AblationRow> rows = {{"full", 0.5, 0.8}, {"without Fuzzy", 0.55, 0.7}};
  const std::string md = ablation_markdown(rows);
  CHECK(md.find("without Fuzzy") != std::string::npos);
  CHECK(ablation_csv(rows).find("full") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "ssae_report_test";
  std::filesystem::create_directories(dir);
  BlockReport rep;
  rep.rows.push_back({"pretrained", {0.5, 0.6}});
  emit_report(rep, dir / "probe");
  CHECK(std::filesystem::exists(dir / "probe.md"));
  CHECK(parse_block_report_csv(read_text(dir / "probe.csv")) == rep);
  std::filesystem::remove_all(dir);
}
