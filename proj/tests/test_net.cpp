#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "oracles.hpp"
#include "ssae/checkpoint.hpp"
#include "ssae/encoder.hpp"
#include "ssae/gradcheck.hpp"
#include "ssae/manips.hpp"
#include "ssae/objectives.hpp"

using namespace ssae;

namespace {

EncoderConfig small_config(int input = 16) {
  EncoderConfig cfg;
  cfg.input_size = input;
  return cfg;
}

Tensor random_batch(std::size_t n, int side, std::uint64_t seed) {
  oracle::Rng o(seed, 1);
  std::vector<Image> imgs;
  for (std::size_t i = 0; i < n; ++i) imgs.push_back(oracle::random_image(o, side, side, 3));
  return images_to_batch(std::span<const Image>(imgs));
}

double dot_row(const Tensor& t, std::size_t row, std::span<const double> v) {
  double s = 0;
  for (std::size_t k = 0; k < v.size(); ++k) s += t.data[row * v.size() + k] * v[k];
  return s;
}

} // namespace

TEST_CASE("zero network predicts the uniform distribution") {
  const EncoderConfig cfg = small_config();
  ParamSet params = init_params(cfg, 1);
  for (auto& [name, t] : params) t.fill(0.0);
  const ForwardTrace tr = forward(params, cfg, random_batch(2, 16, 3));
  for (double v : tr.logits.data) CHECK(v == 0.0);
  const auto p = softmax(std::span<const double>(tr.logits.data.data(), 22));
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 22).epsilon(1e-15));
}

TEST_CASE("forward shapes and unit embeddings") {
  const EncoderConfig cfg = small_config(32);
  const ParamSet params = init_params(cfg, 5);
  const ForwardTrace tr = forward(params, cfg, random_batch(3, 32, 4));
  CHECK(tr.logits.shape == std::vector<std::size_t>{3, 22});
  CHECK(tr.embedding.shape == std::vector<std::size_t>{3, 32});
  CHECK(tr.activations.size() == 5);
  CHECK(tr.activations[0].shape == std::vector<std::size_t>{3, 16, 16, 16});
  CHECK(tr.activations[4].shape == std::vector<std::size_t>{3, 64, 2, 2});
  for (std::size_t r = 0; r < 3; ++r) {
    double n = 0;
    for (std::size_t k = 0; k < 32; ++k) n += tr.embedding.data[r * 32 + k] * tr.embedding.data[r * 32 + k];
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-6);
  }
  for (int b = 1; b <= 5; ++b) {
    const Tensor act = forward_trunk(params, cfg, random_batch(3, 32, 4), b);
    CHECK(act == tr.activations[static_cast<std::size_t>(b - 1)]);
  }
  CHECK_THROWS_AS(forward(params, cfg, random_batch(1, 16, 4)), std::invalid_argument);
  CHECK_THROWS_AS(forward_trunk(params, cfg, random_batch(1, 32, 4), 6), std::invalid_argument);
}

TEST_CASE("forward is deterministic and initialization is reproducible") {
  const EncoderConfig cfg = small_config();
  const ParamSet a = init_params(cfg, 9), b = init_params(cfg, 9), c = init_params(cfg, 10);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const Tensor x = random_batch(2, 16, 1);
  CHECK(forward(a, cfg, x).embedding == forward(b, cfg, x).embedding);
  for (const auto& [name, t] : a) {
    if (t.rank() == 1) {
      for (double v : t.data) CHECK(v == 0.0);
    } else {
      const std::size_t fan_in = t.numel() / t.dim(0);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double v : t.data) REQUIRE(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("positively homogeneous trunk keeps the embedding direction when weights double") {
  const EncoderConfig cfg = small_config();
  ParamSet p = init_params(cfg, 3);
  ParamSet q = p;
  for (auto& [name, t] : q) {
    if (name.rfind("block", 0) == 0) for (double& v : t.data) v *= 2.0;
  }
  const Tensor x = random_batch(2, 16, 8);
  const ForwardTrace a = forward(p, cfg, x), b = forward(q, cfg, x);
  for (std::size_t k = 0; k < a.embedding.numel(); ++k) {
    CHECK(std::signbit(a.embedding.data[k]) == std::signbit(b.embedding.data[k]));
    CHECK(a.embedding.data[k] == doctest::Approx(b.embedding.data[k]).epsilon(1e-9));
  }
}

TEST_CASE("backward of a zero loss gradient is zero") {
  const EncoderConfig cfg = small_config();
  const ParamSet params = init_params(cfg, 2);
  const ForwardTrace tr = forward(params, cfg, random_batch(2, 16, 2));
  const ParamSet g = backward(params, cfg, tr, Tensor({2, 22}), Tensor({2, 32}));
  CHECK(g.same_layout(params));
  for (const auto& [name, t] : g)
    for (double v : t.data) CHECK(v == 0.0);
  const ParamSet g2 = backward(params, cfg, tr, Tensor(), Tensor());
  CHECK(g2 == g);
}

TEST_CASE("normalization gradient is orthogonal to the embedding") {
  const EncoderConfig cfg = small_config();
  const ParamSet params = init_params(cfg, 4);
  const ForwardTrace tr = forward(params, cfg, random_batch(1, 16, 6));
  oracle::Rng o(1, 2);
  Tensor d_emb({1, 32});
  for (double& v : d_emb.data) v = o.uniform() - 0.5;
  const ParamSet g = backward(params, cfg, tr, Tensor(), d_emb);
  // With one sample the bias gradient is the gradient at the pre-norm vector.
  const Tensor& gb = g.at("emb.bias");
  const double along = dot_row(tr.embedding, 0, gb.data);
  double norm = 0;
  for (double v : gb.data) norm += v * v;
  CHECK(std::abs(along) <= 1e-12 * std::max(1.0, std::sqrt(norm)));
  CHECK(norm > 0.0);
  // And it equals (I - h h^T) d / |raw|.
  const double hd = dot_row(tr.embedding, 0, d_emb.data);
  for (std::size_t k = 0; k < 32; ++k) {
    const double want = (d_emb.data[k] - tr.embedding.data[k] * hd) / tr.embedding_norm[0];
    CHECK(gb.data[k] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("finite-difference gradient check on the default architecture") {
  GradcheckOptions opts;
  opts.samples = 60;
  const GradcheckReport rep = run_gradcheck(small_config(), opts);
  CHECK(rep.entries.size() == 60);
  CHECK(rep.max_rel_error < 1e-5);
  CHECK(rep.passed());
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 0.5) == 0.5);
}

TEST_CASE("activation signature identifies the smooth piece") {
  const EncoderConfig cfg = small_config();
  const ParamSet params = init_params(cfg, 4);
  const Tensor x = random_batch(2, 16, 3);
  const auto s1 = activation_signature(forward(params, cfg, x));
  CHECK(s1 == activation_signature(forward(params, cfg, x)));
  ParamSet moved = params;
  for (double& v : moved.at("block1.bias").data) v -= 10.0;
  CHECK(activation_signature(forward(moved, cfg, x)) != s1);
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.embed_dim = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EncoderConfig{};
  cfg.input_size = 8;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EncoderConfig{};
  cfg.blocks.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(EncoderConfig{}.block_output_size(0) == 32);
  CHECK(EncoderConfig{}.block_output_size(4) == 4);
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "ssae_ckpt_test";
  std::filesystem::create_directories(dir);
  const EncoderConfig cfg = small_config();
  ParamSet params = init_params(cfg, 12);
  for (double& v : params.at("cls.bias").data) v = 1.0 / 3.0;
  const auto path = dir / "m.ckpt";
  save_checkpoint(path, params, cfg, {{"note", "x"}});
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.params == params);
  CHECK(ck.config == cfg);
  CHECK(ck.meta["note"] == "x");
  CHECK(ck.meta["catalog_version"] == kCatalogVersion);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(ck.params.name(i) == params.name(i));

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write_variant = [&](const std::string& b) {
    const auto p = dir / "bad.ckpt";
    std::ofstream(p, std::ios::binary) << b;
    return p;
  };
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint(write_variant(bad)), FormatError);
  CHECK_THROWS_AS(load_checkpoint(write_variant(bytes.substr(0, bytes.size() - 5))), FormatError);
  bad = bytes;
  const auto pos = bad.find("\"catalog_version\":1");
  REQUIRE(pos != std::string::npos);
  bad[pos + 18] = '7';
  CHECK_THROWS_AS(load_checkpoint(write_variant(bad)), FormatError);
  CHECK_THROWS(load_checkpoint(dir / "missing.ckpt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("param set bookkeeping") {
  ParamSet p;
  p.add("a", Tensor({2, 3}, 1.0));
  p.add("b", Tensor({4}));
  CHECK(p.total_scalars() == 10);
  CHECK(p.contains("a"));
  CHECK_FALSE(p.contains("c"));
  CHECK_THROWS(p.add("a", Tensor({1})));
  CHECK_THROWS(p.at("c"));
  const ParamSet z = p.zeros_like();
  CHECK(z.same_layout(p));
  CHECK(z.at("a").data[0] == 0.0);
  CHECK(shape_string(std::vector<std::size_t>{2, 3}) == "[2,3]");
}
