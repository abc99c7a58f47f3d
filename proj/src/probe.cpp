#include "ssae/probe.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ssae/objectives.hpp"
#include "ssae/pretext_data.hpp"
#include "ssae/rng.hpp"
#include "ssae/streams.hpp"
#include "ssae/trainer.hpp"

namespace ssae {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i-- > 1;) std::swap(v[i], v[rng.below(static_cast<std::uint32_t>(i + 1))]);
}

// Stratified 70/10/20 split of the given labels.
void split_70_10_20(EvalDataset& d, RngStream& rng) {
  for (int label : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      if (d.labels[i] == label) idx.push_back(i);
    }
    shuffle(idx, rng);
    const std::size_t n_train = idx.size() * 7 / 10, n_val = idx.size() / 10;
    d.train.insert(d.train.end(), idx.begin(), idx.begin() + n_train);
    d.val.insert(d.val.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    d.test.insert(d.test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  std::sort(d.train.begin(), d.train.end());
  std::sort(d.val.begin(), d.val.end());
  std::sort(d.test.begin(), d.test.end());
}

RowMat gather(const Tensor& features, std::span<const std::size_t> rows) {
  const std::size_t dim = features.dim(1);
  RowMat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < dim; ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = features.data[rows[r] * dim + k];
  }
  return m;
}

Eigen::Map<RowMat> as_mat(Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
}
Eigen::Map<const RowMat> as_mat(const Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
}
Eigen::Map<Eigen::RowVectorXd> as_row(Tensor& t) { return {t.data.data(), static_cast<Eigen::Index>(t.numel())}; }
Eigen::Map<const Eigen::RowVectorXd> as_row(const Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.numel())};
}

class Head {
public:
  Head(const ProbeConfig& cfg, std::size_t dim, const RngStream& rng) : mlp_(cfg.head == ProbeHead::Mlp) {
    std::uint64_t label = 0;
    auto kaiming = [&](std::size_t rows, std::size_t fan_in) {
      RngStream r = rng.fork(label++);
      Tensor t({rows, fan_in});
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double& v : t.data) v = r.uniform(-bound, bound);
      return t;
    };
    if (mlp_) {
      const auto h = static_cast<std::size_t>(cfg.hidden);
      params_.add("hidden.weight", kaiming(h, dim));
      params_.add("hidden.bias", Tensor({h}));
      params_.add("out.weight", kaiming(2, h));
      params_.add("out.bias", Tensor({2}));
    } else {
      params_.add("out.weight", kaiming(2, dim));
      params_.add("out.bias", Tensor({2}));
    }
  }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  RowMat logits(const RowMat& x, RowMat* hidden = nullptr) const {
    const RowMat* in = &x;
    RowMat a;
    if (mlp_) {
      a = x * as_mat(params_.at("hidden.weight")).transpose();
      a.rowwise() += as_row(params_.at("hidden.bias"));
      a = a.cwiseMax(0.0);
      in = &a;
    }
    RowMat z = *in * as_mat(params_.at("out.weight")).transpose();
    z.rowwise() += as_row(params_.at("out.bias"));
    if (hidden) *hidden = std::move(a);
    return z;
  }

  // Mean cross-entropy gradients.
  ParamSet gradients(const RowMat& x, std::span<const int> labels) const {
    RowMat hidden;
    const RowMat z = logits(x, &hidden);
    const auto b = static_cast<double>(x.rows());
    RowMat dz(z.rows(), 2);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const double row[2] = {z(r, 0), z(r, 1)};
      const auto p = softmax(row);
      for (int k = 0; k < 2; ++k) dz(r, k) = (p[k] - (labels[r] == k ? 1.0 : 0.0)) / b;
    }
    ParamSet g = params_.zeros_like();
    const RowMat& in = mlp_ ? hidden : x;
    as_mat(g.at("out.weight")).noalias() = dz.transpose() * in;
    as_row(g.at("out.bias")) = dz.colwise().sum();
    if (mlp_) {
      RowMat da = dz * as_mat(params_.at("out.weight"));
      da = (hidden.array() > 0.0).select(da, 0.0);
      as_mat(g.at("hidden.weight")).noalias() = da.transpose() * x;
      as_row(g.at("hidden.bias")) = da.colwise().sum();
    }
    return g;
  }

  double accuracy(const RowMat& x, std::span<const int> labels) const {
    const RowMat z = logits(x);
    std::size_t ok = 0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const int pred = z(r, 1) > z(r, 0) ? 1 : 0;
      if (pred == labels[r]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(z.rows());
  }

private:
  bool mlp_;
  ParamSet params_;
};

std::vector<int> labels_of(const EvalDataset& d, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(d.labels[r]);
  return out;
}

} // namespace

void EvalDataset::validate() const {
  if (images.size() != labels.size()) throw std::invalid_argument("EvalDataset: images/labels length mismatch");
  std::vector<int> seen(images.size(), 0);
  for (const auto* split : {&train, &val, &test}) {
    bool has[2] = {false, false};
    for (std::size_t i : *split) {
      if (i >= images.size()) throw std::invalid_argument("EvalDataset: split index out of range");
      if (seen[i]++) throw std::invalid_argument("EvalDataset: splits overlap");
      if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("EvalDataset: labels must be 0 or 1");
      has[labels[i]] = true;
    }
    if (!has[0] || !has[1]) throw std::invalid_argument("EvalDataset: every split needs both classes");
  }
}

EvalDataset make_synthetic_aesthetic_set(int n, std::uint64_t root_seed, int patch_size, int source_height,
                                         int source_width) {
  if (n < 100) throw std::invalid_argument("make_synthetic_aesthetic_set: n must be >= 100");
  const RngStream base = derive_stream(root_seed, streams::kEvalSet);
  const auto count = static_cast<std::size_t>(n);
  const int resize_short = patch_size + patch_size / 8;

  EvalDataset d;
  d.sources.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream src_rng = base.fork(mix_ids({streams::kSource, i}));
    RngStream crop_rng = base.fork(mix_ids({streams::kCrop, i}));
    d.sources[i] =
        quantize_u8(extract_patch(generate_procedural(src_rng, source_height, source_width), crop_rng, resize_short,
                                  patch_size));
  }

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  RngStream label_rng = base.fork(1);
  shuffle(order, label_rng);
  d.labels.assign(count, 0);
  for (std::size_t k = 0; k < count / 2; ++k) d.labels[order[k]] = 1;

  const auto allowed = allowed_classes();
  const auto& cat = catalog();
  d.images.resize(count);
  d.applied_class.assign(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    if (d.labels[i] == 1) {
      d.images[i] = d.sources[i];
      continue;
    }
    RngStream op_rng = base.fork(mix_ids({streams::kEpochOps, i}));
    const int cls = allowed[op_rng.below(static_cast<std::uint32_t>(allowed.size()))];
    d.applied_class[i] = cls;
    d.images[i] = apply(cat[cls], d.sources[i], op_rng, &d.sources[(i + 1) % count]);
  }

  RngStream split_rng = base.fork(2);
  split_70_10_20(d, split_rng);
  d.validate();
  return d;
}

EvalDataset load_labeled_folder(const std::filesystem::path& labels_csv, int patch_size, std::uint64_t root_seed) {
  std::ifstream in(labels_csv);
  if (!in) throw std::runtime_error("cannot read " + labels_csv.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label") throw std::invalid_argument("labels CSV: header must be 'path,label'");
  const auto dir = labels_csv.parent_path();
  EvalDataset d;
  const RngStream base = derive_stream(root_seed, streams::kEvalSet);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw std::invalid_argument("labels CSV: malformed row '" + line + "'");
    const std::string label = line.substr(comma + 1);
    if (label != "0" && label != "1") throw std::invalid_argument("labels CSV: label must be 0 or 1");
    Image img = read_png(dir / line.substr(0, comma));
    if (img.channels() == 1) {
      Image rgb(img.height(), img.width(), 3);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x, 0);
      img = std::move(rgb);
    }
    RngStream crop_rng = base.fork(d.images.size());
    d.images.push_back(extract_patch(img, crop_rng, patch_size, patch_size));
    d.labels.push_back(label == "1" ? 1 : 0);
  }
  d.applied_class.assign(d.images.size(), 0);
  RngStream split_rng = base.fork(2);
  split_70_10_20(d, split_rng);
  d.validate();
  return d;
}

void ProbeConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("ProbeConfig: " + m); };
  if (block_index < 1) fail("block_index must be >= 1");
  if (hidden < 1) fail("hidden must be >= 1");
  if (pool_out < 1) fail("pool_out must be >= 1");
  if (!(lr0 > 0.0) || !(lr_decay > 0.0) || lr_step_epochs < 1) fail("invalid learning-rate schedule");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(label_fraction > 0.0) || label_fraction > 1.0) fail("label_fraction must be in (0, 1]");
}

Tensor adaptive_avg_pool_flatten(const Tensor& act, int out) {
  const std::size_t n = act.dim(0), c = act.dim(1), h = act.dim(2), w = act.dim(3);
  const auto o = static_cast<std::size_t>(out);
  Tensor res({n, c * o * o});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const double* plane = act.data.data() + (i * c + k) * h * w;
      for (std::size_t oy = 0; oy < o; ++oy) {
        const std::size_t y0 = oy * h / o, y1 = ((oy + 1) * h + o - 1) / o;
        for (std::size_t ox = 0; ox < o; ++ox) {
          const std::size_t x0 = ox * w / o, x1 = ((ox + 1) * w + o - 1) / o;
          double s = 0.0;
          for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) s += plane[y * w + x];
          res.data[i * c * o * o + (k * o + oy) * o + ox] = s / static_cast<double>((y1 - y0) * (x1 - x0));
        }
      }
    }
  }
  return res;
}

Tensor probe_features(const ParamSet& params, const EncoderConfig& enc, std::span<const Image> images,
                      int block_index, int pool_out) {
  if (images.empty()) throw std::invalid_argument("probe_features: no images");
  constexpr std::size_t kChunk = 64;
  Tensor out;
  for (std::size_t b0 = 0; b0 < images.size(); b0 += kChunk) {
    const std::size_t b1 = std::min(images.size(), b0 + kChunk);
    const Tensor act = forward_trunk(params, enc, images_to_batch(images.subspan(b0, b1 - b0)), block_index);
    const Tensor f = adaptive_avg_pool_flatten(act, pool_out);
    if (out.data.empty()) out = Tensor({images.size(), f.dim(1)});
    std::copy(f.data.begin(), f.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(b0 * f.dim(1)));
  }
  return out;
}

std::vector<std::size_t> stratified_subsample(std::span<const std::size_t> indices, std::span<const int> labels,
                                              double fraction, std::uint64_t root_seed) {
  if (!(fraction > 0.0) || fraction > 1.0) throw std::invalid_argument("stratified_subsample: fraction must be in (0, 1]");
  RngStream rng = derive_stream(root_seed, streams::kSubsample);
  std::vector<std::size_t> out;
  for (int label : {0, 1}) {
    std::vector<std::size_t> cls;
    for (std::size_t i : indices) {
      if (labels[i] == label) cls.push_back(i);
    }
    shuffle(cls, rng);
    const auto keep = static_cast<std::size_t>(round_half_away(fraction * static_cast<double>(cls.size())));
    if (keep < 2) throw std::invalid_argument("label_fraction leaves fewer than 2 examples of a class");
    out.insert(out.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

ProbeResult probe_train_on_features(const Tensor& features, const EvalDataset& data, const ProbeConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> train = stratified_subsample(data.train, data.labels, cfg.label_fraction,
                                                              mix_ids({cfg.root_seed, static_cast<std::uint64_t>(cfg.block_index)}));
  RowMat x_train = gather(features, train), x_val = gather(features, data.val), x_test = gather(features, data.test);
  if (cfg.standardize) {
    const Eigen::RowVectorXd mean = x_train.colwise().mean();
    Eigen::RowVectorXd sd = ((x_train.rowwise() - mean).array().square().colwise().sum() /
                             static_cast<double>(x_train.rows())).sqrt();
    sd = sd.unaryExpr([](double v) { return v > 1e-8 ? v : 1.0; });
    for (RowMat* m : {&x_train, &x_val, &x_test}) {
      *m = ((m->rowwise() - mean).array().rowwise() / sd.array()).matrix();
    }
  }
  const auto y_train = labels_of(data, train), y_val = labels_of(data, data.val), y_test = labels_of(data, data.test);

  const RngStream base = derive_stream(cfg.root_seed, mix_ids({streams::kProbe, static_cast<std::uint64_t>(cfg.block_index)}));
  Head head(cfg, features.dim(1), base.fork(0));
  ParamSet velocity = head.params().zeros_like();
  const SgdOptions sgd{cfg.momentum, cfg.weight_decay, true};

  ProbeResult res;
  res.block_index = cfg.block_index;
  res.label_fraction = cfg.label_fraction;
  res.train_count = train.size();
  res.test_count = data.test.size();
  res.trainable_scalars = head.params().total_scalars();
  res.best_val_accuracy = -1.0;

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RngStream order_rng = base.fork(1000 + static_cast<std::uint64_t>(epoch));
    shuffle(order, order_rng);
    const double lr = lr_at(epoch, cfg.lr0, cfg.lr_decay, cfg.lr_step_epochs);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      RowMat xb(static_cast<Eigen::Index>(b1 - b0), x_train.cols());
      std::vector<int> yb;
      for (std::size_t k = b0; k < b1; ++k) {
        xb.row(static_cast<Eigen::Index>(k - b0)) = x_train.row(static_cast<Eigen::Index>(order[k]));
        yb.push_back(y_train[order[k]]);
      }
      sgd_step(head.params(), velocity, head.gradients(xb, yb), lr, sgd);
    }
    const double val_acc = head.accuracy(x_val, y_val);
    if (val_acc > res.best_val_accuracy) {
      res.best_val_accuracy = val_acc;
      res.best_epoch = epoch;
      res.test_accuracy = head.accuracy(x_test, y_test);
    }
  }
  return res;
}

ProbeResult probe_train(const ParamSet& params, const EncoderConfig& enc, const EvalDataset& data,
                        const ProbeConfig& cfg) {
  cfg.validate();
  data.validate();
  if (cfg.block_index > static_cast<int>(enc.blocks.size())) {
    throw std::invalid_argument("probe_train: block_index exceeds the encoder depth");
  }
  const Tensor features = probe_features(params, enc, data.images, cfg.block_index, cfg.pool_out);
  return probe_train_on_features(features, data, cfg);
}

std::vector<ProbeResult> low_data_sweep(const ParamSet& params, const EncoderConfig& enc, const EvalDataset& data,
                                        std::span<const double> fractions, const ProbeConfig& cfg) {
  data.validate();
  for (double f : fractions) {
    if (!(f > 0.0) || f > 1.0) throw std::invalid_argument("low_data_sweep: fractions must lie in (0, 1]");
  }
  const Tensor features = probe_features(params, enc, data.images, cfg.block_index, cfg.pool_out);
  std::vector<ProbeResult> out;
  for (double f : fractions) {
    ProbeConfig c = cfg;
    c.label_fraction = f;
    out.push_back(probe_train_on_features(features, data, c));
  }
  return out;
}

std::pair<double, double> wilson_interval(double accuracy, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double denom = 1.0 + z * z / nn;
  const double centre = (accuracy + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(accuracy * (1.0 - accuracy) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

} // namespace ssae
