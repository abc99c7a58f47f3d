#include "ssae/encoder.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

#include "ssae/parallel.hpp"
#include "ssae/rng.hpp"
#include "ssae/streams.hpp"

namespace ssae {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::string block_name(std::size_t b, const char* what) { return "block" + std::to_string(b + 1) + "." + what; }

// col[(c * 9 + ky * 3 + kx), y * w + x] = in[c, y + ky - 1, x + kx - 1], zero outside.
void im2col(const double* in, int channels, int h, int w, double* col) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const double* plane = in + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          double* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            dst[x] = (sx < 0 || sx >= w) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int channels, int h, int w, double* out) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    double* plane = out + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const double* src = row + static_cast<std::size_t>(y) * w;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < w) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

void check_batch(const EncoderConfig& cfg, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(0) == 0 || batch.dim(1) != static_cast<std::size_t>(cfg.in_channels) ||
      batch.dim(2) != static_cast<std::size_t>(cfg.input_size) ||
      batch.dim(3) != static_cast<std::size_t>(cfg.input_size)) {
    throw std::invalid_argument("encoder: batch shape " + shape_string(batch.shape) + " does not match config");
  }
}

// One conv block forward for all images.  Writes pre_pool (post-ReLU) and the
// pooled output; argmax is filled only when pooling.
void block_forward(const Tensor& in, const Tensor& weight, const Tensor& bias, Pool pool, Tensor& pre_pool,
                   Tensor& out, std::vector<std::uint32_t>& argmax) {
  const std::size_t n = in.dim(0);
  const int cin = static_cast<int>(in.dim(1)), h = static_cast<int>(in.dim(2)), w = static_cast<int>(in.dim(3));
  const int cout = static_cast<int>(weight.dim(0));
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const int oh = pool == Pool::Max2 ? h / 2 : h, ow = pool == Pool::Max2 ? w / 2 : w;
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;

  pre_pool = Tensor({n, static_cast<std::size_t>(cout), static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  out = Tensor({n, static_cast<std::size_t>(cout), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  argmax.assign(pool == Pool::Max2 ? out.numel() : 0, 0);

  CMapMat wmat(weight.data.data(), cout, cin * 9);
  Eigen::Map<const Eigen::VectorXd> bvec(bias.data.data(), cout);

  parallel_for(n, [&](std::size_t i) {
    RealBuffer col(static_cast<std::size_t>(cin) * 9 * hw);
    im2col(in.data.data() + i * cin * hw, cin, h, w, col.data());
    CMapMat cmat(col.data(), cin * 9, static_cast<Eigen::Index>(hw));
    double* pre = pre_pool.data.data() + i * cout * hw;
    MapMat omat(pre, cout, static_cast<Eigen::Index>(hw));
    omat.noalias() = wmat * cmat;
    omat.colwise() += bvec;
    for (std::size_t k = 0; k < cout * hw; ++k) pre[k] = pre[k] > 0.0 ? pre[k] : 0.0;

    double* o = out.data.data() + i * cout * ohw;
    if (pool == Pool::None) {
      std::copy(pre, pre + cout * hw, o);
      return;
    }
    std::uint32_t* am = argmax.data() + i * cout * ohw;
    for (int c = 0; c < cout; ++c) {
      const double* plane = pre + c * hw;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          std::size_t best = static_cast<std::size_t>(2 * y) * w + 2 * x;
          for (std::size_t cand : {best + 1, best + w, best + w + 1}) {
            if (plane[cand] > plane[best]) best = cand;
          }
          const std::size_t oi = c * ohw + static_cast<std::size_t>(y) * ow + x;
          o[oi] = plane[best];
          am[oi] = static_cast<std::uint32_t>(c * hw + best);
        }
      }
    }
  });
}

} // namespace

void EncoderConfig::validate() const {
  if (blocks.empty()) throw std::invalid_argument("EncoderConfig: at least one block required");
  if (in_channels != 1 && in_channels != 3) throw std::invalid_argument("EncoderConfig: in_channels must be 1 or 3");
  if (embed_dim < 8) throw std::invalid_argument("EncoderConfig: embed_dim must be >= 8");
  if (num_classes < 2) throw std::invalid_argument("EncoderConfig: num_classes must be >= 2");
  if (input_size < 1) throw std::invalid_argument("EncoderConfig: input_size must be positive");
  int s = input_size;
  for (const auto& b : blocks) {
    if (b.kernel != 3) throw std::invalid_argument("EncoderConfig: only 3x3 kernels are supported");
    if (b.out_channels < 1) throw std::invalid_argument("EncoderConfig: out_channels must be positive");
    if (b.pool == Pool::Max2) s /= 2;
    if (s < 1) throw std::invalid_argument("EncoderConfig: input_size too small for the pooling schedule");
  }
}

int EncoderConfig::block_output_size(std::size_t b) const {
  int s = input_size;
  for (std::size_t i = 0; i <= b && i < blocks.size(); ++i) {
    if (blocks[i].pool == Pool::Max2) s /= 2;
  }
  return s;
}

ParamSet init_params(const EncoderConfig& cfg, std::uint64_t root_seed) {
  cfg.validate();
  ParamSet params;
  const RngStream base = derive_stream(root_seed, streams::kInit);
  std::uint64_t label = 0;
  auto kaiming = [&](Tensor t, std::size_t fan_in) {
    RngStream rng = base.fork(label++);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };
  std::size_t cin = static_cast<std::size_t>(cfg.in_channels);
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    const auto cout = static_cast<std::size_t>(cfg.blocks[b].out_channels);
    params.add(block_name(b, "weight"), kaiming(Tensor({cout, cin, 3, 3}), cin * 9));
    params.add(block_name(b, "bias"), Tensor({cout}));
    cin = cout;
  }
  const auto classes = static_cast<std::size_t>(cfg.num_classes);
  const auto embed = static_cast<std::size_t>(cfg.embed_dim);
  params.add("cls.weight", kaiming(Tensor({classes, cin}), cin));
  params.add("cls.bias", Tensor({classes}));
  params.add("emb.weight", kaiming(Tensor({embed, cin}), cin));
  params.add("emb.bias", Tensor({embed}));
  return params;
}

Tensor images_to_batch(std::span<const Image* const> images) {
  if (images.empty()) throw std::invalid_argument("images_to_batch: no images");
  const Image& first = *images[0];
  const auto n = images.size();
  const auto c = static_cast<std::size_t>(first.channels());
  const auto h = static_cast<std::size_t>(first.height());
  const auto w = static_cast<std::size_t>(first.width());
  Tensor t({n, c, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    const Image& img = *images[i];
    if (!img.same_shape(first)) throw std::invalid_argument("images_to_batch: mixed image shapes");
    double* dst = t.data.data() + i * c * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t k = 0; k < c; ++k) dst[(k * h + y) * w + x] = img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(k)) - 0.5;
  }
  return t;
}

Tensor images_to_batch(std::span<const Image> images) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& img : images) ptrs.push_back(&img);
  return images_to_batch(std::span<const Image* const>(ptrs));
}

ForwardTrace forward(const ParamSet& params, const EncoderConfig& cfg, const Tensor& batch) {
  cfg.validate();
  check_batch(cfg, batch);
  const std::size_t nb = cfg.blocks.size();
  ForwardTrace tr;
  tr.batch = batch.dim(0);
  tr.input = batch;
  tr.pre_pool.resize(nb);
  tr.activations.resize(nb);
  tr.pool_argmax.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const Tensor& in = b == 0 ? tr.input : tr.activations[b - 1];
    block_forward(in, params.at(block_name(b, "weight")), params.at(block_name(b, "bias")), cfg.blocks[b].pool,
                  tr.pre_pool[b], tr.activations[b], tr.pool_argmax[b]);
  }

  const Tensor& last = tr.activations.back();
  const std::size_t n = tr.batch, c = last.dim(1), hw = last.dim(2) * last.dim(3);
  tr.features = Tensor({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const double* plane = last.data.data() + (i * c + k) * hw;
      double s = 0.0;
      for (std::size_t j = 0; j < hw; ++j) s += plane[j];
      tr.features.data[i * c + k] = s / static_cast<double>(hw);
    }
  }

  auto affine = [&](const Tensor& weight, const Tensor& bias) {
    const std::size_t m = weight.dim(0);
    Tensor out({n, m});
    CMapMat f(tr.features.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
    CMapMat wm(weight.data.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c));
    MapMat o(out.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    o.noalias() = f * wm.transpose();
    o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data.data(), static_cast<Eigen::Index>(m));
    return out;
  };
  tr.logits = affine(params.at("cls.weight"), params.at("cls.bias"));
  tr.embedding_raw = affine(params.at("emb.weight"), params.at("emb.bias"));

  const std::size_t e = tr.embedding_raw.dim(1);
  tr.embedding = Tensor({n, e});
  tr.embedding_norm.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = tr.embedding_raw.data.data() + i * e;
    double ss = 0.0;
    for (std::size_t k = 0; k < e; ++k) ss += r[k] * r[k];
    const double norm = std::max(std::sqrt(ss), 1e-12);
    tr.embedding_norm[i] = norm;
    for (std::size_t k = 0; k < e; ++k) tr.embedding.data[i * e + k] = r[k] / norm;
  }
  return tr;
}

Tensor forward_trunk(const ParamSet& params, const EncoderConfig& cfg, const Tensor& batch, int block_index) {
  cfg.validate();
  check_batch(cfg, batch);
  if (block_index < 1 || block_index > static_cast<int>(cfg.blocks.size())) {
    throw std::invalid_argument("forward_trunk: block_index out of range");
  }
  Tensor act = batch;
  for (int b = 0; b < block_index; ++b) {
    Tensor pre, out;
    std::vector<std::uint32_t> am;
    block_forward(act, params.at(block_name(b, "weight")), params.at(block_name(b, "bias")), cfg.blocks[b].pool, pre,
                  out, am);
    act = std::move(out);
  }
  return act;
}

ParamSet backward(const ParamSet& params, const EncoderConfig& cfg, const ForwardTrace& trace, const Tensor& d_logits,
                  const Tensor& d_embedding) {
  if (trace.batch == 0 || trace.activations.size() != cfg.blocks.size()) {
    throw std::logic_error("backward: forward trace missing or does not match the config");
  }
  const std::size_t n = trace.batch;
  const std::size_t c = trace.features.dim(1);
  const std::size_t classes = trace.logits.dim(1), e = trace.embedding.dim(1);
  if (!d_logits.data.empty() && d_logits.shape != trace.logits.shape) {
    throw std::invalid_argument("backward: d_logits shape mismatch");
  }
  if (!d_embedding.data.empty() && d_embedding.shape != trace.embedding.shape) {
    throw std::invalid_argument("backward: d_embedding shape mismatch");
  }

  ParamSet grads = params.zeros_like();
  Tensor d_features({n, c});
  CMapMat f(trace.features.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  MapMat df(d_features.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));

  auto affine_back = [&](const Tensor& d_out, const std::string& prefix, std::size_t m) {
    CMapMat dout(d_out.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    MapMat dw(grads.at(prefix + ".weight").data.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c));
    Eigen::Map<Eigen::RowVectorXd> db(grads.at(prefix + ".bias").data.data(), static_cast<Eigen::Index>(m));
    dw.noalias() += dout.transpose() * f;
    db += dout.colwise().sum();
    CMapMat wm(params.at(prefix + ".weight").data.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c));
    df.noalias() += dout * wm;
  };

  if (!d_logits.data.empty()) affine_back(d_logits, "cls", classes);
  if (!d_embedding.data.empty()) {
    // h = x / |x|  =>  dx = (dh - h (h . dh)) / |x|
    Tensor d_raw({n, e});
    for (std::size_t i = 0; i < n; ++i) {
      const double* h = trace.embedding.data.data() + i * e;
      const double* dh = d_embedding.data.data() + i * e;
      double dot = 0.0;
      for (std::size_t k = 0; k < e; ++k) dot += h[k] * dh[k];
      for (std::size_t k = 0; k < e; ++k) d_raw.data[i * e + k] = (dh[k] - h[k] * dot) / trace.embedding_norm[i];
    }
    affine_back(d_raw, "emb", e);
  }

  // Global average pool.
  const Tensor& last = trace.activations.back();
  Tensor d_act(last.shape);
  {
    const std::size_t hw = last.dim(2) * last.dim(3);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        const double g = d_features.data[i * c + k] / static_cast<double>(hw);
        double* plane = d_act.data.data() + (i * c + k) * hw;
        for (std::size_t j = 0; j < hw; ++j) plane[j] = g;
      }
    }
  }

  for (std::size_t bb = cfg.blocks.size(); bb-- > 0;) {
    const Tensor& pre = trace.pre_pool[bb];
    const Tensor& in = bb == 0 ? trace.input : trace.activations[bb - 1];
    const std::size_t cout = pre.dim(1), hw = pre.dim(2) * pre.dim(3);
    const int cin = static_cast<int>(in.dim(1)), h = static_cast<int>(in.dim(2)), w = static_cast<int>(in.dim(3));
    const std::size_t ohw = trace.activations[bb].dim(2) * trace.activations[bb].dim(3);

    Tensor d_in;
    if (bb > 0) d_in = Tensor(in.shape);
    MapMat dw(grads.at(block_name(bb, "weight")).data.data(), static_cast<Eigen::Index>(cout), cin * 9);
    Eigen::Map<Eigen::VectorXd> db(grads.at(block_name(bb, "bias")).data.data(), static_cast<Eigen::Index>(cout));
    CMapMat wm(params.at(block_name(bb, "weight")).data.data(), static_cast<Eigen::Index>(cout), cin * 9);

    RealBuffer d_pre(cout * hw);
    RealBuffer col(static_cast<std::size_t>(cin) * 9 * hw);
    RealBuffer dcol(bb > 0 ? col.size() : 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* dout = d_act.data.data() + i * cout * ohw;
      const double* pv = pre.data.data() + i * cout * hw;
      if (cfg.blocks[bb].pool == Pool::Max2) {
        std::fill(d_pre.begin(), d_pre.end(), 0.0);
        const std::uint32_t* am = trace.pool_argmax[bb].data() + i * cout * ohw;
        for (std::size_t k = 0; k < cout * ohw; ++k) d_pre[am[k]] += dout[k];
      } else {
        std::copy(dout, dout + cout * hw, d_pre.begin());
      }
      for (std::size_t k = 0; k < cout * hw; ++k) {
        if (!(pv[k] > 0.0)) d_pre[k] = 0.0;
      }
      CMapMat dp(d_pre.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
      im2col(in.data.data() + i * cin * hw, cin, h, w, col.data());
      CMapMat cm(col.data(), cin * 9, static_cast<Eigen::Index>(hw));
      dw.noalias() += dp * cm.transpose();
      db += dp.rowwise().sum();
      if (bb > 0) {
        MapMat dc(dcol.data(), cin * 9, static_cast<Eigen::Index>(hw));
        dc.noalias() = wm.transpose() * dp;
        col2im_add(dcol.data(), cin, h, w, d_in.data.data() + i * cin * hw);
      }
    }
    if (bb > 0) d_act = std::move(d_in);
  }
  return grads;
}

std::uint64_t activation_signature(const ForwardTrace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t b = 0; b < trace.pre_pool.size(); ++b) {
    for (double v : trace.pre_pool[b].data) feed(v > 0.0 ? 1 : 0);
    for (std::uint32_t a : trace.pool_argmax[b]) feed(a);
  }
  return h;
}

} // namespace ssae
