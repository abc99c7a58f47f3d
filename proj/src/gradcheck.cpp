#include "ssae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ssae/objectives.hpp"
#include "ssae/pretext_data.hpp"
#include "ssae/rng.hpp"

namespace ssae {

namespace {

constexpr std::uint64_t kGradcheckStream = 0x47524144;

struct Problem {
  Tensor batch;
  std::vector<InstanceRef> instances;
  std::vector<TripletRef> triplets;
  std::vector<double> weights;
  LossOptions opts;
};

Problem build_problem(const EncoderConfig& enc, const GradcheckOptions& o) {
  const RngStream base = derive_stream(o.root_seed, kGradcheckStream);
  std::vector<Image> patches;
  const int side = std::max(16, enc.input_size);
  for (int i = 0; i < o.patches; ++i) {
    RngStream r = base.fork(static_cast<std::uint64_t>(i));
    patches.push_back(extract_patch(generate_procedural(r, side, side + side / 4), r, enc.input_size, enc.input_size));
  }

  // Redraw the batch stream until at least one triplet appears.
  SynthBatch sb;
  for (std::uint64_t attempt = 0; sb.triplets.empty(); ++attempt) {
    if (attempt == 64) throw std::runtime_error("gradcheck: could not synthesize a batch with a triplet");
    sb = synth_batch(patches, base.fork(mix_ids({1000, attempt})), 3);
  }

  Problem p;
  std::vector<const Image*> rows;
  RngStream wrng = base.fork(2000);
  for (const auto& inst : sb.instances) {
    p.instances.push_back({rows.size(), inst.class_index});
    rows.push_back(&inst.image);
    p.weights.push_back(wrng.uniform(0.25, 1.0));
  }
  for (const auto& t : sb.triplets) {
    p.triplets.push_back({rows.size(), rows.size() + 1, rows.size() + 2});
    rows.push_back(&t.anchor);
    rows.push_back(&t.mild_img);
    rows.push_back(&t.severe_img);
  }
  p.batch = images_to_batch(std::span<const Image* const>(rows));
  p.opts.lambda = o.lambda;
  p.opts.trp_active = true;
  p.opts.weighting_active = true;
  p.opts.fixed_weights = p.weights;
  return p;
}

struct Evaluation {
  ForwardTrace trace;
  std::uint64_t signature = 0;
};

// Forward pass plus a signature of every piecewise switch: ReLU, max-pool
// and triplet hinge.
Evaluation evaluate(const ParamSet& params, const EncoderConfig& enc, const Problem& p) {
  Evaluation ev{forward(params, enc, p.batch), 0};
  ev.signature = activation_signature(ev.trace);
  const std::size_t e = ev.trace.embedding.dim(1);
  for (const auto& t : p.triplets) {
    const double* base = ev.trace.embedding.data.data();
    const double tl = triplet_loss({base + t.anchor * e, e}, {base + t.mild * e, e}, {base + t.severe * e, e});
    ev.signature = splitmix64_mix(ev.signature ^ (tl > 0.0 ? 1u : 0u));
  }
  return ev;
}

// total_loss(plus) - total_loss(minus), accumulated term by term.  Each
// log-sum-exp difference goes through log1p/expm1 and each squared distance
// difference is factored as (d+ - d-)(d+ + d-), so the result keeps its
// relative precision even when the change is a millionth of the loss.
// Both points must share a signature (same hinge states).
double loss_difference(const ForwardTrace& plus, const ForwardTrace& minus, const Problem& p) {
  const std::size_t c = plus.logits.dim(1);
  double deg = 0.0;
  for (std::size_t i = 0; i < p.instances.size(); ++i) {
    const std::size_t r = p.instances[i].row;
    const double* lp = plus.logits.data.data() + r * c;
    const double* lm = minus.logits.data.data() + r * c;
    const double m = *std::max_element(lm, lm + c);
    double s_minus = 0.0, s_delta = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double em = std::exp(lm[k] - m);
      s_minus += em;
      s_delta += em * std::expm1(lp[k] - lm[k]);
    }
    const auto t = static_cast<std::size_t>(p.instances[i].class_index);
    deg += p.weights[i] * (std::log1p(s_delta / s_minus) - (lp[t] - lm[t]));
  }
  deg /= static_cast<double>(p.instances.size());

  const std::size_t e = plus.embedding.dim(1);
  auto distance_delta = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < e; ++k) {
      const double dp = plus.embedding.data[a * e + k] - plus.embedding.data[b * e + k];
      const double dm = minus.embedding.data[a * e + k] - minus.embedding.data[b * e + k];
      s += (dp - dm) * (dp + dm);
    }
    return s;
  };
  double trp = 0.0;
  for (const auto& t : p.triplets) {
    const double* base = minus.embedding.data.data();
    if (triplet_loss({base + t.anchor * e, e}, {base + t.mild * e, e}, {base + t.severe * e, e}) > 0.0) {
      trp += distance_delta(t.anchor, t.mild) - distance_delta(t.anchor, t.severe);
    }
  }
  trp /= static_cast<double>(p.triplets.size());
  return deg + p.opts.lambda * trp;
}

} // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale == 0.0) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport run_gradcheck(const EncoderConfig& enc, const GradcheckOptions& o) {
  enc.validate();
  if (o.samples < 1) throw std::invalid_argument("gradcheck: samples must be >= 1");
  if (!(o.step > 0.0)) throw std::invalid_argument("gradcheck: step must be positive");
  if (o.patches < 1) throw std::invalid_argument("gradcheck: patches must be >= 1");

  const Problem problem = build_problem(enc, o);
  ParamSet params = init_params(enc, o.root_seed);
  // Non-zero biases so bias gradients are exercised away from symmetric points.
  RngStream bias_rng = derive_stream(o.root_seed, mix_ids({kGradcheckStream, 1}));
  for (auto& [name, t] : params) {
    if (t.rank() == 1) {
      for (double& v : t.data) v = bias_rng.uniform(-0.05, 0.05);
    }
  }

  const Evaluation base = evaluate(params, enc, problem);
  LossGradients lg;
  total_loss(base.trace, problem.instances, problem.triplets, problem.opts, &lg);
  const ParamSet analytic = backward(params, enc, base.trace, lg.d_logits, lg.d_embedding);

  GradcheckReport rep;
  rep.tolerance = o.tolerance;
  // Candidates per tensor: entries whose gradient clears the floor.
  std::vector<std::size_t> tensors;
  std::vector<std::vector<std::size_t>> candidates(params.size());
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    const auto& g = analytic[ti].data;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (std::abs(g[k]) >= o.min_gradient) candidates[ti].push_back(k);
    }
    rep.skipped_small += g.size() - candidates[ti].size();
    if (!candidates[ti].empty()) tensors.push_back(ti);
  }
  if (tensors.empty()) throw std::runtime_error("gradcheck: every gradient is below the floor");

  RngStream pick = derive_stream(o.root_seed, mix_ids({kGradcheckStream, 2}));
  for (int s = 0; s < o.samples; ++s) {
    const std::size_t ti = tensors[static_cast<std::size_t>(s) % tensors.size()];
    const auto& cand = candidates[ti];
    Tensor& t = params[ti];
    bool done = false;
    for (int attempt = 0; attempt <= o.max_resamples && !done; ++attempt) {
      const std::size_t k = cand[pick.below(static_cast<std::uint32_t>(cand.size()))];
      const double saved = t.data[k];
      t.data[k] = saved + o.step;
      const Evaluation plus = evaluate(params, enc, problem);
      t.data[k] = saved - o.step;
      const Evaluation minus = evaluate(params, enc, problem);
      t.data[k] = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++rep.resampled;
        continue;
      }
      const double numeric = loss_difference(plus.trace, minus.trace, problem) / (2.0 * o.step);
      const double a = analytic[ti].data[k];
      rep.entries.push_back({params.name(ti), k, a, numeric, relative_error(a, numeric)});
      rep.max_rel_error = std::max(rep.max_rel_error, rep.entries.back().rel_error);
      done = true;
    }
    if (!done) throw std::runtime_error("gradcheck: no smooth point found for " + params.name(ti));
  }
  return rep;
}

} // namespace ssae
