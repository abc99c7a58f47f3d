#include "ssae/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssae {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_unit(std::span<const double> v, const char* what) {
  if (std::abs(norm2(v) - 1.0) > 1e-3) {
    throw std::invalid_argument(std::string("triplet_loss: ") + what + " is not L2-normalized");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::span<const double> row(const Tensor& t, std::size_t r) {
  const std::size_t cols = t.dim(1);
  if (r >= t.dim(0)) throw std::out_of_range("total_loss: row index out of range");
  return {t.data.data() + r * cols, cols};
}

} // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= sum;
  return p;
}

double deg_loss(std::span<const double> logits, int class_index) {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= logits.size()) {
    throw std::invalid_argument("deg_loss: class index out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return m + std::log(sum) - logits[class_index];
}

double triplet_loss(std::span<const double> anchor, std::span<const double> mild, std::span<const double> severe) {
  if (anchor.size() != mild.size() || anchor.size() != severe.size() || anchor.empty()) {
    throw std::invalid_argument("triplet_loss: dimension mismatch");
  }
  require_unit(anchor, "anchor");
  require_unit(mild, "mild");
  require_unit(severe, "severe");
  return std::max(0.0, squared_distance(anchor, mild) - squared_distance(anchor, severe) + kTripletMargin);
}

double entropy_weight(std::span<const double> probs, double alpha) {
  double sum = 0.0, plogp = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("entropy_weight: negative probability");
    sum += p;
    if (p > 0.0) plogp += p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("entropy_weight: probabilities do not sum to 1");
  return std::clamp(1.0 + alpha * plogp, 0.0, 1.0);
}

LossReport total_loss(const Tensor& logits, const Tensor& embedding, std::span<const InstanceRef> instances,
                      std::span<const TripletRef> triplets, const LossOptions& opts, LossGradients* grads) {
  if (instances.empty()) throw std::invalid_argument("total_loss: empty instance list");
  if (opts.lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be >= 0");
  if (!opts.fixed_weights.empty() && opts.fixed_weights.size() != instances.size()) {
    throw std::invalid_argument("total_loss: fixed_weights length mismatch");
  }
  const double n_inst = static_cast<double>(opts.instance_divisor ? opts.instance_divisor : instances.size());
  const bool use_trp = opts.trp_active && !triplets.empty();
  const double n_trp = static_cast<double>(opts.triplet_divisor ? opts.triplet_divisor : triplets.size());

  if (grads) {
    grads->d_logits = Tensor(logits.shape);
    grads->d_embedding = Tensor(embedding.shape);
  }

  LossReport rep;
  rep.lambda_used = opts.lambda;
  rep.trp_active = opts.trp_active;
  rep.per_instance_weights.reserve(instances.size());

  double deg_sum = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const auto l = row(logits, inst.row);
    const auto p = softmax(l);
    double w = 1.0;
    if (!opts.fixed_weights.empty()) {
      w = opts.fixed_weights[i];
    } else if (opts.weighting_active) {
      w = entropy_weight(p, opts.alpha);
    }
    rep.per_instance_weights.push_back(w);
    deg_sum += w * deg_loss(l, inst.class_index);
    if (grads && opts.deg_active && w != 0.0) {
      double* g = grads->d_logits.data.data() + inst.row * l.size();
      const double scale = w / n_inst;
      for (std::size_t k = 0; k < l.size(); ++k) {
        g[k] += scale * (p[k] - (static_cast<int>(k) == inst.class_index ? 1.0 : 0.0));
      }
    }
  }
  rep.l_deg = deg_sum / n_inst;

  if (use_trp) {
    const std::size_t e = embedding.dim(1);
    double trp_sum = 0.0;
    for (const auto& t : triplets) {
      const auto a = row(embedding, t.anchor), m = row(embedding, t.mild), s = row(embedding, t.severe);
      const double loss = triplet_loss(a, m, s);
      trp_sum += loss;
      if (grads && loss > 0.0) {
        const double scale = 2.0 * opts.lambda / n_trp;
        double* ga = grads->d_embedding.data.data() + t.anchor * e;
        double* gm = grads->d_embedding.data.data() + t.mild * e;
        double* gs = grads->d_embedding.data.data() + t.severe * e;
        for (std::size_t k = 0; k < e; ++k) {
          ga[k] += scale * (s[k] - m[k]);
          gm[k] += scale * (m[k] - a[k]);
          gs[k] += scale * (a[k] - s[k]);
        }
      }
    }
    rep.l_trp = trp_sum / n_trp;
  }

  rep.total = (opts.deg_active ? rep.l_deg : 0.0) + (use_trp ? opts.lambda * rep.l_trp : 0.0);
  return rep;
}

} // namespace ssae
