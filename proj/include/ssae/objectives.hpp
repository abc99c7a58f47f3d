#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssae/encoder.hpp"
#include "ssae/tensor.hpp"

namespace ssae {

inline constexpr double kDefaultAlpha = 5.0 / 3.0;
inline constexpr double kTripletMargin = 1.0;

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[class_index], computed through log-sum-exp.
double deg_loss(std::span<const double> logits, int class_index);

/// max{0, |a - m|^2 - |a - s|^2 + 1} for unit vectors.
double triplet_loss(std::span<const double> anchor, std::span<const double> mild, std::span<const double> severe);

/// max{1 + alpha * sum_t P_t ln P_t, 0}.
double entropy_weight(std::span<const double> probs, double alpha = kDefaultAlpha);

/// Row of the logits tensor holding a pretext instance and its label.
struct InstanceRef {
  std::size_t row = 0;
  int class_index = 0;
};

/// Rows of the embedding tensor forming (anchor, mild, severe).
struct TripletRef {
  std::size_t anchor = 0;
  std::size_t mild = 0;
  std::size_t severe = 0;
};

struct LossOptions {
  double lambda = 0.02;
  bool trp_active = false;
  bool weighting_active = false;
  bool deg_active = true;
  double alpha = kDefaultAlpha;
  /// Divisors for the two means; 0 means "number of refs passed".  Lets a
  /// batch be evaluated in chunks whose gradients sum to the full-batch ones.
  std::size_t instance_divisor = 0;
  std::size_t triplet_divisor = 0;
  /// When non-empty, used instead of the entropy weights (one per instance).
  std::span<const double> fixed_weights;
};

struct LossReport {
  double l_deg = 0.0;   // weighted mean degradation-identification loss
  double l_trp = 0.0;   // mean triplet loss, 0 when inactive
  double total = 0.0;   // deg term + lambda * trp term
  std::vector<double> per_instance_weights;
  double lambda_used = 0.0;
  bool trp_active = false;
};

/// Gradients of `total` with respect to the head outputs.
struct LossGradients {
  Tensor d_logits;
  Tensor d_embedding;
};

/// Combined pretext objective.  Entropy weights multiply the degradation
/// term only and are treated as constants.  When grads is non-null it is
/// filled with d total / d logits and d total / d embedding.
LossReport total_loss(const Tensor& logits, const Tensor& embedding, std::span<const InstanceRef> instances,
                      std::span<const TripletRef> triplets, const LossOptions& opts, LossGradients* grads = nullptr);

inline LossReport total_loss(const ForwardTrace& trace, std::span<const InstanceRef> instances,
                             std::span<const TripletRef> triplets, const LossOptions& opts,
                             LossGradients* grads = nullptr) {
  return total_loss(trace.logits, trace.embedding, instances, triplets, opts, grads);
}

} // namespace ssae
