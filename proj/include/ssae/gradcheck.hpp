#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssae/encoder.hpp"

namespace ssae {

struct GradcheckOptions {
  /// Parameters checked; spread round-robin over every tensor.
  int samples = 240;
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Clean patches feeding the pretext batch.
  int patches = 2;
  double lambda = 0.02;
  std::uint64_t root_seed = 1;
  /// Only parameters whose gradient reaches this are sampled: at step 1e-5
  /// the float64 forward pass resolves a derivative to about 5e-12
  /// absolute, so a relative error below 1e-5 is measurable only above
  /// roughly 1e-6.
  double min_gradient = 1e-6;
  /// Attempts per sample before giving up on finding a smooth point.
  int max_resamples = 50;
};

struct GradcheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  /// Draws rejected because the +-step points straddled a ReLU, max-pool or
  /// hinge switch.
  std::size_t resampled = 0;
  /// Parameters left out of sampling because their gradient is below
  /// min_gradient (exact zeros from inactive units included).
  std::size_t skipped_small = 0;
  double tolerance = 0.0;

  bool passed() const { return !entries.empty() && max_rel_error < tolerance; }
};

/// |a - n| / max(|a|, |n|), and 0 when both are exactly zero.
double relative_error(double analytic, double numeric);

/// Central-difference check of d total_loss / d params for a freshly
/// initialized encoder on a small synthesized pretext batch, with both heads
/// active (triplet term on) and fixed per-instance weights.
GradcheckReport run_gradcheck(const EncoderConfig& enc, const GradcheckOptions& opts = {});

} // namespace ssae
