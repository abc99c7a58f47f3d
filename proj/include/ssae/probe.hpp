#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssae/encoder.hpp"
#include "ssae/image.hpp"
#include "ssae/manips.hpp"
#include "ssae/tensor.hpp"

namespace ssae {

/// Binary aesthetic dataset: label 1 = positive (clean), 0 = negative.
struct EvalDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  /// Clean source of each item (equal to the image for positives); empty
  /// when loaded from disk.
  std::vector<Image> sources;
  /// Catalog class applied to each item (0 for positives / unknown).
  std::vector<int> applied_class;
  std::vector<std::size_t> train, val, test;

  void validate() const;
};

/// n/2 clean procedural patches (positive) and n - n/2 patches degraded by
/// one uniformly drawn non-None catalog manipulation (negative); stratified
/// 70/10/20 split.  n must be >= 100.
EvalDataset make_synthetic_aesthetic_set(int n, std::uint64_t root_seed, int patch_size = 64,
                                         int source_height = 96, int source_width = 128);

/// Labels CSV with header "path,label" (paths relative to the CSV file).
/// Images are short-edge resized and cropped to patch_size; the split is a
/// seeded stratified 70/10/20.
EvalDataset load_labeled_folder(const std::filesystem::path& labels_csv, int patch_size, std::uint64_t root_seed);

enum class ProbeHead { Linear, Mlp };

struct ProbeConfig {
  int block_index = 4;
  ProbeHead head = ProbeHead::Linear;
  int hidden = 128;
  int pool_out = 4;
  double lr0 = 0.01;
  double lr_decay = 0.2;
  int lr_step_epochs = 10;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 30;
  int batch_size = 64;
  double label_fraction = 1.0;
  /// Z-score features with train-split statistics before the head.
  bool standardize = true;
  std::uint64_t root_seed = 1;

  void validate() const;
};

/// Adaptive average pooling of [N, C, H, W] to [N, C * out * out].
Tensor adaptive_avg_pool_flatten(const Tensor& act, int out);

/// Frozen-trunk features for every dataset item at a block.
Tensor probe_features(const ParamSet& params, const EncoderConfig& enc, std::span<const Image> images,
                      int block_index, int pool_out);

/// Per-class seeded subsample of train indices: round(fraction * count) per class.
std::vector<std::size_t> stratified_subsample(std::span<const std::size_t> indices, std::span<const int> labels,
                                              double fraction, std::uint64_t root_seed);

struct ProbeResult {
  int block_index = 0;
  double label_fraction = 1.0;
  double test_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::size_t trainable_scalars = 0;
};

/// Train a linear or MLP head on frozen block features; returns the test
/// accuracy of the best-validation epoch.  params are never modified.
ProbeResult probe_train(const ParamSet& params, const EncoderConfig& enc, const EvalDataset& data,
                        const ProbeConfig& cfg);

/// Same as probe_train but on precomputed features (rows aligned with data).
ProbeResult probe_train_on_features(const Tensor& features, const EvalDataset& data, const ProbeConfig& cfg);

std::vector<ProbeResult> low_data_sweep(const ParamSet& params, const EncoderConfig& enc, const EvalDataset& data,
                                        std::span<const double> fractions, const ProbeConfig& cfg);

inline const std::vector<double> kDefaultFractions = {0.05, 0.10, 0.25, 0.50, 1.0};

/// Wilson score interval (95%) for an accuracy measured on n samples.
std::pair<double, double> wilson_interval(double accuracy, std::size_t n);

} // namespace ssae
