#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "ssae/encoder.hpp"
#include "ssae/image.hpp"
#include "ssae/manips.hpp"
#include "ssae/objectives.hpp"
#include "ssae/tensor.hpp"

namespace ssae {

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = true;
};

struct TrainConfig {
  int batch_size = 64;
  double lr0 = 0.1;
  double lr_decay = 0.2;
  int lr_step_epochs = 10;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 50;
  int trp_activation_epoch = 30;
  double lambda = 0.02;
  int weighting_warmup_epochs = 5;
  double alpha = kDefaultAlpha;
  int ops_per_patch = 3;
  std::uint64_t root_seed = 1;
  int checkpoint_every = 10;
  /// Patches per forward/backward chunk; bounds activation memory only.
  int chunk_patches = 8;

  // Ablation switches.
  std::vector<AttributeGroup> excluded_groups;
  bool disable_weighting = false;
  bool disable_trp = false;
  bool disable_deg = false;

  void validate() const;
  SgdOptions sgd() const { return {momentum, weight_decay, true}; }
  bool trp_active(int epoch) const;
  bool weighting_active(int epoch) const;
  /// Coefficient on the triplet term: lambda, or 1 when it is the only loss.
  double trp_coefficient() const { return disable_deg ? 1.0 : lambda; }
};

struct HistoryRow {
  int epoch = 0;
  double l_deg = 0.0;
  double l_trp = 0.0;
  double total = 0.0;
  double mean_weight = 0.0;
  double lr = 0.0;
  bool operator==(const HistoryRow&) const = default;
};

struct TrainState {
  ParamSet params;
  ParamSet velocity;
  int epoch = 0;
  std::uint64_t rng_state = 0;
  std::uint64_t rng_increment = 1;
  std::vector<HistoryRow> history;
};

/// Raised when a loss becomes non-finite; `state` is a diagnostic dump.
class NumericError : public std::runtime_error {
public:
  NumericError(const std::string& what, nlohmann::json state)
      : std::runtime_error(what), state(std::move(state)) {}
  nlohmann::json state;
};

/// SGD with weight decay and Nesterov momentum:
///   g' = g + wd * theta;  v = mu * v + g';  theta -= lr * (g' + mu * v).
void sgd_step(ParamSet& params, ParamSet& velocity, const ParamSet& grads, double lr, const SgdOptions& opts);

/// Step decay: lr0 * decay^floor(epoch / step).
double lr_at(int epoch, double lr0, double decay = 0.2, int step = 10);
inline double lr_at(int epoch, const TrainConfig& cfg) {
  return lr_at(epoch, cfg.lr0, cfg.lr_decay, cfg.lr_step_epochs);
}

struct BatchResult {
  LossReport report;
  ParamSet grads;
  std::size_t instances = 0;
  std::size_t triplets = 0;
};

/// Synthesize a batch from clean patches and return loss and gradients.
BatchResult pretext_batch_gradients(const ParamSet& params, const EncoderConfig& enc, const TrainConfig& cfg,
                                    int epoch, std::span<const Image> patches,
                                    std::span<const std::uint64_t> patch_ids);

struct PretrainHooks {
  std::function<void(int epoch, int batch, const LossReport&)> on_batch;
  std::function<void(const TrainState&)> on_epoch_end;
};

/// Pre-train on clean patches (ids give each patch its own streams).  Epochs
/// run from state.epoch to cfg.epochs; pass a fresh state from init_state().
TrainState init_state(const EncoderConfig& enc, const TrainConfig& cfg);
void pretrain(TrainState& state, const EncoderConfig& enc, const TrainConfig& cfg, std::span<const Image> patches,
              std::span<const std::uint64_t> patch_ids, const PretrainHooks& hooks = {});

/// Checkpoint metadata for a training state.
nlohmann::json train_meta(const TrainState& state, const TrainConfig& cfg);

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

/// 22-way accuracy on held-out patches: every patch is rendered under every
/// catalog class (Mixup partner = next patch) with streams from root_seed.
struct PretextEval {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::size_t samples = 0;
};
PretextEval evaluate_pretext(const ParamSet& params, const EncoderConfig& enc, std::span<const Image> patches,
                             std::uint64_t root_seed);

} // namespace ssae
