#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ssae/corpus.hpp"
#include "ssae/probe.hpp"
#include "ssae/report.hpp"
#include "ssae/run_config.hpp"
#include "ssae/trainer.hpp"

namespace ssae {

/// Patches and ids of one corpus split, in manifest order.
struct SplitPatches {
  std::vector<Image> patches;
  std::vector<std::uint64_t> ids;
};
SplitPatches split_patches(const Corpus& corpus, Split split);

/// The evaluation set named by the config: labels CSV if given, else the
/// synthetic clean-vs-degraded set.
EvalDataset make_eval_dataset(const RunConfig& cfg);

/// Per-block probe rows for a trained encoder and, when enabled, for the
/// random-init encoder of the same seed.
BlockReport probe_blocks(const ParamSet& pretrained, const RunConfig& cfg, const EvalDataset& data);

struct AblationVariant {
  std::string name;
  RunConfig config;
};

/// Full model, each attribute group excluded, weighting off, and each loss
/// alone.
std::vector<AblationVariant> standard_ablations(const RunConfig& base);

/// Synthesize, pre-train, and evaluate every variant.  Pretext accuracy is
/// measured on the corpus val split; the probe uses cfg.probe.block_index.
std::vector<AblationRow> run_ablations(const std::vector<AblationVariant>& variants, const EvalDataset& data,
                                       const std::function<void(const std::string&)>& progress = {});

} // namespace ssae
