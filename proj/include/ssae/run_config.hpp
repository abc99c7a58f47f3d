#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssae/corpus.hpp"
#include "ssae/encoder.hpp"
#include "ssae/probe.hpp"
#include "ssae/trainer.hpp"

namespace ssae {

/// Raised for an invalid experiment configuration; the message names the key.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Settings of the evaluation stage beyond a single probe.
struct EvalConfig {
  /// Synthetic clean-vs-degraded set size (ignored when labels_csv is set).
  int count = 2000;
  std::optional<std::filesystem::path> labels_csv;
  std::vector<int> blocks = {1, 2, 3, 4, 5};
  std::vector<double> fractions = kDefaultFractions;
  /// Also probe a randomly initialized encoder as the baseline row.
  bool random_baseline = true;
};

/// One experiment record.  A single root_seed feeds every stage; the
/// ablation switches are applied to both corpus synthesis and training.
struct RunConfig {
  std::uint64_t root_seed = 1;
  SourceSpec source;
  PatchConfig patch;
  EncoderConfig encoder;
  TrainConfig train;
  ProbeConfig probe;
  EvalConfig eval;

  std::vector<AttributeGroup> exclude_attribute_groups;
  bool disable_weighting = false;
  bool disable_trp = false;
  bool disable_deg = false;

  /// Copies shared settings (seed, ablations, ops per patch, patch size)
  /// into the per-stage structs and validates everything.
  void resolve();
};

/// Unknown keys anywhere in the document raise ConfigError naming the key.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the fully materialized configuration (all defaults expanded).
void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& path);

} // namespace ssae
