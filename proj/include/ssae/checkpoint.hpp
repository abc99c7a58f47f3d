#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ssae/encoder.hpp"
#include "ssae/tensor.hpp"

namespace ssae {

/// Raised for malformed, truncated or incompatible checkpoint files.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json encoder_config_to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ParamSet params;
  EncoderConfig config;
  /// Free-form metadata.  save_checkpoint adds "encoder" and
  /// "catalog_version"; the trainer adds "epoch", "rng" and "train".
  nlohmann::json meta = nlohmann::json::object();
};

// Layout (little-endian): "SSAE", u32 version, u64 metadata length, metadata
// JSON, then per parameter: u32 name length, name, u8 dtype (0 = f64,
// 1 = f32), u32 rank, u64 dims[rank], raw values.
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const EncoderConfig& cfg,
                     nlohmann::json meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace ssae
