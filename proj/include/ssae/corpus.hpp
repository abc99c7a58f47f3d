#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssae/image.hpp"
#include "ssae/manips.hpp"
#include "ssae/pretext_data.hpp"

namespace ssae {

struct SourceSpec {
  enum class Kind { Procedural, Folder };
  Kind kind = Kind::Procedural;
  int count = 2000;
  std::uint64_t root_seed = 1;
  std::optional<std::filesystem::path> folder_path;
  int source_height = 96;
  int source_width = 128;
};

struct PatchConfig {
  int resize_short = 72;
  int crop = 64;
  double val_fraction = 0.1;
  int ops_per_patch = 3;
  std::vector<AttributeGroup> excluded_groups;
};

enum class Split { Train, Val };

struct ManifestEntry {
  std::uint64_t patch_id = 0;
  std::string source_ref;
  CropRect crop_rect;
  std::vector<int> ops_applied;
  Split split = Split::Train;
  bool operator==(const ManifestEntry&) const = default;
};

/// Clean patches plus their manifest.  ops_applied is the epoch-0 draw of the
/// pretext synthesis for that patch; training redraws every epoch.
struct Corpus {
  std::uint64_t root_seed = 0;
  int catalog_version = kCatalogVersion;
  int patch_size = 0;
  std::vector<ManifestEntry> entries;
  std::vector<Image> patches;     // 8-bit-exact, one per entry
  std::vector<std::string> files; // manifest-relative PNG path per entry

  std::vector<std::size_t> indices(Split split) const;
};

/// Batch stream for epoch e; synth_batch forks it per patch id.
RngStream epoch_ops_stream(std::uint64_t root_seed, int epoch);

Corpus build_corpus(const SourceSpec& source, const PatchConfig& patch);

/// Writes manifest.jsonl, meta.json and images/<hh>/<hash>.png under dir.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

std::string manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(const std::string& line);

/// FNV-1a 64 over dimensions and 8-bit codes, as 16 hex digits.
std::string content_hash(const Image& img);

/// PNG files directly inside dir, sorted by name.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

} // namespace ssae
