#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssae/image.hpp"
#include "ssae/manips.hpp"
#include "ssae/rng.hpp"

namespace ssae {

/// Natural-looking synthetic RGB image: a sky-to-ground gradient, one to four
/// anti-aliased disks or rectangles, and low-amplitude value noise.  The
/// gradient is brighter at the top so that orientation is recoverable.
Image generate_procedural(RngStream& rng, int height, int width);

struct CropRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const CropRect&) const = default;
};

struct ExtractedPatch {
  Image patch;
  CropRect rect;  // in the coordinates of the short-edge-resized image
};

/// Resize so the short edge equals resize_short (aspect preserved), then take
/// a uniformly placed crop x crop window.
ExtractedPatch extract_patch_with_rect(const Image& img, RngStream& rng, int resize_short, int crop);
Image extract_patch(const Image& img, RngStream& rng, int resize_short, int crop);

struct PretextInstance {
  std::uint64_t patch_id = 0;
  std::size_t patch_index = 0;  // position in the synthesized batch
  Image image;
  int class_index = 0;
  ManipulationSpec spec;
};

struct Triplet {
  std::uint64_t patch_id = 0;
  std::size_t patch_index = 0;
  Image anchor;
  Image mild_img;
  Image severe_img;
  OrderedPair pair;
};

struct SynthBatch {
  std::vector<PretextInstance> instances;
  std::vector<Triplet> triplets;
};

/// Non-None class indices that survive excluding the given attribute groups.
std::vector<int> allowed_classes(std::span<const AttributeGroup> excluded = {});

/// Class indices drawn for one patch: ops_per_patch distinct non-None classes
/// from `allowed`, followed by class 0 with probability
/// ops_per_patch / allowed.size() (the rate of each drawn class).
std::vector<int> plan_patch_ops(RngStream& patch_rng, int ops_per_patch, std::span<const int> allowed);

/// Per-patch stream used for both planning and rendering.
RngStream patch_stream(const RngStream& batch_rng, std::uint64_t patch_id);

/// Build the pretext instances and triplets for a batch.  Patch i uses the
/// stream batch_rng.fork(patch_ids[i]) (ids default to batch positions), and
/// its Mixup partner is patch (i + 1) mod N.  Every sampled family that has
/// an ordered pair yields one triplet.
SynthBatch synth_batch(std::span<const Image> patches, const RngStream& rng, int ops_per_patch = 3,
                       std::span<const std::uint64_t> patch_ids = {}, std::span<const int> allowed = {});

/// Render one manipulation for a patch with its canonical sibling stream, so
/// the same (patch stream, class) always yields the same pixels.
Image render_manipulation(const ManipulationSpec& spec, const Image& patch, const RngStream& patch_rng,
                          const Image* partner);

} // namespace ssae
