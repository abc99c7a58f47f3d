#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ssae/image.hpp"
#include "ssae/rng.hpp"

namespace ssae {

/// Bumped whenever class indices or parameters change; embedded in checkpoints
/// and corpus metadata.
inline constexpr int kCatalogVersion = 1;
inline constexpr int kNumClasses = 22;

enum class OpFamily {
  None,
  JpegCompression,
  GaussianNoise,
  Rotation,
  Downsampling,
  Quantization,
  Pixelation,
  Exposure,
  GaussianBlur,
  PatchShuffle,
  Mixup,
};

inline constexpr int kNumFamilies = 11;

/// Perceptual attribute a family degrades.
enum class AttributeGroup { None, MuchNoise, CameraShake, SoftGrainy, PoorLighting, Fuzzy, Distracting };

std::string_view family_name(OpFamily f);
AttributeGroup attribute_group(OpFamily f);
std::string_view attribute_group_name(AttributeGroup g);
/// Case-insensitive lookup of "Much noise", "Camera shake", "Soft/Grainy",
/// "Poor lighting", "Fuzzy", "Distracting".  Returns nullopt when unknown.
std::optional<AttributeGroup> parse_attribute_group(std::string_view name);

struct ManipulationSpec {
  OpFamily family = OpFamily::None;
  double param = 0.0;
  int class_index = 0;

  bool operator==(const ManipulationSpec&) const = default;
};

struct OrderedPair {
  OpFamily family;
  ManipulationSpec mild;
  ManipulationSpec severe;
};

/// The 22 pretext classes, None first.  Order is part of the checkpoint contract.
const std::vector<ManipulationSpec>& catalog();

/// The 8 families whose two parameters have a known aesthetic ordering.
const std::vector<OrderedPair>& ordered_pairs();

/// Ordered pair for a family, if it has one.
const OrderedPair* find_pair(OpFamily f);

/// Apply one manipulation.  `partner` is required for Mixup and must match p's
/// shape.  Rotation by 90/270 requires a square image.  Output shape always
/// equals the input shape.
Image apply(const ManipulationSpec& spec, const Image& p, RngStream& rng,
            const Image* partner = nullptr);

// Individual operators, exposed for tests and tools.  Parameters are not
// restricted to catalog values.
Image downsample(const Image& p, int factor);
Image jpeg_simulate(const Image& p, int quality);
Image add_gaussian_noise(const Image& p, double variance, RngStream& rng);
Image gaussian_blur(const Image& p, double sigma);
Image quantize_levels(const Image& p, int levels);
Image exposure(const Image& p, double gain);
Image patch_shuffle(const Image& p, double fraction, RngStream& rng);
Image pixelate(const Image& p, int block);
Image rotate(const Image& p, int degrees);
Image mixup(const Image& p, const Image& partner, double alpha);

/// IJG-scaled Annex-K quantization table, row-major 8x8.
std::array<int, 64> jpeg_quant_table(int quality, bool chroma);

/// Normalized Gaussian kernel of radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Reflect an out-of-range index into [0, n) without repeating the edge sample.
int reflect_index(int i, int n);

} // namespace ssae
