#include "ssae/manips.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ssae/pixel_ops.hpp"

namespace ssae {

namespace {

std::vector<ManipulationSpec> build_catalog() {
  struct Entry {
    OpFamily family;
    std::vector<double> params;
  };
  const std::vector<Entry> table = {
      {OpFamily::None, {0.0}},
      {OpFamily::JpegCompression, {60, 10}},
      {OpFamily::GaussianNoise, {0.2, 0.8}},
      {OpFamily::Rotation, {90, 180, 270}},
      {OpFamily::Downsampling, {4, 6}},
      {OpFamily::Quantization, {64, 8}},
      {OpFamily::Pixelation, {4, 8}},
      {OpFamily::Exposure, {0.5, 3.0}},
      {OpFamily::GaussianBlur, {0.2, 0.8}},
      {OpFamily::PatchShuffle, {0.1, 0.5}},
      {OpFamily::Mixup, {0.1, 0.4}},
  };
  std::vector<ManipulationSpec> specs;
  for (const auto& e : table) {
    for (double p : e.params) {
      specs.push_back({e.family, p, static_cast<int>(specs.size())});
    }
  }
  return specs;
}

std::vector<OrderedPair> build_pairs() {
  const auto& cat = catalog();
  std::vector<OrderedPair> pairs;
  // Catalog order already lists the aesthetically milder parameter first.
  for (std::size_t i = 1; i + 1 < cat.size(); ++i) {
    const OpFamily f = cat[i].family;
    if (f == OpFamily::Rotation || f == OpFamily::Exposure) continue;
    if (cat[i + 1].family == f && (i == 1 || cat[i - 1].family != f)) {
      pairs.push_back({f, cat[i], cat[i + 1]});
    }
  }
  return pairs;
}

int checked_int(double v, const char* what) {
  const double r = std::round(v);
  if (r != v) throw std::invalid_argument(std::string(what) + ": parameter must be integral");
  return static_cast<int>(r);
}

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-' || c == '/') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

} // namespace

std::string_view family_name(OpFamily f) {
  switch (f) {
    case OpFamily::None: return "None";
    case OpFamily::JpegCompression: return "JpegCompression";
    case OpFamily::GaussianNoise: return "GaussianNoise";
    case OpFamily::Rotation: return "Rotation";
    case OpFamily::Downsampling: return "Downsampling";
    case OpFamily::Quantization: return "Quantization";
    case OpFamily::Pixelation: return "Pixelation";
    case OpFamily::Exposure: return "Exposure";
    case OpFamily::GaussianBlur: return "GaussianBlur";
    case OpFamily::PatchShuffle: return "PatchShuffle";
    case OpFamily::Mixup: return "Mixup";
  }
  throw std::invalid_argument("family_name: unknown family");
}

AttributeGroup attribute_group(OpFamily f) {
  switch (f) {
    case OpFamily::None: return AttributeGroup::None;
    case OpFamily::JpegCompression:
    case OpFamily::GaussianNoise: return AttributeGroup::MuchNoise;
    case OpFamily::Rotation: return AttributeGroup::CameraShake;
    case OpFamily::Downsampling:
    case OpFamily::Quantization:
    case OpFamily::Pixelation: return AttributeGroup::SoftGrainy;
    case OpFamily::Exposure: return AttributeGroup::PoorLighting;
    case OpFamily::GaussianBlur: return AttributeGroup::Fuzzy;
    case OpFamily::PatchShuffle:
    case OpFamily::Mixup: return AttributeGroup::Distracting;
  }
  throw std::invalid_argument("attribute_group: unknown family");
}

std::string_view attribute_group_name(AttributeGroup g) {
  switch (g) {
    case AttributeGroup::None: return "None";
    case AttributeGroup::MuchNoise: return "Much noise";
    case AttributeGroup::CameraShake: return "Camera shake";
    case AttributeGroup::SoftGrainy: return "Soft/Grainy";
    case AttributeGroup::PoorLighting: return "Poor lighting";
    case AttributeGroup::Fuzzy: return "Fuzzy";
    case AttributeGroup::Distracting: return "Distracting";
  }
  throw std::invalid_argument("attribute_group_name: unknown group");
}

std::optional<AttributeGroup> parse_attribute_group(std::string_view name) {
  const std::string key = lower(name);
  for (auto g : {AttributeGroup::MuchNoise, AttributeGroup::CameraShake, AttributeGroup::SoftGrainy,
                 AttributeGroup::PoorLighting, AttributeGroup::Fuzzy, AttributeGroup::Distracting}) {
    if (lower(attribute_group_name(g)) == key) return g;
  }
  return std::nullopt;
}

const std::vector<ManipulationSpec>& catalog() {
  static const std::vector<ManipulationSpec> specs = build_catalog();
  return specs;
}

const std::vector<OrderedPair>& ordered_pairs() {
  static const std::vector<OrderedPair> pairs = build_pairs();
  return pairs;
}

const OrderedPair* find_pair(OpFamily f) {
  for (const auto& p : ordered_pairs()) {
    if (p.family == f) return &p;
  }
  return nullptr;
}

// --- operators -------------------------------------------------------------

Image downsample(const Image& p, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
  const int h = (p.height() + factor - 1) / factor;
  const int w = (p.width() + factor - 1) / factor;
  return bilinear_resize(bilinear_resize(p, h, w), p.height(), p.width());
}

Image add_gaussian_noise(const Image& p, double variance, RngStream& rng) {
  if (variance < 0.0) throw std::invalid_argument("add_gaussian_noise: variance must be >= 0");
  const double sd = std::sqrt(variance);
  Image out = p;
  for (double& v : out.data()) v = clip01(v + sd * rng.normal());
  return out;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  for (int x = -r; x <= r; ++x) k[x + r] = std::exp(-(x * x) / (2.0 * sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& p, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = p.height(), w = p.width(), nc = p.channels();
  Image tmp(h, w, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int d = -r; d <= r; ++d) s += k[d + r] * p.at(y, reflect_index(x + d, w), c);
        tmp.at(y, x, c) = s;
      }
    }
  }
  Image out(h, w, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int d = -r; d <= r; ++d) s += k[d + r] * tmp.at(reflect_index(y + d, h), x, c);
        out.at(y, x, c) = clip01(s);
      }
    }
  }
  return out;
}

Image quantize_levels(const Image& p, int levels) {
  if (levels < 2) throw std::invalid_argument("quantize_levels: need at least 2 levels");
  const double steps = levels - 1;
  Image out = p;
  for (double& v : out.data()) v = clip01(round_half_away(v * steps) / steps);
  return out;
}

Image exposure(const Image& p, double gain) {
  if (gain < 0.0) throw std::invalid_argument("exposure: gain must be >= 0");
  Image out = p;
  for (double& v : out.data()) v = clip01(v * gain);
  return out;
}

Image patch_shuffle(const Image& p, double fraction, RngStream& rng) {
  constexpr int kGrid = 8;
  constexpr int kCells = kGrid * kGrid;
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("patch_shuffle: fraction must be in [0, 1]");
  if (p.height() < kGrid || p.width() < kGrid) {
    throw std::invalid_argument("patch_shuffle: image smaller than the 8x8 grid");
  }
  const int count = static_cast<int>(std::ceil(fraction * kCells));
  if (count == 0) return p;

  std::array<int, kCells> cells;
  std::iota(cells.begin(), cells.end(), 0);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint32_t>(kCells - i)));
    std::swap(cells[i], cells[j]);
  }
  std::vector<int> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = count - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint32_t>(i + 1)));
    std::swap(perm[i], perm[j]);
  }

  // Cells are the equal-sized ch x cw blocks of the grid; remainder rows and
  // columns belong to the last grid row/column and stay in place.
  const int ch = p.height() / kGrid, cw = p.width() / kGrid, nc = p.channels();
  Image out = p;
  for (int i = 0; i < count; ++i) {
    const int dst = cells[i], src = cells[perm[i]];
    const int dy = (dst / kGrid) * ch, dx = (dst % kGrid) * cw;
    const int sy = (src / kGrid) * ch, sx = (src % kGrid) * cw;
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        for (int c = 0; c < nc; ++c) out.at(dy + y, dx + x, c) = p.at(sy + y, sx + x, c);
      }
    }
  }
  return out;
}

Image pixelate(const Image& p, int block) {
  if (block < 1) throw std::invalid_argument("pixelate: block must be >= 1");
  const int h = p.height(), w = p.width(), nc = p.channels();
  Image out(h, w, nc);
  for (int by = 0; by < h; by += block) {
    const int ey = std::min(by + block, h);
    for (int bx = 0; bx < w; bx += block) {
      const int ex = std::min(bx + block, w);
      const double n = static_cast<double>((ey - by) * (ex - bx));
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int y = by; y < ey; ++y) {
          for (int x = bx; x < ex; ++x) s += p.at(y, x, c);
        }
        const double mean = clip01(s / n);
        for (int y = by; y < ey; ++y) {
          for (int x = bx; x < ex; ++x) out.at(y, x, c) = mean;
        }
      }
    }
  }
  return out;
}

// Counter-clockwise rotation by a multiple of 90 degrees.
Image rotate(const Image& p, int degrees) {
  const int h = p.height(), w = p.width(), nc = p.channels();
  if (degrees != 0 && degrees != 90 && degrees != 180 && degrees != 270) {
    throw std::invalid_argument("rotate: degrees must be 0, 90, 180 or 270");
  }
  if (degrees % 180 != 0 && h != w) throw std::invalid_argument("rotate: 90/270 degree rotation needs a square image");
  Image out(h, w, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sy = 0, sx = 0;
      switch (degrees) {
        case 0: sy = y; sx = x; break;
        case 90: sy = x; sx = w - 1 - y; break;
        case 180: sy = h - 1 - y; sx = w - 1 - x; break;
        default: sy = h - 1 - x; sx = y; break;
      }
      for (int c = 0; c < nc; ++c) out.at(y, x, c) = p.at(sy, sx, c);
    }
  }
  return out;
}

Image mixup(const Image& p, const Image& partner, double alpha) {
  if (!p.same_shape(partner)) throw std::invalid_argument("mixup: partner shape mismatch");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("mixup: alpha must be in [0, 1]");
  Image out = p;
  auto a = out.data();
  auto b = partner.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = clip01((1.0 - alpha) * a[i] + alpha * b[i]);
  return out;
}

Image apply(const ManipulationSpec& spec, const Image& p, RngStream& rng, const Image* partner) {
  if (p.empty()) throw std::invalid_argument("apply: empty image");
  switch (spec.family) {
    case OpFamily::None: return p;
    case OpFamily::JpegCompression: return jpeg_simulate(p, checked_int(spec.param, "JpegCompression"));
    case OpFamily::GaussianNoise: return add_gaussian_noise(p, spec.param, rng);
    case OpFamily::Rotation: return rotate(p, checked_int(spec.param, "Rotation"));
    case OpFamily::Downsampling: return downsample(p, checked_int(spec.param, "Downsampling"));
    case OpFamily::Quantization: return quantize_levels(p, checked_int(spec.param, "Quantization"));
    case OpFamily::Pixelation: return pixelate(p, checked_int(spec.param, "Pixelation"));
    case OpFamily::Exposure: return exposure(p, spec.param);
    case OpFamily::GaussianBlur: return gaussian_blur(p, spec.param);
    case OpFamily::PatchShuffle: return patch_shuffle(p, spec.param, rng);
    case OpFamily::Mixup:
      if (partner == nullptr) throw std::invalid_argument("apply: Mixup requires a partner image");
      return mixup(p, *partner, spec.param);
  }
  throw std::invalid_argument("apply: unknown operation family");
}

} // namespace ssae
