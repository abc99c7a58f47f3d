// In-memory JPEG baseline simulation: YCbCr without chroma subsampling,
// 8x8 DCT-II, IJG-scaled Annex K quantization.  Entropy coding is lossless and
// therefore omitted.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ssae/manips.hpp"
#include "ssae/pixel_ops.hpp"

namespace ssae {

namespace {

constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99,
};

constexpr std::array<int, 64> kChromaTable = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
};

// basis[u][x] = C(u)/2 * cos((2x + 1) u pi / 16); the 2-D transform is the
// separable product, giving the standard 1/4 C(u) C(v) normalization.
// Sums run in extended precision and are rounded to double once: with 8-bit
// integer samples many coefficients sit exactly on a quantization tie (the DC
// term is sum / 8), and the half-away rule must see the exact value.
using Wide = long double;

const std::array<std::array<Wide, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<Wide, 8>, 8> b{};
    const Wide pi = std::numbers::pi_v<Wide>;
    for (int u = 0; u < 8; ++u) {
      const Wide cu = u == 0 ? 1.0L / std::sqrt(Wide{2}) : 1.0L;
      for (int x = 0; x < 8; ++x) {
        b[u][x] = 0.5L * cu * std::cos(static_cast<Wide>((2 * x + 1) * u) * pi / 16.0L);
      }
    }
    return b;
  }();
  return basis;
}

void fdct8x8(const double in[64], double out[64]) {
  const auto& b = dct_basis();
  Wide tmp[64];
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      Wide s = 0.0L;
      for (int x = 0; x < 8; ++x) s += b[u][x] * in[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  }
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      Wide s = 0.0L;
      for (int y = 0; y < 8; ++y) s += b[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = static_cast<double>(s);
    }
  }
}

void idct8x8(const double in[64], double out[64]) {
  const auto& b = dct_basis();
  Wide tmp[64];
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      Wide s = 0.0L;
      for (int v = 0; v < 8; ++v) s += b[v][y] * in[v * 8 + u];
      tmp[y * 8 + u] = s;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      Wide s = 0.0L;
      for (int u = 0; u < 8; ++u) s += b[u][x] * tmp[y * 8 + u];
      out[y * 8 + x] = static_cast<double>(s);
    }
  }
}

// Level-shifted 8-bit sample.  Chroma is centred on code 128 exactly as in
// JFIF, so zero chroma maps to sample 0 regardless of rounding direction.
double sample_level(double v, bool chroma) {
  if (chroma) return std::clamp(round_half_away((v - 0.5) * 255.0), -128.0, 127.0);
  return to_u8(v) - 128.0;
}

double unit_level(double s, bool chroma) {
  const double code = std::clamp(round_half_away(s), -128.0, 127.0);
  if (chroma) return code / 255.0 + 0.5;
  return (code + 128.0) / 255.0;
}

} // namespace

std::array<int, 64> jpeg_quant_table(int quality, bool chroma) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg_quant_table: quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  const auto& base = chroma ? kChromaTable : kLumaTable;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return q;
}

Image jpeg_simulate(const Image& p, int quality) {
  if (p.empty()) throw std::invalid_argument("jpeg_simulate: empty image");
  const bool color = p.channels() == 3;
  const Image ycc = color ? rgb_to_ycbcr(p) : p;
  const int h = p.height(), w = p.width(), nc = p.channels();
  const auto luma_q = jpeg_quant_table(quality, false);
  const auto chroma_q = jpeg_quant_table(quality, true);

  Image rec(h, w, nc);
  double block[64], coef[64];
  for (int c = 0; c < nc; ++c) {
    const auto& q = c == 0 ? luma_q : chroma_q;
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        for (int y = 0; y < 8; ++y) {
          const int sy = std::min(by + y, h - 1);
          for (int x = 0; x < 8; ++x) {
            const int sx = std::min(bx + x, w - 1);
            block[y * 8 + x] = sample_level(ycc.at(sy, sx, c), color && c > 0);
          }
        }
        fdct8x8(block, coef);
        for (int i = 0; i < 64; ++i) coef[i] = round_half_away(coef[i] / q[i]) * q[i];
        idct8x8(coef, block);
        for (int y = 0; y < 8 && by + y < h; ++y) {
          for (int x = 0; x < 8 && bx + x < w; ++x) {
            rec.at(by + y, bx + x, c) = unit_level(block[y * 8 + x], color && c > 0);
          }
        }
      }
    }
  }
  return color ? ycbcr_to_rgb(rec) : rec;
}

} // namespace ssae
