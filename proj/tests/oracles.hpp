// Independent reference implementations used as test oracles.  They follow
// the published algorithms and textbook formulas directly, favouring plain
// loops over speed, and share no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ssae/image.hpp"

namespace oracle {

// --- SplitMix64 + PCG32, transcribed from the reference sources ---------------

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Pcg32 {
  std::uint64_t state = 0, inc = 0;

  std::uint32_t random_r() {
    std::uint64_t oldstate = state;
    state = oldstate * 6364136223846793005ULL + inc;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((oldstate >> 18u) ^ oldstate) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(oldstate >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
  }
  void srandom_r(std::uint64_t initstate, std::uint64_t initseq) {
    state = 0U;
    inc = (initseq << 1u) | 1u;
    random_r();
    state += initstate;
    random_r();
  }
  std::uint32_t boundedrand_r(std::uint32_t bound) {
    std::uint32_t threshold = -bound % bound;
    for (;;) {
      std::uint32_t r = random_r();
      if (r >= threshold) return r % bound;
    }
  }
};

/// Stream as documented: SplitMix64 over (root ^ id) yields initstate then
/// initseq; doubles take 27 + 26 high bits of two outputs.
struct Rng {
  Pcg32 pcg;
  Rng(std::uint64_t root, std::uint64_t id) {
    std::uint64_t x = root ^ id;
    const std::uint64_t s = splitmix64(x);
    const std::uint64_t q = splitmix64(x);
    pcg.srandom_r(s, q);
  }
  double uniform() {
    const double a = pcg.random_r() >> 5, b = pcg.random_r() >> 6;
    return (a * 67108864.0 + b) / 9007199254740992.0;
  }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint32_t below(std::uint32_t n) { return pcg.boundedrand_r(n); }
};

inline double clip(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }
inline double round_away(double v) { return v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

// --- pixel operations ---------------------------------------------------------

inline ssae::Image bilinear(const ssae::Image& in, int oh, int ow) {
  ssae::Image out(oh, ow, in.channels());
  const int ih = in.height(), iw = in.width();
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const double sy = std::clamp((i + 0.5) * ih / oh - 0.5, 0.0, ih - 1.0);
      const double sx = std::clamp((j + 0.5) * iw / ow - 0.5, 0.0, iw - 1.0);
      const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
      const int y1 = std::min(y0 + 1, ih - 1), x1 = std::min(x0 + 1, iw - 1);
      const double fy = sy - y0, fx = sx - x0;
      for (int c = 0; c < in.channels(); ++c) {
        const double v = (1 - fy) * (1 - fx) * in.at(y0, x0, c) + (1 - fy) * fx * in.at(y0, x1, c) +
                         fy * (1 - fx) * in.at(y1, x0, c) + fy * fx * in.at(y1, x1, c);
        out.at(i, j, c) = clip(v);
      }
    }
  }
  return out;
}

inline ssae::Image downsample(const ssae::Image& p, int k) {
  const int h = (p.height() + k - 1) / k, w = (p.width() + k - 1) / k;
  return bilinear(bilinear(p, h, w), p.height(), p.width());
}

/// Textbook JFIF equations (ITU-T T.871) on 0..255 values.
inline void rgb_to_ycc255(double r, double g, double b, double& y, double& cb, double& cr) {
  y = 0.299 * r + 0.587 * g + 0.114 * b;
  cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
  cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
}
inline void ycc255_to_rgb(double y, double cb, double cr, double& r, double& g, double& b) {
  r = y + 1.402 * (cr - 128.0);
  g = y - 0.3441362862 * (cb - 128.0) - 0.7141362862 * (cr - 128.0);
  b = y + 1.772 * (cb - 128.0);
}

/// JPEG baseline round trip from the defining formulas: 8-bit YCbCr samples,
/// F(u,v) = 1/4 C(u) C(v) sum f(x,y) cos((2x+1)u pi/16) cos((2y+1)v pi/16),
/// uniform quantization with IJG-scaled Annex K tables, direct inverse.
inline ssae::Image jpeg(const ssae::Image& p, int q) {
  static const int luma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                               14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                               18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                               49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  static const int chroma[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  const int scale = q < 50 ? 5000 / q : 200 - 2 * q;
  const int h = p.height(), w = p.width();
  // 8-bit sample planes.
  std::vector<std::vector<double>> plane(3, std::vector<double>(static_cast<std::size_t>(h * w)));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double Y, Cb, Cr;
      rgb_to_ycc255(p.at(y, x, 0) * 255.0, p.at(y, x, 1) * 255.0, p.at(y, x, 2) * 255.0, Y, Cb, Cr);
      plane[0][y * w + x] = std::clamp(round_away(Y), 0.0, 255.0);
      plane[1][y * w + x] = std::clamp(round_away(Cb), 0.0, 255.0);
      plane[2][y * w + x] = std::clamp(round_away(Cr), 0.0, 255.0);
    }
  }
  // Sums in extended precision, rounded to double once, so coefficients that
  // are exactly on a quantization tie stay there.
  using W = long double;
  const W pi = std::numbers::pi_v<W>;
  auto cosine = [&](int a, int b) { return std::cos(static_cast<W>((2 * a + 1) * b) * pi / 16.0L); };
  auto norm = [](int u, int v) {
    const W cu = u == 0 ? 1.0L / std::sqrt(W{2}) : 1.0L, cv = v == 0 ? 1.0L / std::sqrt(W{2}) : 1.0L;
    return cu * cv;
  };
  for (int c = 0; c < 3; ++c) {
    const int* base = c == 0 ? luma : chroma;
    std::vector<double> rec(plane[c].size());
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        double f[8][8], F[8][8];
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) f[y][x] = plane[c][std::min(by + y, h - 1) * w + std::min(bx + x, w - 1)] - 128.0;
        for (int v = 0; v < 8; ++v) {
          for (int u = 0; u < 8; ++u) {
            W s = 0.0L;
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x) s += f[y][x] * cosine(x, u) * cosine(y, v);
            const int qv = std::clamp((base[v * 8 + u] * scale + 50) / 100, 1, 255);
            const double coef = static_cast<double>(0.25L * norm(u, v) * s);
            F[v][u] = round_away(coef / qv) * qv;
          }
        }
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            if (by + y >= h || bx + x >= w) continue;
            W s = 0.0L;
            for (int v = 0; v < 8; ++v)
              for (int u = 0; u < 8; ++u) s += norm(u, v) * F[v][u] * cosine(x, u) * cosine(y, v);
            rec[(by + y) * w + bx + x] = std::clamp(round_away(static_cast<double>(0.25L * s) + 128.0), 0.0, 255.0);
          }
        }
      }
    }
    plane[c] = rec;
  }
  ssae::Image out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r, g, b;
      ycc255_to_rgb(plane[0][y * w + x], plane[1][y * w + x], plane[2][y * w + x], r, g, b);
      out.at(y, x, 0) = clip(r / 255.0);
      out.at(y, x, 1) = clip(g / 255.0);
      out.at(y, x, 2) = clip(b / 255.0);
    }
  }
  return out;
}

/// Mirror about the edge samples (…, 2, 1, 0, 1, 2, …) by repeated folding.
inline int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

/// Full 2-D Gaussian convolution (not separated).
inline ssae::Image blur(const ssae::Image& p, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  double norm = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) norm += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
  ssae::Image out(p.height(), p.width(), p.channels());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      for (int c = 0; c < p.channels(); ++c) {
        double s = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            s += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) *
                 p.at(mirror(y + dy, p.height()), mirror(x + dx, p.width()), c);
        out.at(y, x, c) = clip(s / norm);
      }
  return out;
}

inline ssae::Image noise(const ssae::Image& p, double variance, Rng& rng) {
  ssae::Image out = p;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      for (int c = 0; c < p.channels(); ++c) out.at(y, x, c) = clip(p.at(y, x, c) + std::sqrt(variance) * rng.normal());
  return out;
}

inline ssae::Image quantize(const ssae::Image& p, int levels) {
  ssae::Image out = p;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      for (int c = 0; c < p.channels(); ++c) out.at(y, x, c) = round_away(p.at(y, x, c) * (levels - 1)) / (levels - 1);
  return out;
}

inline ssae::Image pixelate(const ssae::Image& p, int s) {
  ssae::Image out = p;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      for (int c = 0; c < p.channels(); ++c) {
        const int y0 = y / s * s, x0 = x / s * s;
        double sum = 0.0;
        int n = 0;
        for (int yy = y0; yy < std::min(y0 + s, p.height()); ++yy)
          for (int xx = x0; xx < std::min(x0 + s, p.width()); ++xx, ++n) sum += p.at(yy, xx, c);
        out.at(y, x, c) = sum / n;
      }
  return out;
}

inline ssae::Image exposure(const ssae::Image& p, double g) {
  ssae::Image out = p;
  for (double& v : out.data()) v = clip(v * g);
  return out;
}

inline ssae::Image mixup(const ssae::Image& p, const ssae::Image& q, double a) {
  ssae::Image out = p;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = (1 - a) * p.data()[i] + a * q.data()[i];
  return out;
}

/// Counter-clockwise quarter turns: one turn maps column W-1-i of the input
/// to row i of the output (numpy rot90 convention).
inline ssae::Image rotate(const ssae::Image& p, int degrees) {
  ssae::Image cur = p;
  for (int t = 0; t < degrees / 90; ++t) {
    ssae::Image next(cur.width(), cur.height(), cur.channels());
    for (int i = 0; i < next.height(); ++i)
      for (int j = 0; j < next.width(); ++j)
        for (int c = 0; c < cur.channels(); ++c) next.at(i, j, c) = cur.at(j, cur.width() - 1 - i, c);
    cur = next;
  }
  return cur;
}

/// Grid-cell shuffle: choose ceil(rho * 64) cells by a partial Fisher-Yates
/// draw, then permute their contents with a Fisher-Yates shuffle.
inline ssae::Image patch_shuffle(const ssae::Image& p, double rho, Rng& rng) {
  const int count = static_cast<int>(std::ceil(rho * 64));
  std::vector<int> cells(64);
  for (int i = 0; i < 64; ++i) cells[i] = i;
  for (int i = 0; i < count; ++i) std::swap(cells[i], cells[i + rng.below(64 - i)]);
  std::vector<int> perm(count);
  for (int i = 0; i < count; ++i) perm[i] = i;
  for (int i = count - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  ssae::Image out = p;
  const int ch = p.height() / 8, cw = p.width() / 8;
  for (int i = 0; i < count; ++i) {
    const int d = cells[i], s = cells[perm[i]];
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x)
        for (int c = 0; c < p.channels(); ++c)
          out.at(d / 8 * ch + y, d % 8 * cw + x, c) = p.at(s / 8 * ch + y, s % 8 * cw + x, c);
  }
  return out;
}

inline double max_abs_diff(const ssae::Image& a, const ssae::Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline ssae::Image random_image(Rng& rng, int h, int w, int c) {
  ssae::Image img(h, w, c);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

} // namespace oracle
