#include "ssae/pixel_ops.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ssae {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToYcc = {{
    {0.299, 0.587, 0.114},
    {-0.168736, -0.331264, 0.5},
    {0.5, -0.418688, -0.081312},
}};

// The rounded JFIF coefficients are not an exact inverse pair, so the inverse
// is computed from the forward matrix rather than taken from the standard.
Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

const Mat3& ycc_to_rgb_matrix() {
  static const Mat3 inv = invert(kRgbToYcc);
  return inv;
}

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> make_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in - 1) src = in - 1;
    const int lo = static_cast<int>(std::floor(src));
    const int hi = lo + 1 < in ? lo + 1 : lo;
    taps[i] = {lo, hi, src - lo};
  }
  return taps;
}

} // namespace

Image bilinear_resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: output size must be positive");
  if (img.empty()) throw std::invalid_argument("bilinear_resize: empty input");
  if (out_h == img.height() && out_w == img.width()) return img;

  const auto ty = make_taps(img.height(), out_h);
  const auto tx = make_taps(img.width(), out_w);
  const int ch = img.channels();
  Image out(out_h, out_w, ch);
  for (int y = 0; y < out_h; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < out_w; ++x) {
      const Tap& b = tx[x];
      for (int c = 0; c < ch; ++c) {
        const double top = img.at(a.lo, b.lo, c) * (1.0 - b.frac) + img.at(a.lo, b.hi, c) * b.frac;
        const double bot = img.at(a.hi, b.lo, c) * (1.0 - b.frac) + img.at(a.hi, b.hi, c) * b.frac;
        out.at(y, x, c) = clip01(top * (1.0 - a.frac) + bot * a.frac);
      }
    }
  }
  return out;
}

Image rgb_to_ycbcr(const Image& img) {
  if (img.channels() != 3) throw std::invalid_argument("rgb_to_ycbcr: expected 3 channels");
  Image out(img.height(), img.width(), 3);
  auto src = img.data();
  auto dst = out.data();
  const auto& m = kRgbToYcc;
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const double r = src[i], g = src[i + 1], b = src[i + 2];
    dst[i] = clip01(m[0][0] * r + m[0][1] * g + m[0][2] * b);
    dst[i + 1] = clip01(m[1][0] * r + m[1][1] * g + m[1][2] * b + 0.5);
    dst[i + 2] = clip01(m[2][0] * r + m[2][1] * g + m[2][2] * b + 0.5);
  }
  return out;
}

Image ycbcr_to_rgb(const Image& img) {
  if (img.channels() != 3) throw std::invalid_argument("ycbcr_to_rgb: expected 3 channels");
  Image out(img.height(), img.width(), 3);
  auto src = img.data();
  auto dst = out.data();
  const auto& m = ycc_to_rgb_matrix();
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const double y = src[i], cb = src[i + 1] - 0.5, cr = src[i + 2] - 0.5;
    for (int k = 0; k < 3; ++k) dst[i + k] = clip01(m[k][0] * y + m[k][1] * cb + m[k][2] * cr);
  }
  return out;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  if (a.empty()) throw std::invalid_argument("psnr: empty images");
  auto da = a.data();
  auto db = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(da.size()) / sse);
}

} // namespace ssae
