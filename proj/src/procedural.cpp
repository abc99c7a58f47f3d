#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssae/pretext_data.hpp"

namespace ssae {

namespace {

using Rgb = std::array<double, 3>;

Rgb random_color(RngStream& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise in [-1, 1] with smoothstep interpolation.
class ValueNoise {
public:
  ValueNoise(RngStream& rng, int height, int width, double cell)
      : cell_(cell), gw_(static_cast<int>(width / cell) + 2), gh_(static_cast<int>(height / cell) + 2) {
    lattice_.resize(static_cast<std::size_t>(gw_) * gh_);
    for (double& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }

  double at(int y, int x) const {
    const double fy = y / cell_, fx = x / cell_;
    const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
    const double ty = smoothstep(fy - iy), tx = smoothstep(fx - ix);
    const double a = node(iy, ix) * (1 - tx) + node(iy, ix + 1) * tx;
    const double b = node(iy + 1, ix) * (1 - tx) + node(iy + 1, ix + 1) * tx;
    return a * (1 - ty) + b * ty;
  }

private:
  double node(int y, int x) const { return lattice_[static_cast<std::size_t>(y) * gw_ + x]; }

  double cell_;
  int gw_;
  int gh_;
  std::vector<double> lattice_;
};

struct Shape {
  bool disk;
  double cy, cx;
  double ry, rx;  // radius for disks uses ry
  Rgb color;
  double opacity;

  // Signed distance in pixels, negative inside.
  double distance(double y, double x) const {
    if (disk) return std::hypot(y - cy, x - cx) - ry;
    const double dy = std::abs(y - cy) - ry, dx = std::abs(x - cx) - rx;
    const double outside = std::hypot(std::max(dy, 0.0), std::max(dx, 0.0));
    return outside + std::min(std::max(dy, dx), 0.0);
  }
};

} // namespace

Image generate_procedural(RngStream& rng, int height, int width) {
  if (height < 16 || width < 16) throw std::invalid_argument("generate_procedural: size must be >= 16");

  const Rgb sky = random_color(rng, 0.45, 1.0);
  const Rgb ground = random_color(rng, 0.0, 0.55);
  const double tilt = rng.uniform(-0.45, 0.45);
  const double horizon = rng.uniform(0.25, 0.75);
  const double softness = rng.uniform(0.08, 0.4);

  const int num_shapes = 1 + static_cast<int>(rng.below(4));
  std::vector<Shape> shapes;
  const double dim = std::min(height, width);
  for (int s = 0; s < num_shapes; ++s) {
    Shape sh{};
    sh.disk = rng.below(2) == 0;
    sh.cy = rng.uniform(0.3, 1.0) * height;
    sh.cx = rng.uniform(0.0, 1.0) * width;
    sh.ry = rng.uniform(0.08, 0.3) * dim;
    sh.rx = rng.uniform(0.08, 0.3) * dim;
    sh.color = random_color(rng, 0.0, 1.0);
    sh.opacity = rng.uniform(0.7, 1.0);
    shapes.push_back(sh);
  }

  ValueNoise coarse(rng, height, width, 8.0);
  ValueNoise fine(rng, height, width, 1.5);
  const double coarse_amp = rng.uniform(0.02, 0.06);
  const double fine_amp = rng.uniform(0.03, 0.07);

  Image img(height, width, 3);
  const double st = std::sin(tilt), ct = std::cos(tilt);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Position along the tilted vertical axis, 0 at top and 1 at bottom.
      const double v = ((y + 0.5 - height / 2.0) * ct - (x + 0.5 - width / 2.0) * st) / height + 0.5;
      const double t = std::clamp((v - horizon) / softness + 0.5, 0.0, 1.0);
      Rgb px;
      for (int c = 0; c < 3; ++c) px[c] = sky[c] * (1.0 - t) + ground[c] * t - 0.15 * v;
      for (const Shape& sh : shapes) {
        const double cover = std::clamp(0.5 - sh.distance(y + 0.5, x + 0.5), 0.0, 1.0) * sh.opacity;
        if (cover <= 0.0) continue;
        // Shapes are lit from above as well.
        const double shade = 0.12 * ((y + 0.5 - sh.cy) / (sh.ry + 1.0));
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - cover) + (sh.color[c] - shade) * cover;
      }
      const double n = coarse_amp * coarse.at(y, x) + fine_amp * fine.at(y, x);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = clip01(px[c] + n);
    }
  }
  return img;
}

} // namespace ssae
