#pragma once

#include "ssae/image.hpp"

namespace ssae {

/// Bilinear resampling with half-pixel centers and edge clamping:
/// source coordinate = (i + 0.5) * (in / out) - 0.5.
Image bilinear_resize(const Image& img, int out_h, int out_w);

/// Full-range BT.601 (JFIF).  Chroma is offset by +0.5 to stay in [0, 1].
Image rgb_to_ycbcr(const Image& img);
Image ycbcr_to_rgb(const Image& img);

/// Peak signal-to-noise ratio in dB with peak 1.  Identical images give +inf.
double psnr(const Image& a, const Image& b);

} // namespace ssae
