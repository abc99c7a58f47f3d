#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ssae {

/// H x W x C raster of unit-interval intensities, row-major, channel-interleaved.
class Image {
public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Clamp every sample into [0, 1]; NaN maps to 0.
  void clip();

  bool operator==(const Image&) const = default;

private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Clamp to [0, 1] with NaN mapped to 0.
inline double clip01(double v) {
  if (!(v > 0.0)) return 0.0;
  return v < 1.0 ? v : 1.0;
}

/// Round half away from zero.
double round_half_away(double v);

/// Quantize a unit-interval sample to its 8-bit code: round(v * 255).
int to_u8(double v);

/// Snap every sample to the nearest 8-bit level (what a PNG round-trip does).
Image quantize_u8(const Image& img);

/// 8-bit PNG I/O.  Gray and RGB are read as-is; alpha channels are dropped,
/// palette and 16-bit inputs are converted.  Throws std::runtime_error on I/O
/// failure.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

} // namespace ssae
