#include "ssae/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace ssae {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || (channels != 1 && channels != 3)) {
    throw std::invalid_argument("Image: invalid dimensions");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0 || (channels != 1 && channels != 3)) {
    throw std::invalid_argument("Image: invalid dimensions");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("Image: data length does not match dimensions");
  }
}

void Image::clip() {
  for (double& v : data_) v = clip01(v);
}

double round_half_away(double v) { return std::round(v); }

int to_u8(double v) { return static_cast<int>(round_half_away(clip01(v) * 255.0)); }

Image quantize_u8(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = to_u8(v) / 255.0;
  return out;
}

Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("read_png: " + path.string() + ": " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("read_png: " + path.string() + ": " + msg);
  }
  Image out(static_cast<int>(image.height), static_cast<int>(image.width), channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = buf[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw std::invalid_argument("write_png: empty image");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(img.size());
  auto src = img.data();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<std::uint8_t>(to_u8(src[i]));
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("write_png: " + path.string() + ": " + image.message);
  }
}

} // namespace ssae
