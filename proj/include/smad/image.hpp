#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "smad/errors.hpp"

namespace smad {

/// Interleaved height x width x channels raster.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int height, int width, int channels, T fill = T{})
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    if (height < 0 || width < 0 || channels <= 0)
      throw ContractError("Image: invalid dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageU8 = Image<std::uint8_t>;
using ImageF = Image<float>;
using ImageD = Image<double>;

inline std::uint8_t saturate_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

template <typename Dst, typename Src>
Image<Dst> image_cast(const Image<Src>& src) {
  Image<Dst> out(src.height(), src.width(), src.channels());
  auto in = src.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if constexpr (std::is_same_v<Dst, std::uint8_t>)
      o[i] = saturate_u8(static_cast<double>(in[i]));
    else
      o[i] = static_cast<Dst>(in[i]);
  }
  return out;
}

/// Bilinear sample at a continuous pixel-center coordinate; neighbours outside
/// the raster are clamped to the border. Caller decides what counts as outside.
template <typename T>
double sample_bilinear(const Image<T>& img, double x, double y, int c) {
  const int w = img.width(), h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1.0 - fx) * img(y0, x0, c) + fx * img(y0, x1, c);
  const double bottom = (1.0 - fx) * img(y1, x0, c) + fx * img(y1, x1, c);
  return (1.0 - fy) * top + fy * bottom;
}

/// True when (x, y) lies on the raster's pixel-center grid extent.
template <typename T>
bool inside(const Image<T>& img, double x, double y, double tol = 1e-9) {
  return x >= -tol && y >= -tol && x <= img.width() - 1 + tol && y <= img.height() - 1 + tol;
}

}  // namespace smad
