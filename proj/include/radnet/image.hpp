#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "radnet/error.hpp"

namespace radnet {

/// Value domain of an Image: raw 8-bit intensities or normalized [0,1].
enum class Domain { Raw8, Unit };

/// Single-channel row-major float raster.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;
  Domain domain = Domain::Unit;

  Image() = default;
  Image(std::size_t w, std::size_t h, Domain d = Domain::Unit, float fill = 0.0f)
      : width(w), height(h), data(w * h, fill), domain(d) {}
  Image(std::size_t w, std::size_t h, std::vector<float> values,
        Domain d = Domain::Unit)
      : width(w), height(h), data(std::move(values)), domain(d) {
    if (data.size() != w * h) {
      fail(ErrorCode::DimMismatch, "image data length != width*height");
    }
  }

  bool empty() const { return width == 0 || height == 0; }
  std::size_t size() const { return data.size(); }

  float& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  float at(std::size_t x, std::size_t y) const { return data[y * width + x]; }

  std::span<float> row(std::size_t y) {
    return {data.data() + y * width, width};
  }
  std::span<const float> row(std::size_t y) const {
    return {data.data() + y * width, width};
  }

  float min_value() const {
    return data.empty() ? 0.0f : *std::min_element(data.begin(), data.end());
  }
  float max_value() const {
    return data.empty() ? 0.0f : *std::max_element(data.begin(), data.end());
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Index into a half-sample symmetric periodic extension of [0, n):
/// ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  const auto nn = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(m < nn ? m : period - 1 - m);
}

/// cos/sin results within 1e-15 of {-1, 0, 1} are snapped so that quarter
/// turns are exact.
inline double snap_unit(double v) {
  for (double t : {-1.0, 0.0, 1.0}) {
    if (std::abs(v - t) < 1e-15) return t;
  }
  return v;
}

}  // namespace radnet
