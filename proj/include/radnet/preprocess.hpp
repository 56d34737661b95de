#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "radnet/error.hpp"
#include "radnet/image.hpp"
#include "radnet/rng.hpp"

namespace radnet {

inline constexpr std::size_t kDefaultImageSize = 224;

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Bilinear sample with coordinates clamped to the image. Written as nested
/// lerps so that equal neighbours reproduce their value exactly.
inline float sample_bilinear_clamped(const Image& img, double sx, double sy) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  const auto x0 = static_cast<std::size_t>(sx);
  const auto y0 = static_cast<std::size_t>(sy);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - static_cast<double>(x0);
  const double fy = sy - static_cast<double>(y0);
  const double top = std::lerp(double{img.at(x0, y0)}, double{img.at(x1, y0)}, fx);
  const double bot = std::lerp(double{img.at(x0, y1)}, double{img.at(x1, y1)}, fx);
  return static_cast<float>(std::lerp(top, bot, fy));
}

/// Resizes with half-pixel-centre mapping: src = (dst + 0.5) * in/out - 0.5,
/// clamped at the borders.
inline Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
  if (img.empty()) fail(ErrorCode::EmptyImage, "cannot resize an empty image");
  if (out_w == 0 || out_h == 0) fail(ErrorCode::InvalidParam, "target size must be >= 1");
  Image out(out_w, out_h, img.domain);
  const double scale_x = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double scale_y = static_cast<double>(img.height) / static_cast<double>(out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = (static_cast<double>(y) + 0.5) * scale_y - 0.5;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = (static_cast<double>(x) + 0.5) * scale_x - 0.5;
      out.at(x, y) = sample_bilinear_clamped(img, sx, sy);
    }
  }
  return out;
}

/// Min-max normalization to [0, 1]. A constant image maps to all zeros.
inline Image normalize_minmax(const Image& img) {
  Image out(img.width, img.height, Domain::Unit);
  if (img.empty()) return out;
  const double lo = img.min_value();
  const double hi = img.max_value();
  if (hi == lo) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.data[i] = static_cast<float>((img.data[i] - lo) / range);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometric transforms
// ---------------------------------------------------------------------------

namespace detail {

inline double sample_or_zero(const Image& img, std::ptrdiff_t x, std::ptrdiff_t y) {
  if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(img.width) ||
      y >= static_cast<std::ptrdiff_t>(img.height)) {
    return 0.0;
  }
  return img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
}

}  // namespace detail

/// Rotates counter-clockwise (in image coordinates, y down) by `theta_deg`
/// about the image centre. Samples falling outside the source are 0.
inline Image rotate(const Image& img, double theta_deg) {
  if (theta_deg == 0.0 || img.empty()) return img;
  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double c = snap_unit(std::cos(rad));
  const double s = snap_unit(std::sin(rad));
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  Image out(img.width, img.height, img.domain);
  for (std::size_t y = 0; y < img.height; ++y) {
    const double dy = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      // Inverse mapping: rotate the destination point by -theta.
      const double sx = c * dx - s * dy + cx;
      const double sy = s * dx + c * dy + cy;
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const auto x0 = static_cast<std::ptrdiff_t>(fx0);
      const auto y0 = static_cast<std::ptrdiff_t>(fy0);
      const double fx = sx - fx0;
      const double fy = sy - fy0;
      const double top = std::lerp(detail::sample_or_zero(img, x0, y0),
                                   detail::sample_or_zero(img, x0 + 1, y0), fx);
      const double bot = std::lerp(detail::sample_or_zero(img, x0, y0 + 1),
                                   detail::sample_or_zero(img, x0 + 1, y0 + 1), fx);
      out.at(x, y) = static_cast<float>(std::lerp(top, bot, fy));
    }
  }
  return out;
}

enum class FlipAxis { Horizontal, Vertical };

/// Horizontal mirrors columns (left-right); vertical mirrors rows.
inline Image flip(const Image& img, FlipAxis axis) {
  Image out = img;
  if (axis == FlipAxis::Horizontal) {
    for (std::size_t y = 0; y < img.height; ++y) {
      auto r = out.row(y);
      std::reverse(r.begin(), r.end());
    }
  } else {
    for (std::size_t y = 0; y < img.height; ++y) {
      auto src = img.row(img.height - 1 - y);
      std::copy(src.begin(), src.end(), out.row(y).begin());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Photometric transforms
// ---------------------------------------------------------------------------

/// Normalized 1-D Gaussian taps for offsets -r..r, r = ceil(3 sigma).
inline std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::InvalidSigma, "gaussian sigma must be > 0");
  }
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with half-sample symmetric padding.
inline Image gaussian_blur(const Image& img, double sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  if (img.empty()) return img;
  const std::size_t w = img.width, h = img.height;
  std::vector<double> tmp(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) {
        const auto sx = reflect_index(static_cast<std::ptrdiff_t>(x) + i, w);
        acc += k[static_cast<std::size_t>(i + r)] * img.at(sx, y);
      }
      tmp[y * w + x] = acc;
    }
  }
  Image out(w, h, img.domain);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) {
        const auto sy = reflect_index(static_cast<std::ptrdiff_t>(y) + i, h);
        acc += k[static_cast<std::size_t>(i + r)] * tmp[sy * w + x];
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

/// out = clamp(gain * in + bias, 0, 1)
inline Image brightness_contrast(const Image& img, double gain, double bias) {
  Image out(img.width, img.height, Domain::Unit);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp(gain * img.data[i] + bias, 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentConfig {
  double rotation_max_deg = 15.0;
  double p_flip_h = 0.5;
  double p_flip_v = 0.5;
  /// Blur sigma is drawn from [min, max]; a [0, 0] range disables blurring.
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 1.0;
  /// Additive bias drawn from [-brightness, +brightness].
  double brightness = 0.1;
  double contrast_min = 0.9;
  double contrast_max = 1.1;
  std::uint64_t seed = 0;

  /// A configuration under which augment() is the identity.
  static AugmentConfig disabled() {
    return {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0};
  }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(rotation_max_deg >= 0.0) || !prob(p_flip_h) || !prob(p_flip_v) ||
        !(blur_sigma_min >= 0.0) || !(blur_sigma_max >= blur_sigma_min) ||
        !(brightness >= 0.0) || !(contrast_min > 0.0) || !(contrast_max >= contrast_min)) {
      fail(ErrorCode::InvalidParam, "invalid augmentation config");
    }
  }
};

/// Concrete parameters for one augmented view.
struct AugmentParams {
  double gain = 1.0;
  double bias = 0.0;
  double sigma = 0.0;
  bool flip_v = false;
  bool flip_h = false;
  double theta_deg = 0.0;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/// Draws the view parameters from a stream keyed by (seed, sample_index).
/// Every field consumes its draw even when disabled, so stream positions
/// never depend on the configuration.
inline AugmentParams draw_augment_params(const AugmentConfig& cfg,
                                         std::uint64_t sample_index) {
  cfg.validate();
  CounterRng rng(mix_key({cfg.seed, 0x4155474dULL, sample_index}));
  AugmentParams p;
  p.gain = rng.uniform(cfg.contrast_min, cfg.contrast_max);
  p.bias = rng.uniform(-cfg.brightness, cfg.brightness);
  p.sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
  p.flip_v = rng.bernoulli(cfg.p_flip_v);
  p.flip_h = rng.bernoulli(cfg.p_flip_h);
  p.theta_deg = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
  if (cfg.contrast_min == cfg.contrast_max) p.gain = cfg.contrast_min;
  if (cfg.brightness == 0.0) p.bias = 0.0;
  if (cfg.blur_sigma_min == cfg.blur_sigma_max) p.sigma = cfg.blur_sigma_min;
  if (cfg.rotation_max_deg == 0.0) p.theta_deg = 0.0;
  return p;
}

/// Applies rotation(flip_h(flip_v(blur(brightness_contrast(img))))).
inline Image apply_augment(const Image& img, const AugmentParams& p) {
  Image out = img;
  if (p.gain != 1.0 || p.bias != 0.0) out = brightness_contrast(out, p.gain, p.bias);
  if (p.sigma > 0.0) out = gaussian_blur(out, p.sigma);
  if (p.flip_v) out = flip(out, FlipAxis::Vertical);
  if (p.flip_h) out = flip(out, FlipAxis::Horizontal);
  if (p.theta_deg != 0.0) out = rotate(out, p.theta_deg);
  return out;
}

inline Image augment(const Image& img, const AugmentConfig& cfg, std::uint64_t sample_index) {
  return apply_augment(img, draw_augment_params(cfg, sample_index));
}

/// Resize to size x size, then min-max normalize.
inline Image preprocess(const Image& raw, std::size_t size = kDefaultImageSize) {
  return normalize_minmax(resize_bilinear(raw, size, size));
}

}  // namespace radnet
