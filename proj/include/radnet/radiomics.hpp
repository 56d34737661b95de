#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "radnet/error.hpp"
#include "radnet/image.hpp"

namespace radnet {

using FeatureVector = std::vector<float>;

namespace detail {

/// Streaming mean / population variance (Welford). A stream of identical
/// values yields exactly that mean and exactly zero variance.
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double sum_sq = 0.0;

  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
    sum_sq += x * x;
  }
  double variance() const { return n ? m2 / static_cast<double>(n) : 0.0; }
  double stddev() const { return std::sqrt(std::max(variance(), 0.0)); }
  double energy() const { return n ? sum_sq / static_cast<double>(n) : 0.0; }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// HOG
// ---------------------------------------------------------------------------

struct HogConfig {
  std::size_t cell_size = 8;
  std::size_t block_size = 2;    // cells per block side
  std::size_t block_stride = 1;  // in cells
  std::size_t bins = 9;          // unsigned orientations over [0, 180)
  double l2_eps = 1e-6;

  void validate() const {
    if (cell_size < 2 || bins < 2 || block_size < 1 || block_stride < 1 ||
        !(l2_eps > 0.0)) {
      fail(ErrorCode::InvalidParam, "invalid HOG config");
    }
  }
};

struct HogGeometry {
  std::size_t cells_x = 0, cells_y = 0;
  std::size_t blocks_x = 0, blocks_y = 0;
  std::size_t length = 0;
};

/// Cell/block counts for an image; partial cells at the right and bottom are
/// dropped.
inline HogGeometry hog_geometry(std::size_t width, std::size_t height,
                                const HogConfig& cfg) {
  cfg.validate();
  HogGeometry g;
  g.cells_x = width / cfg.cell_size;
  g.cells_y = height / cfg.cell_size;
  if (g.cells_x < cfg.block_size || g.cells_y < cfg.block_size) {
    fail(ErrorCode::ImageTooSmall, "image too small for one HOG block");
  }
  g.blocks_x = (g.cells_x - cfg.block_size) / cfg.block_stride + 1;
  g.blocks_y = (g.cells_y - cfg.block_size) / cfg.block_stride + 1;
  g.length = g.blocks_x * g.blocks_y * cfg.block_size * cfg.block_size * cfg.bins;
  return g;
}

/// Histogram of oriented gradients.
///
/// Gradients are central differences with replicated borders. Each pixel
/// votes its magnitude into the two orientation bins nearest its unsigned
/// angle; bin k is centred on k * 180/bins degrees, so a purely horizontal
/// gradient lands entirely in bin 0. Blocks are L2-normalized as
/// v / sqrt(|v|^2 + eps^2) and concatenated in row-major block order.
inline FeatureVector hog_features(const Image& img, const HogConfig& cfg = {}) {
  const auto geo = hog_geometry(img.width, img.height, cfg);
  const std::size_t w = img.width, h = img.height;
  const std::size_t used_w = geo.cells_x * cfg.cell_size;
  const std::size_t used_h = geo.cells_y * cfg.cell_size;
  const double bin_width = 180.0 / static_cast<double>(cfg.bins);

  std::vector<double> cells(geo.cells_x * geo.cells_y * cfg.bins, 0.0);
  for (std::size_t y = 0; y < used_h; ++y) {
    const std::size_t ym = y == 0 ? 0 : y - 1;
    const std::size_t yp = std::min(y + 1, h - 1);
    double* cell_row = cells.data() + (y / cfg.cell_size) * geo.cells_x * cfg.bins;
    for (std::size_t x = 0; x < used_w; ++x) {
      const std::size_t xm = x == 0 ? 0 : x - 1;
      const std::size_t xp = std::min(x + 1, w - 1);
      const double gx = double{img.at(xp, y)} - double{img.at(xm, y)};
      const double gy = double{img.at(x, yp)} - double{img.at(x, ym)};
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx) * (180.0 / std::numbers::pi);
      if (angle < 0.0) angle += 180.0;
      if (angle >= 180.0) angle -= 180.0;
      const double pos = angle / bin_width;
      const double lower = std::floor(pos);
      const double frac = pos - lower;
      const std::size_t b0 = static_cast<std::size_t>(lower) % cfg.bins;
      const std::size_t b1 = (b0 + 1) % cfg.bins;
      double* hist = cell_row + (x / cfg.cell_size) * cfg.bins;
      hist[b0] += mag * (1.0 - frac);
      hist[b1] += mag * frac;
    }
  }

  FeatureVector out;
  out.reserve(geo.length);
  const std::size_t block_len = cfg.block_size * cfg.block_size * cfg.bins;
  std::vector<double> block(block_len);
  for (std::size_t by = 0; by < geo.blocks_y; ++by) {
    for (std::size_t bx = 0; bx < geo.blocks_x; ++bx) {
      std::size_t k = 0;
      double norm_sq = 0.0;
      for (std::size_t cy = 0; cy < cfg.block_size; ++cy) {
        for (std::size_t cx = 0; cx < cfg.block_size; ++cx) {
          const std::size_t cell_y = by * cfg.block_stride + cy;
          const std::size_t cell_x = bx * cfg.block_stride + cx;
          const double* hist = cells.data() + (cell_y * geo.cells_x + cell_x) * cfg.bins;
          for (std::size_t b = 0; b < cfg.bins; ++b) {
            block[k++] = hist[b];
            norm_sq += hist[b] * hist[b];
          }
        }
      }
      const double inv = 1.0 / std::sqrt(norm_sq + cfg.l2_eps * cfg.l2_eps);
      for (double v : block) out.push_back(static_cast<float>(v * inv));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LBP
// ---------------------------------------------------------------------------

struct LbpConfig {
  std::size_t neighbors = 8;
  double radius = 1.0;

  std::size_t histogram_bins() const { return std::size_t{1} << neighbors; }

  void validate() const {
    if (neighbors < 1 || neighbors > 16 || !(radius > 0.0)) {
      fail(ErrorCode::InvalidParam, "invalid LBP config");
    }
  }
};

namespace detail {

struct LbpOffset {
  std::ptrdiff_t x0, y0;
  double fx, fy;
};

inline std::vector<LbpOffset> lbp_offsets(const LbpConfig& cfg) {
  std::vector<LbpOffset> offs;
  for (std::size_t p = 0; p < cfg.neighbors; ++p) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(p) /
                     static_cast<double>(cfg.neighbors);
    double dx = cfg.radius * std::cos(a);
    double dy = -cfg.radius * std::sin(a);
    if (std::abs(dx - std::round(dx)) < 1e-9) dx = std::round(dx);
    if (std::abs(dy - std::round(dy)) < 1e-9) dy = std::round(dy);
    const double fx0 = std::floor(dx), fy0 = std::floor(dy);
    offs.push_back({static_cast<std::ptrdiff_t>(fx0), static_cast<std::ptrdiff_t>(fy0),
                    dx - fx0, dy - fy0});
  }
  return offs;
}

}  // namespace detail

/// Per-pixel LBP codes for interior pixels (a margin of ceil(radius) is
/// skipped), row-major. Off-grid neighbours are bilinearly sampled.
inline std::vector<std::uint32_t> lbp_codes(const Image& img, const LbpConfig& cfg = {}) {
  cfg.validate();
  const auto margin = static_cast<std::size_t>(std::ceil(cfg.radius));
  if (img.width <= 2 * margin || img.height <= 2 * margin) {
    fail(ErrorCode::ImageTooSmall, "image too small for LBP radius");
  }
  const auto offs = detail::lbp_offsets(cfg);
  std::vector<std::uint32_t> codes;
  codes.reserve((img.width - 2 * margin) * (img.height - 2 * margin));
  auto px = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    return double{img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y))};
  };
  for (std::size_t y = margin; y < img.height - margin; ++y) {
    for (std::size_t x = margin; x < img.width - margin; ++x) {
      const double center = img.at(x, y);
      std::uint32_t code = 0;
      for (std::size_t p = 0; p < offs.size(); ++p) {
        const auto& o = offs[p];
        const auto sx = static_cast<std::ptrdiff_t>(x) + o.x0;
        const auto sy = static_cast<std::ptrdiff_t>(y) + o.y0;
        double g;
        if (o.fx == 0.0 && o.fy == 0.0) {
          g = px(sx, sy);
        } else if (o.fy == 0.0) {
          g = std::lerp(px(sx, sy), px(sx + 1, sy), o.fx);
        } else if (o.fx == 0.0) {
          g = std::lerp(px(sx, sy), px(sx, sy + 1), o.fy);
        } else {
          const double top = std::lerp(px(sx, sy), px(sx + 1, sy), o.fx);
          const double bot = std::lerp(px(sx, sy + 1), px(sx + 1, sy + 1), o.fx);
          g = std::lerp(top, bot, o.fy);
        }
        if (g - center >= 0.0) code |= std::uint32_t{1} << p;
      }
      codes.push_back(code);
    }
  }
  return codes;
}

/// L1-normalized histogram of LBP codes over the interior pixels.
inline FeatureVector lbp_features(const Image& img, const LbpConfig& cfg = {}) {
  const auto codes = lbp_codes(img, cfg);
  std::vector<std::uint64_t> counts(cfg.histogram_bins(), 0);
  for (auto c : codes) ++counts[c];
  FeatureVector hist(counts.size());
  const double total = static_cast<double>(codes.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    hist[i] = static_cast<float>(static_cast<double>(counts[i]) / total);
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Gabor
// ---------------------------------------------------------------------------

/// Square kernel sampled on integer offsets -radius..radius. x is the column
/// offset, y the row offset (downwards).
struct Kernel2D {
  std::size_t radius = 0;
  std::vector<double> taps;
  /// Row and column factors when the kernel is rank one; empty otherwise.
  std::vector<double> sep_x, sep_y;

  std::size_t side() const { return 2 * radius + 1; }
  double at(std::ptrdiff_t x, std::ptrdiff_t y) const {
    const auto r = static_cast<std::ptrdiff_t>(radius);
    return taps[static_cast<std::size_t>((y + r) * static_cast<std::ptrdiff_t>(side()) + x + r)];
  }
};

/// Real Gabor kernel exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) cos(2 pi x'/lambda + psi)
/// with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta),
/// sampled out to radius ceil(3 sigma). theta is in radians.
inline Kernel2D gabor_kernel(double theta, double lambda, double psi, double sigma,
                             double gamma) {
  if (!(lambda > 0.0) || !(sigma > 0.0) || !(gamma > 0.0) || !std::isfinite(theta) ||
      !std::isfinite(psi) || !std::isfinite(lambda) || !std::isfinite(sigma)) {
    fail(ErrorCode::InvalidParam, "gabor kernel needs lambda, sigma, gamma > 0");
  }
  Kernel2D k;
  k.radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  k.taps.resize(k.side() * k.side());
  const double c = snap_unit(std::cos(theta));
  const double s = snap_unit(std::sin(theta));
  const auto r = static_cast<std::ptrdiff_t>(k.radius);
  const double two_s2 = 2.0 * sigma * sigma;
  auto carrier = [&](double xr) { return std::cos(2.0 * std::numbers::pi * xr / lambda + psi); };
  std::size_t i = 0;
  for (std::ptrdiff_t y = -r; y <= r; ++y) {
    for (std::ptrdiff_t x = -r; x <= r; ++x) {
      const double xd = static_cast<double>(x), yd = static_cast<double>(y);
      const double xr = xd * c + yd * s;
      const double yr = -xd * s + yd * c;
      k.taps[i++] = std::exp(-(xr * xr + gamma * gamma * yr * yr) / two_s2) * carrier(xr);
    }
  }
  // Axis-aligned kernels factor into a row and a column filter.
  if (s == 0.0 || c == 0.0) {
    for (std::ptrdiff_t t = -r; t <= r; ++t) {
      const double td = static_cast<double>(t);
      const double along = std::exp(-(td * td) / two_s2) * carrier(td * (s == 0.0 ? c : s));
      const double across = std::exp(-(gamma * gamma * td * td) / two_s2);
      k.sep_x.push_back(s == 0.0 ? along : across);
      k.sep_y.push_back(s == 0.0 ? across : along);
    }
  }
  return k;
}

struct GaborBank {
  std::vector<double> orientations_deg{0.0, 45.0, 90.0, 135.0};
  std::vector<double> wavelengths{4.0, 8.0};
  double psi = 0.0;
  double sigma_ratio = 0.56;  // sigma = ratio * lambda
  double gamma = 0.5;

  std::size_t feature_length() const {
    return orientations_deg.size() * wavelengths.size() * 2;
  }

  /// Kernels in orientation-major, wavelength-minor order.
  std::vector<Kernel2D> kernels() const {
    std::vector<Kernel2D> ks;
    for (double deg : orientations_deg) {
      for (double lambda : wavelengths) {
        ks.push_back(gabor_kernel(deg * std::numbers::pi / 180.0, lambda, psi,
                                  sigma_ratio * lambda, gamma));
      }
    }
    return ks;
  }
};

namespace detail {

// Rank-one kernel: a row pass then a column pass over the padded buffer.
inline std::vector<float> convolve_separable(const std::vector<float>& padded, std::size_t w,
                                             std::size_t h, const Kernel2D& k) {
  const std::size_t r = k.radius, side = k.side();
  const std::size_t pw = w + 2 * r, ph = h + 2 * r;
  std::vector<float> rows(w * ph, 0.0f);
  for (std::size_t y = 0; y < ph; ++y) {
    float* dst = rows.data() + y * w;
    for (std::size_t t = 0; t < side; ++t) {
      // Tap offset u = t - r reads padded column x + r - u = x + 2r - t.
      const auto tap = static_cast<float>(k.sep_x[t]);
      const float* a = padded.data() + y * pw + (2 * r - t);
      for (std::size_t x = 0; x < w; ++x) dst[x] += tap * a[x];
    }
  }
  std::vector<float> out(w * h, 0.0f);
  for (std::size_t y = 0; y < h; ++y) {
    float* dst = out.data() + y * w;
    for (std::size_t t = 0; t < side; ++t) {
      const auto tap = static_cast<float>(k.sep_y[t]);
      const float* a = rows.data() + (y + 2 * r - t) * w;
      for (std::size_t x = 0; x < w; ++x) dst[x] += tap * a[x];
    }
  }
  return out;
}

}  // namespace detail

/// 2-D convolution with half-sample symmetric padding, accumulated in float.
/// Every output pixel sees the same sequence of operations, so a constant
/// image gives a bit-exactly constant response.
inline std::vector<float> convolve_reflect(const Image& img, const Kernel2D& k) {
  const std::size_t w = img.width, h = img.height;
  const std::size_t r = k.radius;
  const std::size_t pw = w + 2 * r;
  const std::size_t ph = h + 2 * r;
  std::vector<float> padded(pw * ph);
  for (std::size_t y = 0; y < ph; ++y) {
    const auto sy = reflect_index(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(r), h);
    for (std::size_t x = 0; x < pw; ++x) {
      const auto sx = reflect_index(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(r), w);
      padded[y * pw + x] = img.at(sx, sy);
    }
  }

  if (!k.sep_x.empty()) return detail::convolve_separable(padded, w, h, k);

  const std::size_t n = k.taps.size();
  bool symmetric = true;
  for (std::size_t i = 0; i < n / 2 && symmetric; ++i) {
    symmetric = k.taps[i] == k.taps[n - 1 - i];
  }

  // out(x, y) = sum_{u,v} k(u, v) * in(x - u, y - v); in padded coordinates
  // the source pixel is (x + r - u, y + r - v).
  const auto ri = static_cast<std::ptrdiff_t>(r);
  std::vector<float> out(w * h, 0.0f);
  for (std::size_t y = 0; y < h; ++y) {
    float* dst = out.data() + y * w;
    const std::size_t limit = symmetric ? n / 2 : n;
    for (std::size_t t = 0; t < limit; ++t) {
      const auto v = static_cast<std::ptrdiff_t>(t / k.side()) - ri;
      const auto u = static_cast<std::ptrdiff_t>(t % k.side()) - ri;
      const auto tap = static_cast<float>(k.taps[t]);
      const float* a = padded.data() + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + ri - v) * pw +
                       static_cast<std::size_t>(ri - u);
      if (symmetric) {
        // Pair (u, v) with (-u, -v), which carries the same tap.
        const float* b = padded.data() + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + ri + v) * pw +
                         static_cast<std::size_t>(ri + u);
        for (std::size_t x = 0; x < w; ++x) dst[x] += tap * (a[x] + b[x]);
      } else {
        for (std::size_t x = 0; x < w; ++x) dst[x] += tap * a[x];
      }
    }
    if (symmetric) {
      const auto tap = static_cast<float>(k.taps[n / 2]);
      const float* a = padded.data() + (y + r) * pw + r;
      for (std::size_t x = 0; x < w; ++x) dst[x] += tap * a[x];
    }
  }
  return out;
}

/// [mean |response|, std |response|] for each kernel of the bank.
inline FeatureVector gabor_features(const Image& img, std::span<const Kernel2D> kernels) {
  if (img.empty()) fail(ErrorCode::EmptyImage, "gabor features of an empty image");
  FeatureVector out;
  out.reserve(kernels.size() * 2);
  for (const auto& k : kernels) {
    const auto response = convolve_reflect(img, k);
    detail::RunningStats st;
    for (float v : response) st.push(std::abs(double{v}));
    out.push_back(static_cast<float>(st.mean));
    out.push_back(static_cast<float>(st.stddev()));
  }
  return out;
}

inline FeatureVector gabor_features(const Image& img, const GaborBank& bank = {}) {
  const auto ks = bank.kernels();
  return gabor_features(img, std::span<const Kernel2D>(ks));
}

// ---------------------------------------------------------------------------
// Haar DWT
// ---------------------------------------------------------------------------

struct Plane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  double& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

struct HaarLevel {
  std::size_t in_width = 0, in_height = 0;  // before pad-to-even
  Plane lh, hl, hh;
};

struct HaarDecomposition {
  Plane ll;
  std::vector<HaarLevel> levels;  // finest first
};

/// One orthonormal Haar step on 2x2 blocks [[a, b], [c, d]]:
///   LL = (a+b+c+d)/2, LH = ((a+b)-(c+d))/2, HL = ((a+c)-(b+d))/2,
///   HH = ((a+d)-(b+c))/2.
/// Odd dimensions are padded by replicating the last row/column.
inline HaarDecomposition haar_forward(const Plane& input, std::size_t levels) {
  if (levels < 1) fail(ErrorCode::InvalidLevels, "wavelet levels must be >= 1");
  if (input.width == 0 || input.height == 0) fail(ErrorCode::EmptyImage, "empty wavelet input");
  HaarDecomposition dec;
  Plane cur = input;
  for (std::size_t l = 0; l < levels; ++l) {
    if (cur.width < 2 && cur.height < 2) {
      fail(ErrorCode::InvalidLevels, "too many wavelet levels for image size");
    }
    HaarLevel lvl;
    lvl.in_width = cur.width;
    lvl.in_height = cur.height;
    const std::size_t ow = (cur.width + 1) / 2, oh = (cur.height + 1) / 2;
    Plane ll{ow, oh, std::vector<double>(ow * oh)};
    lvl.lh = lvl.hl = lvl.hh = ll;
    for (std::size_t y = 0; y < oh; ++y) {
      const std::size_t y0 = 2 * y, y1 = std::min(2 * y + 1, cur.height - 1);
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t x0 = 2 * x, x1 = std::min(2 * x + 1, cur.width - 1);
        const double a = cur.at(x0, y0), b = cur.at(x1, y0);
        const double c = cur.at(x0, y1), d = cur.at(x1, y1);
        ll.at(x, y) = ((a + b) + (c + d)) * 0.5;
        lvl.lh.at(x, y) = ((a + b) - (c + d)) * 0.5;
        lvl.hl.at(x, y) = ((a + c) - (b + d)) * 0.5;
        lvl.hh.at(x, y) = ((a + d) - (b + c)) * 0.5;
      }
    }
    dec.levels.push_back(std::move(lvl));
    cur = std::move(ll);
  }
  dec.ll = std::move(cur);
  return dec;
}

inline HaarDecomposition haar_forward(const Image& img, std::size_t levels) {
  Plane p{img.width, img.height, std::vector<double>(img.data.begin(), img.data.end())};
  return haar_forward(p, levels);
}

/// Exact inverse of haar_forward, cropping padding at each level.
inline Plane haar_inverse(const HaarDecomposition& dec) {
  Plane cur = dec.ll;
  for (auto it = dec.levels.rbegin(); it != dec.levels.rend(); ++it) {
    const auto& lvl = *it;
    Plane full{2 * cur.width, 2 * cur.height,
               std::vector<double>(4 * cur.width * cur.height)};
    for (std::size_t y = 0; y < cur.height; ++y) {
      for (std::size_t x = 0; x < cur.width; ++x) {
        const double s = cur.at(x, y), v = lvl.lh.at(x, y);
        const double hz = lvl.hl.at(x, y), dg = lvl.hh.at(x, y);
        full.at(2 * x, 2 * y) = (s + v + hz + dg) * 0.5;
        full.at(2 * x + 1, 2 * y) = (s + v - hz - dg) * 0.5;
        full.at(2 * x, 2 * y + 1) = (s - v + hz - dg) * 0.5;
        full.at(2 * x + 1, 2 * y + 1) = (s - v - hz + dg) * 0.5;
      }
    }
    Plane cropped{lvl.in_width, lvl.in_height,
                  std::vector<double>(lvl.in_width * lvl.in_height)};
    for (std::size_t y = 0; y < lvl.in_height; ++y) {
      for (std::size_t x = 0; x < lvl.in_width; ++x) cropped.at(x, y) = full.at(x, y);
    }
    cur = std::move(cropped);
  }
  return cur;
}

/// [mean, std, energy] for LL_final, then LH, HL, HH of each level from the
/// finest to the coarsest. Length (3 * levels + 1) * 3.
inline FeatureVector dwt_features(const Image& img, std::size_t levels = 2) {
  if (levels < 1) fail(ErrorCode::InvalidLevels, "wavelet levels must be >= 1");
  const auto dec = haar_forward(img, levels);
  FeatureVector out;
  out.reserve((3 * levels + 1) * 3);
  auto emit = [&out](const Plane& p) {
    detail::RunningStats st;
    for (double v : p.data) st.push(v);
    out.push_back(static_cast<float>(st.mean));
    out.push_back(static_cast<float>(st.stddev()));
    out.push_back(static_cast<float>(st.energy()));
  };
  emit(dec.ll);
  for (const auto& lvl : dec.levels) {
    emit(lvl.lh);
    emit(lvl.hl);
    emit(lvl.hh);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radiomic tensor
// ---------------------------------------------------------------------------

enum class Descriptor { Hog, Lbp, Gabor, Wavelet };

inline constexpr std::array<std::string_view, 4> kDescriptorNames = {"HOG", "LBP", "Gabor",
                                                                     "Wavelet"};

struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// HOG | LBP | Gabor | Wavelet, with the offset/length of each part.
struct RadiomicTensor {
  FeatureVector values;
  std::array<Segment, 4> segments{};

  const Segment& segment(Descriptor d) const { return segments[static_cast<std::size_t>(d)]; }
  std::span<const float> part(Descriptor d) const {
    const auto& s = segment(d);
    return std::span<const float>(values).subspan(s.offset, s.length);
  }
};

inline std::array<Segment, 4> segment_table(std::span<const std::size_t, 4> lengths) {
  std::array<Segment, 4> segs{};
  std::size_t offset = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    segs[i] = {offset, lengths[i]};
    offset += lengths[i];
  }
  return segs;
}

inline RadiomicTensor concat_radiomic(std::span<const float> hog, std::span<const float> lbp,
                                      std::span<const float> gabor,
                                      std::span<const float> wavelet) {
  const std::array<std::span<const float>, 4> parts{hog, lbp, gabor, wavelet};
  std::array<std::size_t, 4> lengths{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (parts[i].empty()) {
      fail(ErrorCode::EmptyComponent,
           "empty " + std::string(kDescriptorNames[i]) + " component");
    }
    lengths[i] = parts[i].size();
  }
  RadiomicTensor t;
  t.segments = segment_table(lengths);
  t.values.reserve(t.segments[3].offset + t.segments[3].length);
  for (const auto& p : parts) t.values.insert(t.values.end(), p.begin(), p.end());
  return t;
}

/// All descriptor settings, with the Gabor kernels built once and shared.
class RadiomicExtractor {
 public:
  RadiomicExtractor() : RadiomicExtractor(HogConfig{}, LbpConfig{}, GaborBank{}, 2) {}
  RadiomicExtractor(HogConfig hog, LbpConfig lbp, GaborBank gabor, std::size_t wavelet_levels)
      : hog_(hog), lbp_(lbp), gabor_(std::move(gabor)), levels_(wavelet_levels) {
    hog_.validate();
    lbp_.validate();
    if (levels_ < 1) fail(ErrorCode::InvalidLevels, "wavelet levels must be >= 1");
    kernels_ = gabor_.kernels();
  }

  RadiomicTensor extract(const Image& img) const {
    const auto hog = hog_features(img, hog_);
    const auto lbp = lbp_features(img, lbp_);
    const auto gab = gabor_features(img, std::span<const Kernel2D>(kernels_));
    const auto dwt = dwt_features(img, levels_);
    return concat_radiomic(hog, lbp, gab, dwt);
  }

  /// Segment table for square images of the given side.
  std::array<Segment, 4> segments_for(std::size_t width, std::size_t height) const {
    const std::array<std::size_t, 4> lengths{hog_geometry(width, height, hog_).length,
                                             lbp_.histogram_bins(), gabor_.feature_length(),
                                             (3 * levels_ + 1) * 3};
    return segment_table(lengths);
  }

  const HogConfig& hog() const { return hog_; }
  const LbpConfig& lbp() const { return lbp_; }
  const GaborBank& gabor() const { return gabor_; }
  std::size_t wavelet_levels() const { return levels_; }

 private:
  HogConfig hog_;
  LbpConfig lbp_;
  GaborBank gabor_;
  std::size_t levels_;
  std::vector<Kernel2D> kernels_;
};

}  // namespace radnet
