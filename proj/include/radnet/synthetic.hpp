#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <utility>
#include <filesystem>
#include <numbers>
#include <string>

#include "radnet/image.hpp"
#include "radnet/imgio.hpp"
#include "radnet/rng.hpp"

namespace radnet::synthetic {

/// Four texture families standing in for the four classes:
/// glioma -> oriented gratings, meningioma -> Gaussian blobs,
/// pituitary -> uniform noise, notumor -> constant field.
inline Image texture_image(std::size_t label, std::size_t size, std::uint64_t seed,
                           std::uint64_t index) {
  CounterRng rng(mix_key({seed, 0x53594e54ULL, label, index}));
  Image img(size, size, Domain::Unit);
  const double n = static_cast<double>(size);
  switch (label) {
    case 0: {
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const double lambda = rng.uniform(4.0, 10.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double c = std::cos(theta), s = std::sin(theta);
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double t = (static_cast<double>(x) * c + static_cast<double>(y) * s) / lambda;
          img.at(x, y) = static_cast<float>(0.5 + 0.4 * std::cos(2.0 * std::numbers::pi * t + phase) +
                                            rng.uniform(-0.05, 0.05));
        }
      }
      break;
    }
    case 1: {
      const auto blobs = 3 + rng.below(4);
      for (auto& v : img.data) v = 0.1f;
      for (std::uint64_t b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0.0, n), cy = rng.uniform(0.0, n);
        const double sigma = rng.uniform(0.05, 0.12) * n;
        const double amp = rng.uniform(0.5, 0.9);
        for (std::size_t y = 0; y < size; ++y) {
          for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            img.at(x, y) += static_cast<float>(amp * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
          }
        }
      }
      for (auto& v : img.data) v = std::min(1.0f, v + static_cast<float>(rng.uniform(-0.02, 0.02)));
      break;
    }
    case 2:
      for (auto& v : img.data) v = static_cast<float>(rng.uniform01());
      break;
    default: {
      const auto level = static_cast<float>(rng.uniform(0.2, 0.8));
      for (auto& v : img.data) v = level;
      break;
    }
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

/// Writes `<root>/{Training,Testing}/<class>/NNNN.pgm`.
inline void write_dataset(const std::filesystem::path& root, std::size_t train_per_class,
                          std::size_t test_per_class, std::size_t size, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const std::pair<const char*, std::size_t> splits[] = {{"Training", train_per_class},
                                                        {"Testing", test_per_class}};
  std::uint64_t offset = 0;
  for (const auto& [split, count] : splits) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto dir = root / split / std::string(kClassNames[c]);
      fs::create_directories(dir);
      for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.pgm", i);
        write_file_bytes(dir / name, encode_pgm(texture_image(c, size, seed, offset + i)));
      }
    }
    offset += count;
  }
}

}  // namespace radnet::synthetic
