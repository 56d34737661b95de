#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radnet/binary.hpp"
#include "radnet/error.hpp"
#include "radnet/image.hpp"
#include "radnet/matrix.hpp"
#include "radnet/rng.hpp"

namespace radnet {

/// Fixed class-index table; the order is part of every report and file.
inline constexpr std::array<std::string_view, 4> kClassNames = {
    "glioma", "meningioma", "pituitary", "notumor"};
inline constexpr std::size_t kNumClasses = kClassNames.size();

struct Sample {
  std::filesystem::path path;
  std::uint8_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabeledDataset {
  std::vector<std::string> classes;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::vector<std::uint8_t> labels() const {
    std::vector<std::uint8_t> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

inline std::vector<std::string> default_class_table() {
  return {kClassNames.begin(), kClassNames.end()};
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

namespace detail {

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string_view pgm_token(std::span<const std::uint8_t> bytes,
                                  std::size_t& pos) {
  while (pos < bytes.size()) {
    const auto c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    ++pos;
  }
  return {reinterpret_cast<const char*>(bytes.data()) + start, pos - start};
}

inline std::size_t pgm_number(std::string_view tok) {
  if (tok.empty() || tok.size() > 9) {
    fail(ErrorCode::CorruptFile, "malformed PGM header");
  }
  std::size_t v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') fail(ErrorCode::CorruptFile, "malformed PGM header");
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

}  // namespace detail

/// Decodes a binary 8-bit PGM (P5, maxval 255) into a raw8 image.
inline Image decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const auto magic = detail::pgm_token(bytes, pos);
  if (magic.empty()) fail(ErrorCode::CorruptFile, "empty PGM stream");
  if (magic != "P5") {
    fail(ErrorCode::UnsupportedFormat,
         "only binary PGM (P5) is supported, got '" + std::string(magic) + "'");
  }
  const auto width = detail::pgm_number(detail::pgm_token(bytes, pos));
  const auto height = detail::pgm_number(detail::pgm_token(bytes, pos));
  const auto maxval = detail::pgm_number(detail::pgm_token(bytes, pos));
  if (maxval != 255) {
    fail(ErrorCode::UnsupportedFormat,
         "only 8-bit PGM (maxval 255) is supported, got " + std::to_string(maxval));
  }
  if (width == 0 || height == 0) fail(ErrorCode::CorruptFile, "zero PGM dimension");
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    fail(ErrorCode::CorruptFile, "PGM header not terminated");
  }
  ++pos;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n) {
    fail(ErrorCode::CorruptFile, "truncated PGM payload: expected " +
                                     std::to_string(n) + " bytes, got " +
                                     std::to_string(bytes.size() - pos));
  }
  Image img(width, height, Domain::Raw8);
  for (std::size_t i = 0; i < n; ++i) img.data[i] = bytes[pos + i];
  return img;
}

/// Encodes an image as P5. Unit-domain images are scaled by 255; all values
/// are rounded and clamped to [0, 255].
inline std::vector<std::uint8_t> encode_pgm(const Image& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  const float scale = img.domain == Domain::Unit ? 255.0f : 1.0f;
  for (float v : img.data) {
    const float s = std::clamp(std::round(v * scale), 0.0f, 255.0f);
    out.push_back(static_cast<std::uint8_t>(s));
  }
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& p,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + p.string());
}

inline Image read_pgm(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p);
  return decode_pgm(bytes);
}

// ---------------------------------------------------------------------------
// Dataset layout
// ---------------------------------------------------------------------------

inline bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm";
}

/// Lists `<root>/<class>/*.pgm` for every class in the fixed table. Samples are
/// ordered lexicographically by path.
inline LabeledDataset scan_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    fail(ErrorCode::MissingClassDir, "dataset root is not a directory: " + root.string());
  }
  LabeledDataset ds;
  ds.classes = default_class_table();
  for (std::size_t c = 0; c < ds.classes.size(); ++c) {
    const auto dir = root / ds.classes[c];
    if (!fs::is_directory(dir)) {
      fail(ErrorCode::MissingClassDir, "missing class directory " + dir.string());
    }
    std::size_t found = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) {
        ds.samples.push_back({entry.path(), static_cast<std::uint8_t>(c)});
        ++found;
      }
    }
    if (found == 0) {
      fail(ErrorCode::EmptyClass, "class directory has no images: " + dir.string());
    }
  }
  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const Sample& a, const Sample& b) {
              return a.path.generic_string() < b.path.generic_string();
            });
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting and labels
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Per-class stratified split of sample indices. Each class sends
/// floor(count * fraction + 0.5) samples to train and the rest to validation;
/// which samples go where depends only on `seed`. Both index lists come back
/// in ascending order.
inline SplitIndices stratified_split_indices(std::span<const std::uint8_t> labels,
                                             std::size_t num_classes,
                                             double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::InvalidParam, "train_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      fail(ErrorCode::IndexOutOfRange, "label index out of range");
    }
    by_class[labels[i]].push_back(i);
  }
  SplitIndices out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& members = by_class[c];
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(members.size()) * train_fraction + 0.5));
    if (n_train == 0 || n_train >= members.size()) {
      fail(ErrorCode::DegenerateSplit,
           "class " + std::to_string(c) + " with " + std::to_string(members.size()) +
               " samples cannot be split at fraction " + std::to_string(train_fraction));
    }
    CounterRng rng(mix_key({seed, 0x53504c4954ULL, c}));
    for (std::size_t i = members.size() - 1; i > 0; --i) {
      std::swap(members[i], members[rng.below(i + 1)]);
    }
    out.train.insert(out.train.end(), members.begin(), members.begin() + n_train);
    out.val.insert(out.val.end(), members.begin() + n_train, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

inline std::pair<LabeledDataset, LabeledDataset> stratified_split(
    const LabeledDataset& ds, double train_fraction, std::uint64_t seed) {
  const auto labels = ds.labels();
  const auto idx = stratified_split_indices(labels, ds.classes.size(), train_fraction, seed);
  LabeledDataset train{ds.classes, {}}, val{ds.classes, {}};
  for (auto i : idx.train) train.samples.push_back(ds.samples[i]);
  for (auto i : idx.val) val.samples.push_back(ds.samples[i]);
  return {std::move(train), std::move(val)};
}

inline std::vector<float> encode_onehot(std::size_t label, std::size_t num_classes) {
  if (label >= num_classes) {
    fail(ErrorCode::IndexOutOfRange, "label " + std::to_string(label) +
                                         " >= num_classes " + std::to_string(num_classes));
  }
  std::vector<float> v(num_classes, 0.0f);
  v[label] = 1.0f;
  return v;
}

// ---------------------------------------------------------------------------
// Feature files: "RFV1" | count u32 | dim u32 | count*dim f32 | count u8
// ---------------------------------------------------------------------------

struct FeatureSet {
  Matrix<float> features;
  std::vector<std::uint8_t> labels;

  std::size_t count() const { return features.rows; }
  std::size_t dim() const { return features.cols; }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};


inline constexpr std::size_t kFeatureHeaderBytes = 12;

inline std::vector<std::uint8_t> encode_feature_file(const FeatureSet& fs) {
  if (fs.features.data.size() != fs.features.rows * fs.features.cols ||
      fs.labels.size() != fs.features.rows) {
    fail(ErrorCode::DimMismatch, "feature rows and labels disagree");
  }
  for (auto l : fs.labels) {
    if (l >= kNumClasses) fail(ErrorCode::IndexOutOfRange, "label byte >= 4");
  }
  std::vector<std::uint8_t> out{'R', 'F', 'V', '1'};
  out.reserve(kFeatureHeaderBytes + fs.features.data.size() * 4 + fs.labels.size());
  bin::put_u32(out, static_cast<std::uint32_t>(fs.count()));
  bin::put_u32(out, static_cast<std::uint32_t>(fs.dim()));
  for (float v : fs.features.data) bin::put_f32(out, v);
  out.insert(out.end(), fs.labels.begin(), fs.labels.end());
  return out;
}

inline FeatureSet decode_feature_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFeatureHeaderBytes) {
    fail(ErrorCode::CorruptFile, "feature file shorter than its header");
  }
  if (std::memcmp(bytes.data(), "RFV1", 4) != 0) {
    fail(ErrorCode::BadMagic, "not an RFV1 feature file");
  }
  const std::size_t count = bin::get_u32(bytes, 4);
  const std::size_t dim = bin::get_u32(bytes, 8);
  const std::size_t expected = kFeatureHeaderBytes + count * dim * 4 + count;
  if (bytes.size() != expected) {
    fail(ErrorCode::CorruptFile, "feature file size " + std::to_string(bytes.size()) +
                                     " != expected " + std::to_string(expected));
  }
  FeatureSet fs;
  fs.features = Matrix<float>(count, dim);
  std::size_t at = kFeatureHeaderBytes;
  for (auto& v : fs.features.data) {
    v = bin::get_f32(bytes, at);
    at += 4;
  }
  fs.labels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.end());
  for (auto l : fs.labels) {
    if (l >= kNumClasses) fail(ErrorCode::CorruptFile, "label byte >= 4");
  }
  return fs;
}

inline void write_feature_file(const std::filesystem::path& p, const FeatureSet& fs) {
  write_file_bytes(p, encode_feature_file(fs));
}

inline FeatureSet read_feature_file(const std::filesystem::path& p) {
  return decode_feature_file(read_file_bytes(p));
}

}  // namespace radnet
