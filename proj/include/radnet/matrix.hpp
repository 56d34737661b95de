#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "radnet/error.hpp"

namespace radnet {

/// Dense row-major matrix. Feature batches are stored one sample per row.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{})
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
      fail(ErrorCode::DimMismatch, "matrix data length != rows*cols");
    }
  }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Gathers the listed rows of `m` into a new matrix, in the given order.
template <typename T>
Matrix<T> select_rows(const Matrix<T>& m, std::span<const std::size_t> idx) {
  Matrix<T> out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace radnet
