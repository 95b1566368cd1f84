#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mamic {

// Dense row-major matrix of doubles. Rows are samples throughout the
// project, so a minibatch of N vectors of dim D is an N x D Mat.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Mat(std::size_t r, std::size_t c, std::vector<double> d)
      : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols)
      throw std::invalid_argument("Mat: data size does not match shape");
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Mat& other) const {
    return rows == other.rows && cols == other.cols;
  }

  void fill(double v) { data.assign(data.size(), v); }
};

// C = A * B, (m x k)(k x n). Loop order chosen for row-major locality.
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dims differ");
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A^T * B, (k x m)^T (k x n) -> m x n. Used for weight gradients.
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: outer dims differ");
  Mat c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

// C = A * B^T, (m x k)(n x k)^T -> m x n. Used to push gradients backward.
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dims differ");
  Mat c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

}  // namespace mamic
