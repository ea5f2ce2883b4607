#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "bimotion/error.hpp"
#include "bimotion/rng.hpp"

namespace bimotion {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), d(std::move(data)) {
    require(static_cast<size_t>(r) * c == d.size(), errc::runtime, "Mat: data size mismatch");
  }

  static Mat zeros(int r, int c) { return Mat(r, c); }

  static Mat filled(int r, int c, double v) {
    Mat m(r, c);
    for (auto& x : m.d) x = v;
    return m;
  }

  static Mat randn(int r, int c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (auto& x : m.d) x = rng.normal() * scale;
    return m;
  }

  static Mat row(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Mat(1, n, std::move(v));
  }

  double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
  double* rowptr(int r) { return d.data() + static_cast<size_t>(r) * cols; }
  const double* rowptr(int r) const { return d.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return d.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : d)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double frob_norm() const {
    double s = 0.0;
    for (double v : d) s += v * v;
    return std::sqrt(s);
  }
};

inline Mat matmul(const Mat& a, const Mat& b) {
  require(a.cols == b.rows, errc::runtime, "matmul: inner dims differ");
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.rowptr(i);
    double* cr = c.rowptr(i);
    for (int k = 0; k < a.cols; ++k) {
      double av = ar[k];
      if (av == 0.0) continue;
      const double* br = b.rowptr(k);
      for (int j = 0; j < b.cols; ++j) cr[j] += av * br[j];
    }
  }
  return c;
}

// a * b^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  require(a.cols == b.cols, errc::runtime, "matmul_nt: inner dims differ");
  Mat c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.rowptr(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* br = b.rowptr(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      c.at(i, j) = s;
    }
  }
  return c;
}

// a^T * b
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  require(a.rows == b.rows, errc::runtime, "matmul_tn: inner dims differ");
  Mat c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* ar = a.rowptr(k);
    const double* br = b.rowptr(k);
    for (int i = 0; i < a.cols; ++i) {
      double av = ar[i];
      if (av == 0.0) continue;
      double* cr = c.rowptr(i);
      for (int j = 0; j < b.cols; ++j) cr[j] += av * br[j];
    }
  }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat c(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) c.at(j, i) = a.at(i, j);
  return c;
}

inline double dot(const Mat& a, const Mat& b) {
  require(a.size() == b.size(), errc::runtime, "dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.d[i] * b.d[i];
  return s;
}

inline double cosine(const Mat& a, const Mat& b) {
  double na = a.frob_norm(), nb = b.frob_norm();
  require(na > 0.0 && nb > 0.0, errc::runtime, "cosine: zero-norm vector");
  return dot(a, b) / (na * nb);
}

}  // namespace bimotion
