#pragma once

#include "homog/core.hpp"

#include <array>
#include <cmath>

namespace homog {

enum class Interpolation { bilinear, cubic, p1_lattice };

/// Periodic matrix-valued field on the unit torus sampled on a uniform
/// n×n grid. Sample (k1, k2) sits at y = (k1/n, k2/n); storage is one column
/// per grid point (point index k1·n + k2), one row per matrix entry (i + rows·j).
class GridField {
 public:
  GridField() = default;
  GridField(int n, int rows, int cols, Interpolation interp = Interpolation::cubic)
      : n_(n), rows_(rows), cols_(cols), interp_(interp), data_(Matrix::Zero(rows * cols, n * n)) {}

  int n() const noexcept { return n_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int points() const noexcept { return n_ * n_; }
  bool empty() const noexcept { return n_ == 0; }
  Interpolation interpolation() const noexcept { return interp_; }
  void set_interpolation(Interpolation i) noexcept { interp_ = i; }

  Matrix& data() noexcept { return data_; }
  const Matrix& data() const noexcept { return data_; }

  int index(int k1, int k2) const noexcept { return wrap(k1) * n_ + wrap(k2); }
  Vec2 point(int p) const { return Vec2(Real(p / n_) / n_, Real(p % n_) / n_); }

  /// Entry (i, j) as a flat view over all grid points.
  auto entry(int i, int j) { return data_.row(i + rows_ * j); }
  auto entry(int i, int j) const { return data_.row(i + rows_ * j); }

  Matrix at(int p) const { return Eigen::Map<const Matrix>(data_.col(p).data(), rows_, cols_); }
  void set(int p, const Matrix& m) { data_.col(p) = Eigen::Map<const Vector>(m.data(), rows_ * cols_); }

  Matrix mean() const {
    Vector m = data_.rowwise().mean();
    return Eigen::Map<const Matrix>(m.data(), rows_, cols_);
  }

  Real max_abs() const { return data_.size() ? data_.cwiseAbs().maxCoeff() : 0.0; }

  /// Evaluate at an arbitrary point; wrap-around indexing enforces periodicity.
  Matrix operator()(const Vec2& y) const {
    Vector out(rows_ * cols_);
    eval_into(y, out);
    return Eigen::Map<const Matrix>(out.data(), rows_, cols_);
  }

  void eval_into(const Vec2& y, Vector& out) const {
    const Real s1 = frac(y.x()) * n_;
    const Real s2 = frac(y.y()) * n_;
    int i1 = static_cast<int>(std::floor(s1));
    int i2 = static_cast<int>(std::floor(s2));
    const Real t1 = s1 - i1;
    const Real t2 = s2 - i2;
    switch (interp_) {
      case Interpolation::bilinear:
        out = (1 - t1) * (1 - t2) * data_.col(index(i1, i2)) + t1 * (1 - t2) * data_.col(index(i1 + 1, i2)) +
              (1 - t1) * t2 * data_.col(index(i1, i2 + 1)) + t1 * t2 * data_.col(index(i1 + 1, i2 + 1));
        return;
      case Interpolation::p1_lattice: {
        // Union-jack split: cells with k1 + k2 even use the (0,0)-(1,1) diagonal,
        // the others the (1,0)-(0,1) diagonal.
        const auto f00 = data_.col(index(i1, i2));
        const auto f10 = data_.col(index(i1 + 1, i2));
        const auto f01 = data_.col(index(i1, i2 + 1));
        const auto f11 = data_.col(index(i1 + 1, i2 + 1));
        if ((wrap(i1) + wrap(i2)) % 2 == 0) {
          if (t1 >= t2)
            out = f00 + t1 * (f10 - f00) + t2 * (f11 - f10);
          else
            out = f00 + t1 * (f11 - f01) + t2 * (f01 - f00);
        } else {
          if (t1 + t2 <= 1)
            out = f00 + t1 * (f10 - f00) + t2 * (f01 - f00);
          else
            out = f11 + (1 - t1) * (f01 - f11) + (1 - t2) * (f10 - f11);
        }
        return;
      }
      case Interpolation::cubic: {
        const auto w1 = cubic_weights(t1);
        const auto w2 = cubic_weights(t2);
        out.setZero(rows_ * cols_);
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) out += (w1[a] * w2[b]) * data_.col(index(i1 - 1 + a, i2 - 1 + b));
        return;
      }
    }
  }

  static Real frac(Real x) { return x - std::floor(x); }

 private:
  int wrap(int k) const noexcept {
    const int r = k % n_;
    return r < 0 ? r + n_ : r;
  }

  // Four-point Lagrange weights on nodes -1, 0, 1, 2.
  static std::array<Real, 4> cubic_weights(Real t) {
    return {-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2, -(t + 1) * t * (t - 2) / 2,
            (t + 1) * t * (t - 1) / 6};
  }

  int n_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  Interpolation interp_ = Interpolation::cubic;
  Matrix data_;
};

}  // namespace homog
