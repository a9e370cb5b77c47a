#pragma once

#include "homog/core.hpp"

#include <fftw3.h>

#include <complex>
#include <memory>

namespace homog::spectral_ops {

using Complex = std::complex<Real>;

/// Owning 2D complex FFT on an n×n torus grid (point index k1·n + k2).
class Fft2 {
 public:
  explicit Fft2(int n) : n_(n) {
    const auto size = static_cast<std::size_t>(n) * n;
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size));
    fwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;
  ~Fft2() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  int n() const noexcept { return n_; }

  /// Real samples to unnormalized Fourier coefficients.
  template <typename In>
  void forward(const In& in, Eigen::VectorXcd& out) const {
    const int m = n_ * n_;
    for (int p = 0; p < m; ++p) {
      buf_[p][0] = in[p];
      buf_[p][1] = 0.0;
    }
    fftw_execute(fwd_);
    out.resize(m);
    for (int p = 0; p < m; ++p) out[p] = Complex(buf_[p][0], buf_[p][1]);
  }

  /// Fourier coefficients back to real samples (normalized, imaginary part dropped).
  template <typename Out>
  void backward(const Eigen::VectorXcd& in, Out&& out) const {
    const int m = n_ * n_;
    for (int p = 0; p < m; ++p) {
      buf_[p][0] = in[p].real();
      buf_[p][1] = in[p].imag();
    }
    fftw_execute(bwd_);
    const Real scale = 1.0 / m;
    for (int p = 0; p < m; ++p) out[p] = buf_[p][0] * scale;
  }

  /// Angular wave number 2π·k for index i, with the Nyquist index mapped to 0
  /// so that spectral derivatives of real data stay real.
  Real wavenumber(int i) const noexcept {
    if (2 * i == n_) return 0.0;
    return two_pi * (2 * i < n_ ? i : i - n_);
  }

 private:
  int n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// ∂_{y_α} of a real scalar sample array.
inline Vector derivative(const Fft2& fft, const Vector& f, int alpha) {
  Eigen::VectorXcd c;
  fft.forward(f, c);
  const int n = fft.n();
  for (int k1 = 0; k1 < n; ++k1)
    for (int k2 = 0; k2 < n; ++k2) {
      const Real xi = fft.wavenumber(alpha == 0 ? k1 : k2);
      c[k1 * n + k2] *= Complex(0.0, xi);
    }
  Vector out(n * n);
  fft.backward(c, out);
  return out;
}

/// Entrywise derivative of every row of a (entries × points) sample matrix.
inline Matrix derivative_rows(const Fft2& fft, const Matrix& f, int alpha) {
  Matrix out(f.rows(), f.cols());
  for (int r = 0; r < f.rows(); ++r) {
    Vector row = f.row(r).transpose();
    out.row(r) = derivative(fft, row, alpha).transpose();
  }
  return out;
}

}  // namespace homog::spectral_ops
