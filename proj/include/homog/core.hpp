#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace homog {

using Real = double;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr Real pi = std::numbers::pi;
inline constexpr Real two_pi = 2.0 * std::numbers::pi;

enum class ErrorCode {
  EllipticityViolation,
  SymmetryViolation,
  NonFiniteEntry,
  NonConvergence,
  ResolutionMismatch,
  NotDivergenceFree,
  NonZeroMean,
  NonConvex,
  DegenerateEdge,
  SlopeInfinite,
  TargetTooFine,
  MeshQuality,
  QuadratureUnderResolved,
  SolverFailure,
  ConvergenceFailure,
  NonPositiveEigenvalue,
  UnresolvedCell,
  NoDecay,
  NonCauchy,
  MissingTail,
  UnresolvedOscillation,
  MissingCorrector,
  ClusterMismatch,
  ConfigParse,
  EmptyReport,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::EllipticityViolation: return "EllipticityViolation";
    case ErrorCode::SymmetryViolation: return "SymmetryViolation";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::NotDivergenceFree: return "NotDivergenceFree";
    case ErrorCode::NonZeroMean: return "NonZeroMean";
    case ErrorCode::NonConvex: return "NonConvex";
    case ErrorCode::DegenerateEdge: return "DegenerateEdge";
    case ErrorCode::SlopeInfinite: return "SlopeInfinite";
    case ErrorCode::TargetTooFine: return "TargetTooFine";
    case ErrorCode::MeshQuality: return "MeshQuality";
    case ErrorCode::QuadratureUnderResolved: return "QuadratureUnderResolved";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorCode::UnresolvedCell: return "UnresolvedCell";
    case ErrorCode::NoDecay: return "NoDecay";
    case ErrorCode::NonCauchy: return "NonCauchy";
    case ErrorCode::MissingTail: return "MissingTail";
    case ErrorCode::UnresolvedOscillation: return "UnresolvedOscillation";
    case ErrorCode::MissingCorrector: return "MissingCorrector";
    case ErrorCode::ClusterMismatch: return "ClusterMismatch";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Error raised by every module. `qualified()` gives "module.Code".
class Error : public std::runtime_error {
 public:
  Error(std::string module, ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(module) + "." + std::string(to_string(code)) + ": " + what),
        module_(std::move(module)),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  std::string qualified() const { return module_ + "." + std::string(to_string(code_)); }

 private:
  std::string module_;
  ErrorCode code_;
};

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

/// Short human-readable form of a number for logs.
inline std::string brief(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

/// Coefficient tensor A^{αβ}_{ij} at a single point, stored as the 2N×2N
/// matrix with row (α,i) = α·N+i and column (β,j) = β·N+j.
class BlockTensor {
 public:
  BlockTensor() = default;
  explicit BlockTensor(int n) : n_(n), m_(Matrix::Zero(2 * n, 2 * n)) {}
  BlockTensor(int n, Matrix m) : n_(n), m_(std::move(m)) {}

  static BlockTensor identity(int n) {
    BlockTensor t(n);
    t.m_.setIdentity();
    return t;
  }

  /// A^{αβ}_{ij} = δ_{αβ}·a·δ_{ij}
  static BlockTensor scalar(int n, Real a) {
    BlockTensor t(n);
    t.m_.diagonal().setConstant(a);
    return t;
  }

  int n() const noexcept { return n_; }
  Matrix& matrix() noexcept { return m_; }
  const Matrix& matrix() const noexcept { return m_; }

  auto block(int alpha, int beta) { return m_.block(alpha * n_, beta * n_, n_, n_); }
  auto block(int alpha, int beta) const { return m_.block(alpha * n_, beta * n_, n_, n_); }
  Real& operator()(int alpha, int beta, int i, int j) { return m_(alpha * n_ + i, beta * n_ + j); }
  Real operator()(int alpha, int beta, int i, int j) const { return m_(alpha * n_ + i, beta * n_ + j); }

  /// max |A^{αβ}_{ij} − A^{βα}_{ji}|
  Real asymmetry() const { return (m_ - m_.transpose()).cwiseAbs().maxCoeff(); }

  /// Extreme Rayleigh quotients of A^{αβ}ξ^α·ξ^β over ξ ∈ R^{N×2}.
  std::pair<Real, Real> rayleigh_bounds() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m_ + m_.transpose()), Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }

  /// Coefficients seen in rotated coordinates y = M z:
  /// Ã^{γδ} = M_{αγ} A^{αβ} M_{βδ}.
  BlockTensor rotated(const Mat2& rot) const {
    Matrix big = Matrix::Zero(2 * n_, 2 * n_);
    for (int a = 0; a < 2; ++a)
      for (int g = 0; g < 2; ++g) big.block(a * n_, g * n_, n_, n_).diagonal().setConstant(rot(a, g));
    return BlockTensor(n_, big.transpose() * m_ * big);
  }

  BlockTensor operator*(Real c) const { return BlockTensor(n_, m_ * c); }
  BlockTensor operator+(const BlockTensor& o) const { return BlockTensor(n_, m_ + o.m_); }

 private:
  int n_ = 0;
  Matrix m_;
};

}  // namespace homog
