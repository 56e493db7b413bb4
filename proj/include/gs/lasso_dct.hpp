#pragma once

#include <cstddef>
#include <vector>

#include "gs/sensing.hpp"
#include "gs/tensor.hpp"

namespace gs {

/// Separable orthonormal DCT-II over [C,H,W] images, applied per channel.
/// Φ = inverse transform, so x = Φz with z = dct2(x).
class DctBasis {
 public:
  explicit DctBasis(const Shape& image);

  const Shape& image_shape() const { return shape_; }
  Tensor dct2(const Tensor& x) const;
  Tensor idct2(const Tensor& z) const;

  /// Orthonormal N×N DCT-II matrix, row-major: C[k][i] = s_k cos(π(2i+1)k / 2N).
  static std::vector<double> matrix(std::size_t n);

 private:
  Shape shape_;
  AlignedVector rows_, cols_;
};

/// sign(v)·max(|v| − t, 0), componentwise.
double soft_threshold(double v, double t);
Tensor soft_threshold(const Tensor& v, double t);

struct LassoOptions {
  double lambda = 0.01;
  std::size_t max_iters = 2000;
  double tol = 1e-7;  // relative objective change
  bool fista = false;
};

struct LassoSolution {
  Tensor coefficients;  // ẑ
  Tensor image;         // x̂ = Φẑ
  double objective;
  std::size_t iterations;
  double step;  // 1/L
  std::vector<double> objectives;  // F at every iterate, starting from z = 0
};

/// Minimises ‖y − AΦz‖² + λ‖z‖₁ from z = 0. ISTA (default) checks that the
/// objective never increases and throws std::logic_error if it does.
LassoSolution lasso_dct_solve(const MeasurementOperator& op, const Tensor& y, const LassoOptions& opts = {});

/// σ_max(A)²: exact for identity/inpainting/superres, power iteration (at
/// most 200 rounds, inflated by 1.1) for gaussian operators.
double operator_norm_sq(const MeasurementOperator& op);

}  // namespace gs
