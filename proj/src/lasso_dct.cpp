#include "gs/lasso_dct.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace gs {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

double l1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

std::vector<double> DctBasis::matrix(std::size_t n) {
  std::vector<double> c(n * n);
  const double dn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / dn) : std::sqrt(2.0 / dn);
    for (std::size_t i = 0; i < n; ++i) {
      c[k * n + i] = s * std::cos(M_PI * (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(k) / (2.0 * dn));
    }
  }
  return c;
}

DctBasis::DctBasis(const Shape& image) : shape_(image) {
  if (image.size() != 3) throw ShapeError("DCT basis needs a [C,H,W] shape, got " + to_string(image));
  const auto r = matrix(image[1]), c = matrix(image[2]);
  rows_.assign(r.begin(), r.end());
  cols_.assign(c.begin(), c.end());
}

Tensor DctBasis::dct2(const Tensor& x) const {
  if (x.size() != numel(shape_)) {
    throw ShapeError("dct2: expected " + std::to_string(numel(shape_)) + " values, got " + std::to_string(x.size()));
  }
  const std::size_t H = shape_[1], W = shape_[2];
  Tensor z(shape_);
  for (std::size_t c = 0; c < shape_[0]; ++c) {
    MMap(z.ptr() + c * H * W, H, W).noalias() =
        CMap(rows_.data(), H, H) * CMap(x.ptr() + c * H * W, H, W) * CMap(cols_.data(), W, W).transpose();
  }
  return z;
}

Tensor DctBasis::idct2(const Tensor& z) const {
  if (z.size() != numel(shape_)) {
    throw ShapeError("idct2: expected " + std::to_string(numel(shape_)) + " values, got " + std::to_string(z.size()));
  }
  const std::size_t H = shape_[1], W = shape_[2];
  Tensor x(shape_);
  for (std::size_t c = 0; c < shape_[0]; ++c) {
    MMap(x.ptr() + c * H * W, H, W).noalias() =
        CMap(rows_.data(), H, H).transpose() * CMap(z.ptr() + c * H * W, H, W) * CMap(cols_.data(), W, W);
  }
  return x;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

Tensor soft_threshold(const Tensor& v, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("soft threshold needs t >= 0");
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], t);
  return out;
}

double operator_norm_sq(const MeasurementOperator& op) {
  switch (op.kind()) {
    case OperatorKind::Identity:
    case OperatorKind::Inpainting:
      return 1.0;
    case OperatorKind::SuperRes: {
      const double f = static_cast<double>(op.spec().factor);
      return 1.0 / (f * f);
    }
    case OperatorKind::Gaussian:
      break;
  }
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor v(op.image_shape());
  for (double& e : v.data()) e = normal(rng);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double nv = l2_norm(v.data());
    for (double& e : v.data()) e /= nv;
    const Tensor w = op.adjoint(op.apply(v));
    const double next = dot(v.data(), w.data());  // Rayleigh quotient of AᵀA
    v = w;
    const bool settled = std::abs(next - lambda) <= 1e-10 * next;
    lambda = next;
    if (settled) break;
  }
  // The Rayleigh quotient approaches σ_max² from below.
  return 1.1 * lambda;
}

LassoSolution lasso_dct_solve(const MeasurementOperator& op, const Tensor& y, const LassoOptions& opts) {
  if (!(opts.lambda >= 0.0)) throw std::invalid_argument("lasso: lambda must be >= 0");
  if (y.size() != op.m()) {
    throw ShapeError("lasso: measurement has " + std::to_string(y.size()) + " entries, operator expects " +
                     std::to_string(op.m()));
  }
  const DctBasis basis(op.image_shape());
  const double L = 2.0 * operator_norm_sq(op);
  const double step = 1.0 / L;

  auto objective = [&](const Tensor& z) {
    const Tensor r = op.apply(basis.idct2(z));
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += (r[i] - y[i]) * (r[i] - y[i]);
    return s + opts.lambda * l1(z.data());
  };
  auto gradient = [&](const Tensor& z) {
    Tensor r = op.apply(basis.idct2(z));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = 2.0 * (r[i] - y[i]);
    return basis.dct2(op.adjoint(r));
  };

  Tensor z(op.image_shape());
  Tensor momentum = z;
  double t_k = 1.0;
  LassoSolution sol{z, Tensor(op.image_shape()), objective(z), 0, step, {}};
  sol.objectives.push_back(sol.objective);
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    const Tensor& base = opts.fista ? momentum : z;
    const Tensor g = gradient(base);
    Tensor next(op.image_shape());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = soft_threshold(base[i] - step * g[i], opts.lambda * step);
    if (opts.fista) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
      for (std::size_t i = 0; i < next.size(); ++i) momentum[i] = next[i] + ((t_k - 1.0) / t_next) * (next[i] - z[i]);
      t_k = t_next;
    }
    z = std::move(next);
    const double f = objective(z);
    const double prev = sol.objective;
    if (!opts.fista && f > prev + 1e-12 * std::max(1.0, prev)) {
      throw std::logic_error("ISTA objective increased from " + std::to_string(prev) + " to " + std::to_string(f));
    }
    sol.objective = f;
    sol.objectives.push_back(f);
    sol.iterations = it + 1;
    if (std::abs(prev - f) <= opts.tol * std::max(prev, 1e-300)) break;
  }
  sol.coefficients = z;
  sol.image = basis.idct2(z);
  return sol;
}

}  // namespace gs
