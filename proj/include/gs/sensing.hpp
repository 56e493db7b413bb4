#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gs/autodiff.hpp"
#include "gs/tensor.hpp"

namespace gs {

enum class OperatorKind { Gaussian, Inpainting, SuperRes, Identity };

std::string_view operator_kind_name(OperatorKind kind);
OperatorKind parse_operator_kind(std::string_view name);

/// Everything needed to rebuild an operator exactly.
struct OperatorSpec {
  OperatorKind kind = OperatorKind::Gaussian;
  /// gaussian: m/n; inpainting: fraction of pixels kept. m = max(1, floor(ratio·n)).
  double ratio = 0.1;
  std::size_t factor = 2;  // superres block size
  std::uint64_t seed = 0;
};

/// Linear measurement map A: ℝⁿ → ℝᵐ over images of a fixed shape.
/// Gaussian A is stored dense with entries N(0, 1/m); the others are matrix-free.
class MeasurementOperator {
 public:
  static MeasurementOperator identity(const Shape& image);
  static MeasurementOperator gaussian(const Shape& image, std::size_t m, std::uint64_t seed);
  /// Keeps floor(keep_fraction·n) pixels chosen uniformly at random, in ascending order.
  static MeasurementOperator inpainting(const Shape& image, double keep_fraction, std::uint64_t seed);
  /// Averages non-overlapping factor×factor blocks per channel.
  static MeasurementOperator superres(const Shape& image, std::size_t factor);
  static MeasurementOperator make(const OperatorSpec& spec, const Shape& image);

  OperatorKind kind() const { return spec_.kind; }
  const OperatorSpec& spec() const { return spec_; }
  std::size_t m() const { return m_; }
  std::size_t n() const { return numel(image_); }
  const Shape& image_shape() const { return image_; }
  const std::vector<std::size_t>& kept() const { return kept_; }
  /// Row-major m×n entries (gaussian only).
  const AlignedVector& matrix() const { return matrix_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  void adjoint(std::span<const double> y, std::span<double> x) const;
  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& y) const;
  /// Differentiable A·x on a tape; x may have any shape with n elements. Returns [m].
  /// The operator must outlive the tape's backward pass.
  Var apply(const Var& x) const;

 private:
  MeasurementOperator(OperatorSpec spec, Shape image, std::size_t m);

  OperatorSpec spec_;
  Shape image_;
  std::size_t m_;
  AlignedVector matrix_;
  std::vector<std::size_t> kept_;
};

struct Measurement {
  Tensor y;  // [m]
  double sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

/// y = A·x + η with η ~ N(0, σ² I_m) drawn from `seed`.
Measurement measure(const Tensor& x, const MeasurementOperator& op, double sigma, std::uint64_t seed);

/// Noise scaling: √E‖η‖² = reference_rms at the reference resolution, and the
/// ratio E‖η‖²/E‖Ax‖² is held fixed at other resolutions.
struct NoiseRule {
  std::size_t reference_size = 64;
  double reference_rms = 0.1;
};

struct NoiseCalibration {
  double sigma;
  double noise_to_signal;     // E‖η‖² / E‖Ax‖² (0 if no references were given at the reference size)
  double mean_signal_energy;  // E‖Ax‖² over the references at the native size
  std::size_t references;
};

/// At the reference size σ = rms/√m. Elsewhere the reference-size signal
/// energy is taken as E‖Ax‖²·(n_ref/n) (per-pixel energy is resolution-free
/// at a fixed m/n), which requires a non-empty reference set.
NoiseCalibration noise_sigma(const MeasurementOperator& op, std::span<const Tensor> references,
                             const NoiseRule& rule = {});

}  // namespace gs
