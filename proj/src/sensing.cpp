#include "gs/sensing.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace gs {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_image(const Shape& image) {
  if (image.size() != 3) throw ShapeError("operators act on [C,H,W] images, got " + to_string(image));
}

std::size_t rows_for(double ratio, std::size_t n) {
  if (!(ratio > 0.0) || ratio > 1.0) {
    throw std::invalid_argument("measurement ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n))));
}

}  // namespace

std::string_view operator_kind_name(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Gaussian: return "gaussian";
    case OperatorKind::Inpainting: return "inpainting";
    case OperatorKind::SuperRes: return "superres";
    case OperatorKind::Identity: return "identity";
  }
  return "?";
}

OperatorKind parse_operator_kind(std::string_view name) {
  if (name == "gaussian") return OperatorKind::Gaussian;
  if (name == "inpainting") return OperatorKind::Inpainting;
  if (name == "superres") return OperatorKind::SuperRes;
  if (name == "identity") return OperatorKind::Identity;
  throw std::invalid_argument("unknown operator kind '" + std::string(name) +
                              "' (expected gaussian, inpainting, superres or identity)");
}

MeasurementOperator::MeasurementOperator(OperatorSpec spec, Shape image, std::size_t m)
    : spec_(spec), image_(std::move(image)), m_(m) {}

MeasurementOperator MeasurementOperator::identity(const Shape& image) {
  require_image(image);
  OperatorSpec spec;
  spec.kind = OperatorKind::Identity;
  spec.ratio = 1.0;
  return MeasurementOperator(spec, image, numel(image));
}

MeasurementOperator MeasurementOperator::gaussian(const Shape& image, std::size_t m, std::uint64_t seed) {
  require_image(image);
  const std::size_t n = numel(image);
  if (m < 1 || m > n) {
    throw std::invalid_argument("gaussian operator needs 1 <= m <= n, got m=" + std::to_string(m) +
                                ", n=" + std::to_string(n));
  }
  OperatorSpec spec;
  spec.kind = OperatorKind::Gaussian;
  spec.ratio = static_cast<double>(m) / static_cast<double>(n);
  spec.seed = seed;
  MeasurementOperator op(spec, image, m);
  op.matrix_.resize(m * n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  for (double& v : op.matrix_) v = normal(rng);
  return op;
}

MeasurementOperator MeasurementOperator::inpainting(const Shape& image, double keep_fraction, std::uint64_t seed) {
  require_image(image);
  const std::size_t n = numel(image);
  const std::size_t m = rows_for(keep_fraction, n);
  OperatorSpec spec;
  spec.kind = OperatorKind::Inpainting;
  spec.ratio = keep_fraction;
  spec.seed = seed;
  MeasurementOperator op(spec, image, m);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  op.kept_ = std::move(idx);
  return op;
}

MeasurementOperator MeasurementOperator::superres(const Shape& image, std::size_t factor) {
  require_image(image);
  if (factor < 1 || image[1] % factor != 0 || image[2] % factor != 0) {
    throw std::invalid_argument("downsampling factor " + std::to_string(factor) + " must divide image size " +
                                to_string(image));
  }
  OperatorSpec spec;
  spec.kind = OperatorKind::SuperRes;
  spec.factor = factor;
  spec.ratio = 1.0 / static_cast<double>(factor * factor);
  return MeasurementOperator(spec, image, numel(image) / (factor * factor));
}

MeasurementOperator MeasurementOperator::make(const OperatorSpec& spec, const Shape& image) {
  switch (spec.kind) {
    case OperatorKind::Gaussian: return gaussian(image, rows_for(spec.ratio, numel(image)), spec.seed);
    case OperatorKind::Inpainting: return inpainting(image, spec.ratio, spec.seed);
    case OperatorKind::SuperRes: return superres(image, spec.factor);
    case OperatorKind::Identity: return identity(image);
  }
  throw std::invalid_argument("unknown operator kind");
}

void MeasurementOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n() || y.size() != m_) {
    throw ShapeError("operator is " + std::to_string(m_) + "x" + std::to_string(n()) + ", got input " +
                     std::to_string(x.size()) + " and output " + std::to_string(y.size()));
  }
  switch (spec_.kind) {
    case OperatorKind::Identity:
      std::copy(x.begin(), x.end(), y.begin());
      return;
    case OperatorKind::Gaussian:
      Eigen::Map<Eigen::VectorXd>(y.data(), m_).noalias() =
          Eigen::Map<const RowMat>(matrix_.data(), m_, n()) * Eigen::Map<const Eigen::VectorXd>(x.data(), n());
      return;
    case OperatorKind::Inpainting:
      for (std::size_t i = 0; i < m_; ++i) y[i] = x[kept_[i]];
      return;
    case OperatorKind::SuperRes: {
      const std::size_t f = spec_.factor, H = image_[1], W = image_[2], h = H / f, w = W / f;
      const double inv = 1.0 / static_cast<double>(f * f);
      for (std::size_t c = 0; c < image_[0]; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < w; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < f; ++a) {
              for (std::size_t b = 0; b < f; ++b) s += x[(c * H + i * f + a) * W + j * f + b];
            }
            y[(c * h + i) * w + j] = s * inv;
          }
        }
      }
      return;
    }
  }
}

void MeasurementOperator::adjoint(std::span<const double> y, std::span<double> x) const {
  if (x.size() != n() || y.size() != m_) {
    throw ShapeError("operator is " + std::to_string(m_) + "x" + std::to_string(n()) + ", got input " +
                     std::to_string(y.size()) + " and output " + std::to_string(x.size()));
  }
  switch (spec_.kind) {
    case OperatorKind::Identity:
      std::copy(y.begin(), y.end(), x.begin());
      return;
    case OperatorKind::Gaussian:
      Eigen::Map<Eigen::VectorXd>(x.data(), n()).noalias() =
          Eigen::Map<const RowMat>(matrix_.data(), m_, n()).transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), m_);
      return;
    case OperatorKind::Inpainting:
      std::fill(x.begin(), x.end(), 0.0);
      for (std::size_t i = 0; i < m_; ++i) x[kept_[i]] = y[i];
      return;
    case OperatorKind::SuperRes: {
      const std::size_t f = spec_.factor, H = image_[1], W = image_[2], h = H / f, w = W / f;
      const double inv = 1.0 / static_cast<double>(f * f);
      for (std::size_t c = 0; c < image_[0]; ++c) {
        for (std::size_t i = 0; i < H; ++i) {
          for (std::size_t j = 0; j < W; ++j) x[(c * H + i) * W + j] = y[(c * h + i / f) * w + j / f] * inv;
        }
      }
      return;
    }
  }
}

Tensor MeasurementOperator::apply(const Tensor& x) const {
  Tensor y({m_});
  apply(x.data(), y.data());
  return y;
}

Tensor MeasurementOperator::adjoint(const Tensor& y) const {
  Tensor x(image_);
  adjoint(y.data(), x.data());
  return x;
}

Var MeasurementOperator::apply(const Var& x) const {
  return linear_map(
      x, {m_}, [this](std::span<const double> in, std::span<double> out) { apply(in, out); },
      [this](std::span<const double> in, std::span<double> out) { adjoint(in, out); });
}

Measurement measure(const Tensor& x, const MeasurementOperator& op, double sigma, std::uint64_t seed) {
  require_finite(x.data(), "measured image");
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise level must be >= 0");
  Measurement meas{op.apply(x), sigma, seed};
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& v : meas.y.data()) v += normal(rng);
  }
  return meas;
}

NoiseCalibration noise_sigma(const MeasurementOperator& op, std::span<const Tensor> references,
                             const NoiseRule& rule) {
  const Shape& img = op.image_shape();
  const double m = static_cast<double>(op.m());
  const double target = rule.reference_rms * rule.reference_rms;  // E‖η‖² at the reference size

  double energy = 0.0;
  for (const Tensor& x : references) {
    const Tensor ax = op.apply(x);
    energy += dot(ax.data(), ax.data());
  }
  if (!references.empty()) energy /= static_cast<double>(references.size());

  if (img[1] == rule.reference_size && img[2] == rule.reference_size) {
    return {rule.reference_rms / std::sqrt(m), energy > 0.0 ? target / energy : 0.0, energy, references.size()};
  }
  if (references.empty()) {
    throw std::invalid_argument("noise calibration away from the " + std::to_string(rule.reference_size) +
                                "px reference size needs reference images");
  }
  if (!(energy > 0.0)) throw std::invalid_argument("reference images have zero measurement energy");
  const double scale = static_cast<double>(rule.reference_size * rule.reference_size) /
                       static_cast<double>(img[1] * img[2]);
  const double ratio = target / (energy * scale);
  return {std::sqrt(ratio * energy / m), ratio, energy, references.size()};
}

}  // namespace gs
