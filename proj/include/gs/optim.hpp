#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace gs {

enum class OptimizerKind { Gd, Adam, Lbfgs };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

/// Returns f(x) and writes ∇f(x) into `grad` (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t size, AdamOptions opts = {});

  void step(std::span<double> x, std::span<const double> grad, double lr);
  /// Per-coordinate learning rates.
  void step(std::span<double> x, std::span<const double> grad, std::span<const double> lr);
  /// The update step() would apply, without applying it.
  std::vector<double> propose(std::span<const double> grad, std::span<const double> lr);

  std::size_t steps_taken() const { return t_; }

 private:
  AdamOptions opts_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct MinimizeOptions {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 0.1;
  std::size_t steps = 100;
  std::size_t lbfgs_history = 10;
  /// Applied to x after every step when set (e.g. a norm-ball projection).
  std::function<void(std::span<double>)> project;
};

struct MinimizeTrace {
  /// Objective at x⁽⁰⁾ … x⁽ᵀ⁾; the last entry is the final loss.
  std::vector<double> losses;
  std::size_t evaluations = 0;

  double final_loss() const { return losses.back(); }
};

/// Runs `steps` iterations of the chosen optimizer on x in place.
/// L-BFGS uses two-loop recursion with Armijo backtracking from step `lr`.
MinimizeTrace minimize(const Objective& f, std::span<double> x, const MinimizeOptions& opts);

}  // namespace gs
