#pragma once

// Shared helpers for the unit tests and the acceptance gate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gs/autodiff.hpp"
#include "gs/tensor.hpp"

namespace gs::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Uniform in ±[lo, hi]: keeps samples away from 0 (for kinks such as relu).
inline Tensor random_away_from_zero(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Tensor t(shape);
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

using Builder = std::function<Var(std::span<const Var>)>;

/// Scalarises f(inputs) as ⟨f(inputs), W⟩ with fixed random W, then compares the
/// tape gradient of every input against central differences. Returns the worst
/// per-input relative error ‖g_ad − g_fd‖∞ / max(‖g_ad‖∞, ‖g_fd‖∞, 1e-12).
inline double gradient_error(const Builder& f, const std::vector<Tensor>& inputs, std::uint64_t seed,
                             double h = 1e-5) {
  std::mt19937_64 rng(seed);
  Tensor weights;
  auto evaluate = [&](const std::vector<Tensor>& xs, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& x : xs) leaves.push_back(tape.leaf(x, grads != nullptr));
    const Var y = f(leaves);
    if (weights.empty()) weights = random_tensor(y.shape(), rng);
    const Var loss = sum(mul(y, tape.leaf(weights)));
    if (grads) {
      tape.backward(loss);
      for (const Var& l : leaves) grads->push_back(l.grad());
    }
    return loss.value()[0];
  };
  std::vector<Tensor> analytic;
  evaluate(inputs, &analytic);

  double worst = 0.0;
  std::vector<Tensor> xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Tensor numeric(xs[k].shape());
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double orig = xs[k][i];
      xs[k][i] = orig + h;
      const double up = evaluate(xs, nullptr);
      xs[k][i] = orig - h;
      const double down = evaluate(xs, nullptr);
      xs[k][i] = orig;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, scale = 1e-12;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff = std::max(diff, std::abs(numeric[i] - analytic[k][i]));
      scale = std::max({scale, std::abs(numeric[i]), std::abs(analytic[k][i])});
    }
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

struct OpCase {
  std::string name;
  /// Draws fresh inputs for one trial.
  std::function<std::vector<Tensor>(std::mt19937_64&)> inputs;
  Builder build;
};

/// One case per differentiable op, on small random tensors.
inline std::vector<OpCase> op_catalog() {
  using R = std::mt19937_64;
  auto rt = [](Shape s) { return [s](R& rng) { return std::vector<Tensor>{random_tensor(s, rng)}; }; };
  std::vector<OpCase> cases;
  cases.push_back({"conv2d",
                   [](R& rng) {
                     return std::vector<Tensor>{random_tensor({1, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
                                                random_tensor({3}, rng)};
                   },
                   [](std::span<const Var> v) { return conv2d(v[0], v[1], v[2], 1, 1); }});
  cases.push_back({"conv2d_stride2",
                   [](R& rng) {
                     return std::vector<Tensor>{random_tensor({2, 2, 6, 6}, rng), random_tensor({2, 2, 4, 4}, rng),
                                                random_tensor({2}, rng)};
                   },
                   [](std::span<const Var> v) { return conv2d(v[0], v[1], v[2], 2, 1); }});
  cases.push_back({"conv_transpose2d",
                   [](R& rng) {
                     return std::vector<Tensor>{random_tensor({1, 2, 3, 3}, rng), random_tensor({2, 3, 4, 4}, rng),
                                                random_tensor({3}, rng)};
                   },
                   [](std::span<const Var> v) { return conv_transpose2d(v[0], v[1], v[2], 2, 1); }});
  cases.push_back({"upsample_nearest", rt({1, 2, 3, 3}),
                   [](std::span<const Var> v) { return upsample_nearest(v[0], 2); }});
  cases.push_back({"dense",
                   [](R& rng) {
                     return std::vector<Tensor>{random_tensor({3, 4}, rng), random_tensor({5, 4}, rng),
                                                random_tensor({5}, rng)};
                   },
                   [](std::span<const Var> v) { return dense(v[0], v[1], v[2]); }});
  cases.push_back({"relu", [](R& rng) { return std::vector<Tensor>{random_away_from_zero({12}, rng, 0.05, 1.0)}; },
                   [](std::span<const Var> v) { return relu(v[0]); }});
  cases.push_back({"elu", [](R& rng) { return std::vector<Tensor>{random_away_from_zero({12}, rng, 0.05, 1.5)}; },
                   [](std::span<const Var> v) { return elu(v[0]); }});
  cases.push_back({"tanh", rt({12}), [](std::span<const Var> v) { return tanh(v[0]); }});
  cases.push_back({"sigmoid", rt({12}), [](std::span<const Var> v) { return sigmoid(v[0]); }});
  cases.push_back({"exp", rt({12}), [](std::span<const Var> v) { return exp(v[0]); }});
  cases.push_back({"square", rt({12}), [](std::span<const Var> v) { return square(v[0]); }});
  cases.push_back({"scale", rt({12}), [](std::span<const Var> v) { return scale(v[0], -2.5); }});
  auto pair = [](R& rng) { return std::vector<Tensor>{random_tensor({2, 5}, rng), random_tensor({2, 5}, rng)}; };
  cases.push_back({"add", pair, [](std::span<const Var> v) { return add(v[0], v[1]); }});
  cases.push_back({"sub", pair, [](std::span<const Var> v) { return sub(v[0], v[1]); }});
  cases.push_back({"mul", pair, [](std::span<const Var> v) { return mul(v[0], v[1]); }});
  cases.push_back({"sum", rt({3, 4}), [](std::span<const Var> v) { return sum(v[0]); }});
  cases.push_back({"mean", rt({3, 4}), [](std::span<const Var> v) { return mean(v[0]); }});
  cases.push_back({"mse", pair, [](std::span<const Var> v) { return mse(v[0], v[1]); }});
  cases.push_back({"l2_norm", rt({7}), [](std::span<const Var> v) { return l2_norm(v[0]); }});
  cases.push_back({"reshape", rt({2, 6}), [](std::span<const Var> v) { return reshape(v[0], {3, 4}); }});
  cases.push_back({"slice", rt({10}), [](std::span<const Var> v) { return slice(v[0], 3, {2, 2}); }});
  cases.push_back({"linear_map", rt({4}), [](std::span<const Var> v) {
                     // y = M x with M = [[1,2,0,-1],[0,3,1,1],[2,0,0,4]]
                     static const double M[3][4] = {{1, 2, 0, -1}, {0, 3, 1, 1}, {2, 0, 0, 4}};
                     return linear_map(
                         v[0], {3},
                         [](std::span<const double> x, std::span<double> y) {
                           for (int r = 0; r < 3; ++r) {
                             y[r] = 0.0;
                             for (int c = 0; c < 4; ++c) y[r] += M[r][c] * x[c];
                           }
                         },
                         [](std::span<const double> y, std::span<double> x) {
                           for (int c = 0; c < 4; ++c) {
                             x[c] = 0.0;
                             for (int r = 0; r < 3; ++r) x[c] += M[r][c] * y[r];
                           }
                         });
                   }});
  cases.push_back({"mlp_composite",
                   [](R& rng) {
                     return std::vector<Tensor>{random_tensor({2, 4}, rng), random_tensor({6, 4}, rng),
                                                random_tensor({6}, rng), random_tensor({3, 6}, rng),
                                                random_tensor({3}, rng), random_tensor({2, 3}, rng)};
                   },
                   [](std::span<const Var> v) {
                     const Var h = tanh(dense(v[0], v[1], v[2]));
                     return mse(sigmoid(dense(h, v[3], v[4])), v[5]);
                   }});
  cases.push_back({"chain6", rt({6}), [](std::span<const Var> v) {
                     // six ops deep
                     return l2_norm(scale(sigmoid(mul(tanh(v[0]), exp(scale(v[0], 0.3)))), 2.0));
                   }});
  return cases;
}

}  // namespace gs::testing
