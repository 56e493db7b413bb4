#include "gs/optim.hpp"

#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gs {

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Gd: return "gd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Lbfgs: return "lbfgs";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "gd") return OptimizerKind::Gd;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "lbfgs") return OptimizerKind::Lbfgs;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected gd, adam or lbfgs)");
}

Adam::Adam(std::size_t size, AdamOptions opts) : opts_(opts), m_(size, 0.0), v_(size, 0.0) {}

std::vector<double> Adam::propose(std::span<const double> grad, std::span<const double> lr) {
  if (grad.size() != m_.size()) throw std::invalid_argument("Adam: gradient length mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  std::vector<double> delta(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * grad[i];
    v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * grad[i] * grad[i];
    const double rate = lr.size() == 1 ? lr[0] : lr[i];
    delta[i] = -rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opts_.eps);
  }
  return delta;
}

void Adam::step(std::span<double> x, std::span<const double> grad, std::span<const double> lr) {
  const std::vector<double> delta = propose(grad, lr);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += delta[i];
}

void Adam::step(std::span<double> x, std::span<const double> grad, double lr) {
  step(x, grad, std::span<const double>(&lr, 1));
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

struct CurvaturePair {
  std::vector<double> s, y;
  double rho;
};

// H·g by the two-loop recursion; returns the descent direction −H·g.
std::vector<double> lbfgs_direction(const std::deque<CurvaturePair>& history, std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(history.size());
  for (std::size_t k = history.size(); k-- > 0;) {
    alpha[k] = history[k].rho * dot(history[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * history[k].y[i];
  }
  if (!history.empty()) {
    const CurvaturePair& last = history.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < history.size(); ++k) {
    const double beta = history[k].rho * dot(history[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += history[k].s[i] * (alpha[k] - beta);
  }
  for (double& v : q) v = -v;
  return q;
}

MinimizeTrace run_first_order(const Objective& f, std::span<double> x, const MinimizeOptions& opts) {
  MinimizeTrace trace;
  std::vector<double> g(x.size());
  Adam adam(x.size());
  for (std::size_t t = 0; t < opts.steps; ++t) {
    trace.losses.push_back(f(x, g));
    ++trace.evaluations;
    if (opts.kind == OptimizerKind::Adam) {
      adam.step(x, g, opts.lr);
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= opts.lr * g[i];
    }
    if (opts.project) opts.project(x);
  }
  trace.losses.push_back(f(x, g));
  ++trace.evaluations;
  return trace;
}

MinimizeTrace run_lbfgs(const Objective& f, std::span<double> x, const MinimizeOptions& opts) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 30;
  MinimizeTrace trace;
  std::vector<double> g(x.size()), g_new(x.size()), x_new(x.size());
  double fx = f(x, g);
  ++trace.evaluations;
  std::deque<CurvaturePair> history;
  for (std::size_t t = 0; t < opts.steps; ++t) {
    trace.losses.push_back(fx);
    std::vector<double> d = lbfgs_direction(history, g);
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      history.clear();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i];
      slope = -dot(g, g);
    }
    if (slope == 0.0) continue;  // stationary point
    double step = opts.lr;
    if (history.empty()) {
      double g1 = 0.0;
      for (double v : g) g1 += std::abs(v);
      step = opts.lr * std::min(1.0, 1.0 / g1);
    }
    bool accepted = false;
    double f_new = fx;
    for (int k = 0; k < kMaxBacktracks && !accepted; ++k, step *= 0.5) {
      for (std::size_t i = 0; i < x.size(); ++i) x_new[i] = x[i] + step * d[i];
      f_new = f(x_new, g_new);
      ++trace.evaluations;
      accepted = std::isfinite(f_new) && f_new <= fx + kArmijo * step * slope;
    }
    if (!accepted) continue;  // no decrease along d; keep x

    CurvaturePair pair{std::vector<double>(x.size()), std::vector<double>(x.size()), 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
      pair.s[i] = x_new[i] - x[i];
      pair.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-12) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > opts.lbfgs_history) history.pop_front();
    }
    std::copy(x_new.begin(), x_new.end(), x.begin());
    g.swap(g_new);
    fx = f_new;
    if (opts.project) {
      opts.project(x);
      fx = f(x, g);
      ++trace.evaluations;
    }
  }
  trace.losses.push_back(fx);
  return trace;
}

}  // namespace

MinimizeTrace minimize(const Objective& f, std::span<double> x, const MinimizeOptions& opts) {
  if (!(opts.lr > 0.0)) throw std::invalid_argument("step size must be positive");
  if (opts.kind == OptimizerKind::Lbfgs) return run_lbfgs(f, x, opts);
  return run_first_order(f, x, opts);
}

}  // namespace gs
