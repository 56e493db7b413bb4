#include "gs/recovery.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "gs/lasso_dct.hpp"
#include "gs/metrics.hpp"

namespace gs {

InitStrategy parse_init(std::string_view text) {
  if (text == "zero") return {InitKind::Zero, 1.0};
  if (text == "censored_normal") return {InitKind::CensoredNormal, 1.0};
  if (text == "lasso_init") return {InitKind::LassoInit, 1.0};
  if (text.starts_with("normal")) {
    double sigma = 1.0;
    if (text.size() > 6) {
      if (text[6] != ':') throw std::invalid_argument("expected normal:<sigma>, got '" + std::string(text) + "'");
      sigma = std::stod(std::string(text.substr(7)));
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("normal init needs sigma > 0");
    return {InitKind::Normal, sigma};
  }
  throw std::invalid_argument("unknown init strategy '" + std::string(text) +
                              "' (expected zero, censored_normal, normal:<sigma> or lasso_init)");
}

std::string init_name(const InitStrategy& init) {
  switch (init.kind) {
    case InitKind::Zero: return "zero";
    case InitKind::CensoredNormal: return "censored_normal";
    case InitKind::LassoInit: return "lasso_init";
    case InitKind::Normal: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "normal:%g", init.sigma);
      return buf;
    }
  }
  return "?";
}

void RecoveryConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("step size must be > 0");
  if (norm_cap && !(*norm_cap > 0.0)) throw std::invalid_argument("latent norm cap must be > 0");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(base ^ mix(stream));
}

Tensor init_latent(const InitStrategy& init, std::size_t dims, std::uint64_t seed) {
  Tensor z({dims});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (init.kind) {
    case InitKind::Zero:
      break;
    case InitKind::CensoredNormal:
      for (double& v : z.data()) v = std::clamp(normal(rng), -1.0, 1.0);
      break;
    case InitKind::Normal:
      for (double& v : z.data()) v = init.sigma * normal(rng);
      break;
    case InitKind::LassoInit:
      throw std::invalid_argument("lasso_init needs a Lasso-DCT baseline image");
  }
  return z;
}

Tensor init_latent(const InitStrategy& init, const CutGenerator& gc, const Tensor& lasso_image,
                   const RecoveryConfig& cfg, std::uint64_t seed) {
  if (init.kind != InitKind::LassoInit) return init_latent(init, gc.input_dim(), seed);
  const GeneratorNet& net = gc.net();
  const CutGenerator uncut(net, 0);
  const MeasurementOperator identity = MeasurementOperator::identity(net.image_shape());
  Tensor z0 = init_latent(InitStrategy{InitKind::CensoredNormal, 1.0}, net.latent_dim(), seed);
  MinimizeOptions opts;
  opts.kind = cfg.optimizer;
  opts.lr = cfg.lr;
  opts.steps = std::max<std::size_t>(1, cfg.steps / 2);
  minimize(measurement_objective(uncut, identity, lasso_image.reshaped({lasso_image.size()})), z0.data(), opts);
  return net.lift(z0, gc.cut_index());
}

Objective measurement_objective(const CutGenerator& gc, const MeasurementOperator& op, const Tensor& y) {
  if (op.n() != gc.output_dim()) {
    throw ShapeError("operator acts on " + std::to_string(op.n()) + " pixels but the generator produces " +
                     std::to_string(gc.output_dim()));
  }
  if (y.size() != op.m()) {
    throw ShapeError("measurement has " + std::to_string(y.size()) + " entries, operator produces " +
                     std::to_string(op.m()));
  }
  return [&gc, &op, y = y.reshaped({y.size()})](std::span<const double> z, std::span<double> grad) {
    Tape tape;
    const std::vector<Var> params = gc.net().bind(tape, false);
    const Var zv = tape.leaf(Tensor({z.size()}, std::vector<double>(z.begin(), z.end())), true);
    const Var x = gc.forward(zv, params);
    const Var loss = l2_norm(sub(op.apply(x), tape.leaf(y)));
    tape.backward(loss);
    const Tensor g = zv.grad();
    std::copy(g.data().begin(), g.data().end(), grad.begin());
    return loss.value()[0];
  };
}

namespace {

std::function<void(std::span<double>)> ball_projection(std::optional<double> cap) {
  if (!cap) return {};
  return [r = *cap](std::span<double> z) {
    const double nz = l2_norm(z);
    if (nz > r) {
      for (double& v : z) v *= r / nz;
    }
  };
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

RecoveryResult recover(const CutGenerator& gc, const MeasurementOperator& op, const Measurement& meas,
                       const RecoveryConfig& cfg, const Tensor* truth) {
  cfg.validate();
  if (cfg.cut != gc.cut_index()) {
    throw std::invalid_argument("config cut index " + std::to_string(cfg.cut) + " differs from the generator's " +
                                std::to_string(gc.cut_index()));
  }
  const auto start = std::chrono::steady_clock::now();
  const Objective f = measurement_objective(gc, op, meas.y);

  std::optional<Tensor> lasso_image;
  if (cfg.init.kind == InitKind::LassoInit) lasso_image = lasso_dct_solve(op, meas.y).image;

  MinimizeOptions opts;
  opts.kind = cfg.optimizer;
  opts.lr = cfg.lr;
  opts.steps = cfg.steps;
  opts.project = ball_projection(cfg.norm_cap);

  RecoveryResult result{Tensor(), Tensor(), std::numeric_limits<double>::infinity(), 0, {}, std::nullopt, 0.0, cfg};
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    RestartRecord record{derive_seed(cfg.seed, r), {}, false, {}};
    try {
      Tensor z = lasso_image ? init_latent(cfg.init, gc, *lasso_image, cfg, record.seed)
                             : init_latent(cfg.init, gc.input_dim(), record.seed);
      if (opts.project) opts.project(z.data());
      record.losses = minimize(f, z.data(), opts).losses;
      if (record.final_loss() < result.loss) {
        result.loss = record.final_loss();
        result.best_restart = r;
        result.latent = std::move(z);
      }
    } catch (const NumericError& e) {
      record.failed = true;
      record.failure = e.what();
      record.losses.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    result.restarts.push_back(std::move(record));
  }
  if (result.latent.empty()) {
    throw RecoveryError("all " + std::to_string(cfg.restarts) + " restarts failed; first failure: " +
                        result.restarts.front().failure);
  }
  result.image = gc.forward(result.latent);
  if (truth) result.psnr = psnr(*truth, result.image);
  result.wall_ms = elapsed_ms(start);
  return result;
}

RecoveryResult recover_uncut(const GeneratorNet& net, const MeasurementOperator& op, const Measurement& meas,
                             RecoveryConfig cfg, const Tensor* truth) {
  cfg.cut = 0;
  return recover(CutGenerator(net, 0), op, meas, cfg, truth);
}

IaganResult iagan_refine(const GeneratorNet& net, const MeasurementOperator& op, const Measurement& meas,
                         const IaganConfig& cfg, const Tensor* truth) {
  if (cfg.stage1.steps < 1) throw std::invalid_argument("IAGAN stage 1 needs at least one step");
  if (!(cfg.stage1.lr_z > 0.0)) throw std::invalid_argument("IAGAN stage 1 step size must be > 0");
  if (cfg.stage2.steps > 0 && !(cfg.stage2.lr_z > 0.0 && cfg.stage2.lr_theta > 0.0)) {
    throw std::invalid_argument("IAGAN stage 2 step sizes must be > 0");
  }
  const auto start = std::chrono::steady_clock::now();

  RecoveryConfig stage1;
  stage1.cut = 0;
  stage1.restarts = cfg.restarts;
  stage1.steps = cfg.stage1.steps;
  stage1.lr = cfg.stage1.lr_z;
  stage1.optimizer = OptimizerKind::Adam;
  stage1.init = cfg.init;
  stage1.seed = cfg.seed;
  IaganResult out{recover_uncut(net, op, meas, stage1, truth), 0.0, 0.0, 0};
  out.stage1_loss = out.stage2_loss = out.result.loss;
  if (cfg.stage2.steps == 0) {
    out.result.wall_ms = elapsed_ms(start);
    return out;
  }

  GeneratorNet refined = net;  // stage 2 never touches the caller's weights
  const std::size_t k = net.latent_dim();
  std::vector<double> x(out.result.latent.data().begin(), out.result.latent.data().end());
  for (const Tensor& p : refined.params()) x.insert(x.end(), p.data().begin(), p.data().end());
  std::vector<double> lr(x.size(), cfg.stage2.lr_theta);
  std::fill(lr.begin(), lr.begin() + static_cast<std::ptrdiff_t>(k), cfg.stage2.lr_z);

  const Tensor y = meas.y.reshaped({meas.y.size()});
  auto evaluate = [&](const std::vector<double>& v, std::vector<double>& grad) {
    Tape tape;
    std::vector<Var> params;
    std::size_t off = k;
    for (const Tensor& p : refined.params()) {
      params.push_back(tape.leaf(Tensor(p.shape(), std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(off),
                                                                        v.begin() + static_cast<std::ptrdiff_t>(off + p.size()))),
                                 true));
      off += p.size();
    }
    const Var z = tape.leaf(Tensor({1, k}, std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k))), true);
    const Var img = refined.forward_from(0, std::span<const Var>(&z, 1), params);
    const Var loss = l2_norm(sub(op.apply(img), tape.leaf(y)));
    tape.backward(loss);
    grad.assign(v.size(), 0.0);
    const Tensor gz = z.grad();
    std::copy(gz.data().begin(), gz.data().end(), grad.begin());
    off = k;
    for (const Var& p : params) {
      const Tensor gp = p.grad();
      std::copy(gp.data().begin(), gp.data().end(), grad.begin() + static_cast<std::ptrdiff_t>(off));
      off += gp.size();
    }
    return loss.value()[0];
  };

  std::vector<double> g, g_next, x_next(x.size());
  double fx = evaluate(x, g);
  Adam adam(x.size());
  for (std::size_t t = 0; t < cfg.stage2.steps; ++t) {
    const std::vector<double> delta = adam.propose(g, lr);
    for (std::size_t i = 0; i < x.size(); ++i) x_next[i] = x[i] + delta[i];
    double f_next;
    try {
      f_next = evaluate(x_next, g_next);
    } catch (const NumericError&) {
      f_next = std::numeric_limits<double>::infinity();
    }
    if (f_next <= fx) {
      x.swap(x_next);
      g.swap(g_next);
      fx = f_next;
      ++out.accepted_steps;
    } else {
      for (double& v : lr) v *= 0.5;
    }
  }

  std::size_t off = k;
  for (Tensor& p : refined.params()) {
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(off), x.begin() + static_cast<std::ptrdiff_t>(off + p.size()),
              p.data().begin());
    off += p.size();
  }
  out.result.latent = Tensor({k}, std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k)));
  out.result.image = refined.forward(out.result.latent);
  out.result.loss = fx;
  out.stage2_loss = fx;
  if (truth) out.result.psnr = psnr(*truth, out.result.image);
  out.result.wall_ms = elapsed_ms(start);
  return out;
}

Problem make_problem(const ProblemSpec& spec, const Shape& image, std::span<const Tensor> references) {
  MeasurementOperator op = MeasurementOperator::make(spec.op, image);
  const double sigma = spec.noisy ? noise_sigma(op, references, spec.noise).sigma : 0.0;
  return {std::move(op), sigma};
}

Measurement measure_for(const Problem& problem, const ProblemSpec& spec, const Tensor& x, std::size_t index) {
  return measure(x, problem.op, problem.sigma, derive_seed(spec.noise_seed, index));
}

CutSearchResult select_cut_index(const GeneratorNet& net, const std::vector<Tensor>& validation,
                                 const ProblemSpec& problem, const RecoveryConfig& cfg_template,
                                 const std::vector<std::size_t>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("cut search needs at least one candidate");
  for (std::size_t c : candidates) {
    if (c >= net.depth()) {
      throw std::out_of_range("cut candidate " + std::to_string(c) + " is not below depth " + std::to_string(net.depth()));
    }
  }
  if (validation.empty()) throw std::invalid_argument("cut search needs validation images");
  const Problem prob = make_problem(problem, net.image_shape(), validation);

  CutSearchResult out{candidates.front(), {}};
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c : candidates) {
    const CutGenerator gc(net, c);
    RecoveryConfig cfg = cfg_template;
    cfg.cut = c;
    CutSearchRow row{c, gc.input_dim(), 0.0, 0.0, {}};
    for (std::size_t i = 0; i < validation.size(); ++i) {
      const Measurement meas = measure_for(prob, problem, validation[i], i);
      const RecoveryResult res = recover(gc, prob.op, meas, cfg, &validation[i]);
      row.psnrs.push_back(cap_psnr(*res.psnr));
    }
    const Summary s = summarize(row.psnrs);
    row.mean_psnr = s.mean;
    row.std_psnr = s.stddev;
    if (row.mean_psnr > best || (row.mean_psnr == best && c < out.best_cut)) {
      best = row.mean_psnr;
      out.best_cut = c;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace gs
