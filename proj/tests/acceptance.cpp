// Acceptance gate: one PASS/FAIL line per criterion, exit 0 only if all pass.
//
//   acceptance [--only 1,5,...] [--cache DIR]
//
// The trained vae-mini decoder is cached in DIR (default: the working
// directory) so reruns skip the ~4 minute training.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gs/commands.hpp"
#include "gs/dataset.hpp"
#include "gs/generator.hpp"
#include "gs/lasso_dct.hpp"
#include "gs/metrics.hpp"
#include "gs/recovery.hpp"
#include "gs/run_config.hpp"
#include "gs/sensing.hpp"
#include "gs/training.hpp"
#include "support.hpp"

using namespace gs;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and sizes ----
constexpr double kGradTol = 1e-6;
constexpr std::size_t kGradTrials = 100;
constexpr double kGradSeconds = 60;
constexpr double kCompositionTol = 1e-9;
constexpr std::size_t kCompositionDraws = 100;
constexpr double kGeneratedDb = 40.0;
constexpr double kGeneratedSeconds = 300;
constexpr double kRepGapDb = 3.0;
constexpr double kCsSeconds = 900;
constexpr double kTrainedGainDb = 1.0;
constexpr double kProxTol = 1e-6;
constexpr double kCoefTol = 1e-2;
constexpr double kNoiseRatioTol = 0.05;
// Relative slack for rounding once ISTA sits at its fixed point.
constexpr double kMonotoneSlack = 1e-14;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) { return summarize(v).mean; }

// Acceptance runs pin every optimizer setting rather than leaning on defaults.
RecoveryConfig gs_config(std::size_t c) {
  RecoveryConfig r;
  r.cut = c;
  r.restarts = 3;
  r.steps = 50;
  r.lr = 0.03;
  r.optimizer = OptimizerKind::Adam;
  r.init = {InitKind::Zero};
  return r;
}

// Raw reconstruction (A = I) has nothing to overfit, so it runs longer.
RecoveryConfig raw_gs_config(std::size_t c) {
  RecoveryConfig r = gs_config(c);
  r.steps = 300;
  return r;
}

RecoveryConfig nogs_config() {
  RecoveryConfig r;
  r.cut = 0;
  r.restarts = 3;
  r.steps = 300;
  r.lr = 0.05;
  r.optimizer = OptimizerKind::Adam;
  r.init = {InitKind::CensoredNormal};
  return r;
}

ProblemSpec cs_spec(double ratio, bool noisy = true) {
  ProblemSpec s;
  s.op = {OperatorKind::Gaussian, ratio, 2, 0};
  s.noisy = noisy;
  return s;
}

ProblemSpec identity_spec() {
  ProblemSpec s;
  s.op.kind = OperatorKind::Identity;
  s.noisy = false;
  return s;
}

struct Context {
  Dataset data;
  GeneratorNet net;
  std::vector<Tensor> refs;
  std::size_t cstar = 1;
  bool cstar_ready = false;
};

Dataset make_data() { return generate_synthetic_dataset(SyntheticSpec{.faces = 2000, .scenes = 100, .size = 32}); }

GeneratorNet trained_net(const Dataset& data, const fs::path& cache) {
  const RunConfig defaults = run_config_from_json(nlohmann::json::object());
  TrainConfig tc = defaults.train;
  const fs::path file = cache / fmt("acceptance-vae-mini-e%zu-b%g-s%llu.gsw", tc.epochs, tc.beta,
                                    static_cast<unsigned long long>(tc.seed));
  if (fs::exists(file)) {
    std::printf("# using cached decoder %s\n", file.c_str());
    return load_weights(file, kVaeMini);
  }
  std::printf("# training vae-mini for %zu epochs (beta %g)\n", tc.epochs, tc.beta);
  std::fflush(stdout);
  const auto t0 = Clock::now();
  TrainResult tr = train_vae(tc, data.images(Family::Faces, Split::Train));
  std::printf("# trained in %.0f s, final loss %.3f\n", seconds_since(t0), tr.log.back().loss);
  fs::create_directories(cache);
  save_weights(tr.decoder, file);
  return std::move(tr.decoder);
}

struct Scores {
  std::vector<double> psnr;
  std::vector<double> loss;
};

Scores run_method(const GeneratorNet& net, const std::vector<Tensor>& images, const ProblemSpec& spec,
                  std::span<const Tensor> refs, const RecoveryConfig& cfg) {
  const Problem prob = make_problem(spec, net.image_shape(), refs);
  const CutGenerator gc = cut(net, cfg.cut);
  Scores s{std::vector<double>(images.size()), std::vector<double>(images.size())};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Measurement meas = measure_for(prob, spec, images[i], i);
    const RecoveryResult r = recover(gc, prob.op, meas, cfg, &images[i]);
    s.psnr[i] = cap_psnr(*r.psnr);
    s.loss[i] = r.loss;
  }
  return s;
}

std::vector<double> run_lasso(const std::vector<Tensor>& images, const Shape& shape, const ProblemSpec& spec,
                              std::span<const Tensor> refs) {
  const Problem prob = make_problem(spec, shape, refs);
  const LassoOptions opts = run_config_from_json(nlohmann::json::object()).lasso;
  std::vector<double> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Measurement meas = measure_for(prob, spec, images[i], i);
    out[i] = cap_psnr(psnr(images[i], lasso_dct_solve(prob.op, meas.y, opts).image));
  }
  return out;
}

std::vector<Tensor> first(const std::vector<Tensor>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

// c* for the CS criteria: validation faces at gaussian m/n = 0.2, over every proper cut.
std::size_t choose_cut(Context& ctx) {
  if (ctx.cstar_ready) return ctx.cstar;
  const auto val = first(ctx.data.images(Family::Faces, Split::Val), 20);
  std::vector<std::size_t> candidates(ctx.net.depth() - 1);
  std::iota(candidates.begin(), candidates.end(), 1);
  const CutSearchResult cs = select_cut_index(ctx.net, val, cs_spec(0.2), gs_config(1), candidates);
  std::printf("# cut search (20 validation faces, m/n 0.2):");
  for (const auto& row : cs.rows) std::printf(" c=%zu %.2f dB", row.cut, row.mean_psnr);
  std::printf(" -> c* = %zu\n", cs.best_cut);
  ctx.cstar = cs.best_cut;
  ctx.cstar_ready = true;
  return ctx.cstar;
}

// ---- criteria ----

void gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  for (const auto& op : gs::testing::op_catalog()) {
    std::mt19937_64 rng(17);
    for (std::size_t t = 0; t < kGradTrials; ++t) {
      const double e = gs::testing::gradient_error(op.build, op.inputs(rng), 1000 + t);
      if (!(e <= worst)) {
        worst = e;
        worst_op = op.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, "gradient integrity", worst < kGradTol && secs < kGradSeconds,
         fmt("%zu ops x %zu trials, worst rel err %.2e (%s), %.1f s", gs::testing::op_catalog().size(), kGradTrials,
             worst, worst_op.c_str(), secs));
}

void composition_identity() {
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& id : recipe_ids()) {
    const GeneratorNet net = make_recipe(id, 3);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (std::size_t k = 0; k < kCompositionDraws; ++k) {
      Tensor z0({net.latent_dim()});
      for (double& v : z0.data()) v = n01(rng);
      const Tensor ref = net.forward(z0);
      for (std::size_t c = 0; c < net.depth(); ++c) {
        worst = std::max(worst, max_abs_diff(cut(net, c).forward(net.lift(z0, c)).data(), ref.data()));
        ++checks;
      }
    }
  }
  report(2, "composition identity", worst < kCompositionTol,
         fmt("%zu (recipe, z0, c) checks, max |G_c(lift) - G_0| = %.2e", checks, worst));
}

void optimization_error(const Context& ctx) {
  const auto t0 = Clock::now();
  const auto images = ctx.net.sample(50, 2024);
  RecoveryConfig cfg;
  cfg.cut = 0;
  cfg.restarts = 3;
  cfg.steps = 100;
  cfg.lr = 1.0;
  cfg.optimizer = OptimizerKind::Lbfgs;
  cfg.init = {InitKind::CensoredNormal};
  const Scores s = run_method(ctx.net, images, identity_spec(), {}, cfg);
  const double secs = seconds_since(t0);
  const double m = mean(s.psnr);
  report(3, "optimization-error isolation", m >= kGeneratedDb && secs < kGeneratedSeconds,
         fmt("uncut, A=I, 50 generated, R=3: mean %.2f dB (min %.2f), %.0f s", m,
             *std::min_element(s.psnr.begin(), s.psnr.end()), secs));
}

void representation_error(Context& ctx) {
  // The cut is chosen per task on validation faces, here under A = I.
  const auto val = first(ctx.data.images(Family::Faces, Split::Val), 20);
  std::vector<std::size_t> candidates(ctx.net.depth() - 1);
  std::iota(candidates.begin(), candidates.end(), 1);
  const CutSearchResult cs = select_cut_index(ctx.net, val, identity_spec(), raw_gs_config(1), candidates);
  std::printf("# cut search (20 validation faces, A=I):");
  for (const auto& row : cs.rows) std::printf(" c=%zu %.2f dB", row.cut, row.mean_psnr);
  std::printf(" -> c* = %zu\n", cs.best_cut);
  const std::size_t c = cs.best_cut;
  const auto images = first(ctx.data.images(Family::Faces, Split::Test), 100);
  const double gs = mean(run_method(ctx.net, images, identity_spec(), {}, raw_gs_config(c)).psnr);
  const double nogs = mean(run_method(ctx.net, images, identity_spec(), {}, nogs_config()).psnr);
  report(4, "representation-error reduction", gs - nogs >= kRepGapDb,
         fmt("100 test faces, A=I: GS(c=%zu) %.2f dB, NoGS %.2f dB, gap %.2f dB", c, gs, nogs, gs - nogs));
}

void cs_ordering(Context& ctx) {
  const std::size_t c = choose_cut(ctx);
  const auto t0 = Clock::now();
  const auto images = first(ctx.data.images(Family::Faces, Split::Test), 50);
  bool ok = true;
  std::string detail;
  for (double ratio : {0.1, 0.2, 0.3}) {
    const ProblemSpec spec = cs_spec(ratio);
    const double gs = mean(run_method(ctx.net, images, spec, ctx.refs, gs_config(c)).psnr);
    const double nogs = mean(run_method(ctx.net, images, spec, ctx.refs, nogs_config()).psnr);
    const double lasso = mean(run_lasso(images, ctx.net.image_shape(), spec, ctx.refs));
    const bool cell = gs >= nogs && (ratio > 0.25 || gs >= lasso);
    ok = ok && cell;
    detail += fmt("m/n %.1f GS %.2f NoGS %.2f Lasso %.2f%s; ", ratio, gs, nogs, lasso, cell ? "" : " (x)");
  }
  const double secs = seconds_since(t0);
  report(5, "CS ordering", ok && secs < kCsSeconds, detail + fmt("50 test faces, c=%zu, %.0f s", c, secs));
}

void out_of_distribution(Context& ctx) {
  const std::size_t c = choose_cut(ctx);
  const auto scenes = first(ctx.data.images(Family::Scenes, Split::Test), 50);
  const double gs = mean(run_method(ctx.net, scenes, cs_spec(0.2), ctx.refs, gs_config(c)).psnr);
  const double nogs = mean(run_method(ctx.net, scenes, cs_spec(0.2), ctx.refs, nogs_config()).psnr);
  report(6, "out-of-distribution direction", gs >= nogs,
         fmt("50 scenes, m/n 0.2: GS(c=%zu) %.2f dB, NoGS %.2f dB", c, gs, nogs));
}

void trained_weights(Context& ctx) {
  const std::size_t c = choose_cut(ctx);
  const auto images = first(ctx.data.images(Family::Faces, Split::Test), 50);
  const StudyReport rep = untrained_weights_study(ctx.net, c, images, cs_spec(0.2), gs_config(c), 12345);
  const double trained = rep.aggregate("trained").psnr.mean, random = rep.aggregate("random").psnr.mean;
  report(7, "trained-weights effect", trained - random >= kTrainedGainDb,
         fmt("50 test faces, m/n 0.2, c=%zu: trained %.2f dB, random %.2f dB, gain %.2f dB", c, trained, random,
             trained - random));
}

void compute_budget(Context& ctx) {
  const std::size_t c = choose_cut(ctx);
  const auto images = first(ctx.data.images(Family::Faces, Split::Test), 20);
  const StudyReport rep = compute_budget_study(ctx.net, c, images, cs_spec(0.2), nogs_config(), gs_config(c), {6, 4});
  const double uncut = rep.aggregate("uncut").psnr.mean, more = rep.aggregate("uncut_more").psnr.mean;
  const double gs = rep.aggregate("gs").psnr.mean;
  report(8, "budget study", more - uncut < gs - uncut,
         fmt("20 test faces, m/n 0.2: uncut %.2f, uncut(6R,4T) %.2f (+%.2f), GS(c=%zu) %.2f (gap %.2f) dB", uncut, more,
             more - uncut, c, gs, gs - uncut));
}

void lasso_correctness() {
  bool ok = true;
  std::string detail;
  // Identity operator: ½-scaled soft threshold of the DCT coefficients.
  {
    const Shape shape{1, 8, 8};
    const auto op = MeasurementOperator::identity(shape);
    const DctBasis dct(shape);
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (double lambda : {0.0, 0.05, 0.3, 1.0}) {
      const Tensor y = gs::testing::random_tensor(shape, rng);
      const LassoSolution s = lasso_dct_solve(op, y, {.lambda = lambda});
      worst = std::max(worst, max_abs_diff(s.coefficients.data(), soft_threshold(dct.dct2(y), lambda / 2).data()));
    }
    ok = ok && worst < kProxTol;
    detail += fmt("prox max err %.1e; ", worst);
  }
  // Brute force over all supports of size <= 2 (n = 16).
  {
    const Shape shape{1, 4, 4};
    const DctBasis dct(shape);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> pick(0, 15);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    int exact = 0;
    double worst = 0.0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
      const auto op = MeasurementOperator::gaussian(shape, 12, 100 + trial);
      std::vector<Tensor> B;
      for (std::size_t i = 0; i < 16; ++i) {
        Tensor e(shape);
        e[i] = 1.0;
        B.push_back(op.apply(dct.idct2(e)));
      }
      Tensor z(shape);
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      while (b == a) b = pick(rng);
      z[a] = mag(rng);
      z[b] = -mag(rng);
      const Tensor y = op.apply(dct.idct2(z));

      std::set<std::size_t> best_support;
      std::vector<double> best_coef;
      double best_res = dot(y.data(), y.data());
      auto consider = [&](std::vector<std::size_t> s, std::vector<double> cf) {
        Tensor r = y;
        for (std::size_t k = 0; k < s.size(); ++k)
          for (std::size_t i = 0; i < r.size(); ++i) r[i] -= cf[k] * B[s[k]][i];
        if (const double res = dot(r.data(), r.data()); res < best_res) {
          best_res = res;
          best_support = {s.begin(), s.end()};
          best_coef = cf;
          if (s.size() == 2 && s[0] > s[1]) std::swap(best_coef[0], best_coef[1]);
        }
      };
      for (std::size_t i = 0; i < 16; ++i) {
        const double ii = dot(B[i].data(), B[i].data()), iy = dot(B[i].data(), y.data());
        consider({i}, {iy / ii});
        for (std::size_t j = i + 1; j < 16; ++j) {
          const double jj = dot(B[j].data(), B[j].data()), ij = dot(B[i].data(), B[j].data());
          const double jy = dot(B[j].data(), y.data()), det = ii * jj - ij * ij;
          if (std::abs(det) > 1e-12) consider({i, j}, {(jj * iy - ij * jy) / det, (ii * jy - ij * iy) / det});
        }
      }
      const LassoSolution s = lasso_dct_solve(op, y, {.lambda = 1e-4, .max_iters = 200000, .tol = 1e-15, .fista = true});
      std::set<std::size_t> support;
      for (std::size_t i = 0; i < 16; ++i)
        if (std::abs(s.coefficients[i]) > kCoefTol) support.insert(i);
      if (support == best_support) {
        ++exact;
        std::size_t k = 0;
        for (std::size_t i : support) worst = std::max(worst, std::abs(s.coefficients[i] - best_coef[k++]));
      }
    }
    ok = ok && exact == trials && worst < kCoefTol;
    detail += fmt("brute force %d/%d supports exact, coef err %.1e; ", exact, trials, worst);
  }
  // ISTA objective monotone for every operator kind.
  {
    int runs = 0, monotone = 0;
    for (OperatorKind kind : {OperatorKind::Gaussian, OperatorKind::Inpainting, OperatorKind::SuperRes,
                              OperatorKind::Identity}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Shape shape{1, 16, 16};
        const auto op = MeasurementOperator::make({.kind = kind, .ratio = 0.3, .factor = 2, .seed = seed}, shape);
        std::mt19937_64 rng(seed);
        const LassoSolution s =
            lasso_dct_solve(op, op.apply(gs::testing::random_tensor(shape, rng)), {.lambda = 0.01, .max_iters = 500});
        ++runs;
        bool mono = true;
        for (std::size_t i = 1; i < s.objectives.size(); ++i) mono = mono && s.objectives[i] <= s.objectives[i - 1] * (1 + kMonotoneSlack);
        monotone += mono;
      }
    }
    ok = ok && monotone == runs;
    detail += fmt("ISTA monotone %d/%d runs", monotone, runs);
  }
  report(9, "Lasso-DCT correctness", ok, detail);
}

void noise_model(const Context& ctx) {
  bool exact = true;
  for (std::size_t m : {1u, 10u, 100u, 410u, 4096u}) {
    const auto op = MeasurementOperator::gaussian({1, 64, 64}, m, 1);
    exact = exact && noise_sigma(op, {}).sigma == 0.1 / std::sqrt(static_cast<double>(m));
  }
  // Monte Carlo E[‖η‖² / ‖Ax‖²] at 64px and 32px, m/n = 0.1, 1000 draws each.
  const Dataset big = generate_synthetic_dataset(SyntheticSpec{.faces = 1000, .size = 64, .seed = 7});
  auto ratio_at = [](const std::vector<Tensor>& refs, std::size_t side, std::span<const Tensor> calib) {
    const std::size_t n = side * side, m = n / 10;
    const auto op = MeasurementOperator::gaussian({1, side, side}, m, 11);
    const double sigma = noise_sigma(op, calib).sigma;
    double acc = 0.0;
    for (std::size_t d = 0; d < 1000; ++d) {
      const Tensor& x = refs[d % refs.size()];
      const Tensor clean = op.apply(x);
      const Measurement meas = measure(x, op, sigma, 5000 + d);
      double noise = 0.0;
      for (std::size_t i = 0; i < m; ++i) noise += (meas.y[i] - clean[i]) * (meas.y[i] - clean[i]);
      acc += noise / dot(clean.data(), clean.data());
    }
    return acc / 1000.0;
  };
  const auto faces64 = big.images(Family::Faces, Split::Train);
  const double r64 = ratio_at(faces64, 64, {});
  const double r32 = ratio_at(ctx.refs, 32, ctx.refs);
  const double rel = std::abs(r32 - r64) / r64;
  report(10, "noise model", exact && rel < kNoiseRatioTol,
         fmt("sigma = 0.1/sqrt(m) at 64px %s; E[|eta|^2/|Ax|^2] 64px %.3e, 32px %.3e, rel diff %.1f%%",
             exact ? "exact" : "NOT exact", r64, r32, 100 * rel));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(const fs::path& weights) {
  const fs::path root = fs::temp_directory_path() / "gs_acceptance_replay";
  fs::remove_all(root);
  auto run = [](const std::string& args) {
    const int st = std::system((std::string(GSURGERY_EXE) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  const std::string common = " --weights " + weights.string() + " --count 3 --set workers=2";
  struct Cmd {
    std::string name, args;
  };
  const std::vector<Cmd> cmds = {
      {"sweep", "sweep --ratios 0.1 0.3 --set iagan.stage1.steps=30 --set iagan.stage2.steps=10" + common},
      {"recover", "recover --op inpainting --ratios 0.3" + common},
      {"cutsearch", "cutsearch --set dataset.validation=3" + common},
  };
  int same = 0;
  std::string detail;
  for (const Cmd& c : cmds) {
    const fs::path a = root / (c.name + "_a"), b = root / (c.name + "_b");
    bool ok = run(c.args + " -o " + a.string()) == 0 && run("run " + (a / "config.json").string() + " -o " + b.string()) == 0;
    std::size_t files = 0;
    if (ok) {
      for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file() || e.path().extension() == ".log") continue;
        const fs::path rel = fs::relative(e.path(), a);
        if (rel == "config.json") continue;  // differs only in `output`
        ++files;
        ok = ok && fs::exists(b / rel) && slurp(e.path()) == slurp(b / rel);
      }
    }
    same += ok;
    detail += fmt("%s %s (%zu files); ", c.name.c_str(), ok ? "identical" : "DIFFERS", files);
  }
  fs::remove_all(root);
  report(11, "determinism", same == static_cast<int>(cmds.size()), detail + "replayed from config.json");
}

void restart_monotonicity(const Context& ctx) {
  const auto images = first(ctx.data.images(Family::Faces, Split::Test), 5);
  const ProblemSpec spec = cs_spec(0.2);
  const Problem prob = make_problem(spec, ctx.net.image_shape(), ctx.refs);
  int violations = 0, sequences = 0;
  for (std::size_t c : {std::size_t{0}, std::size_t{1}}) {
    RecoveryConfig cfg = c == 0 ? nogs_config() : gs_config(c);
    cfg.steps = c == 0 ? 100 : 50;
    cfg.init = {InitKind::CensoredNormal};
    for (std::size_t i = 0; i < images.size(); ++i) {
      const Measurement meas = measure_for(prob, spec, images[i], i);
      double prev = INFINITY;
      for (std::size_t R = 1; R <= 6; ++R) {
        cfg.restarts = R;
        const double loss = recover(cut(ctx.net, c), prob.op, meas, cfg).loss;
        violations += loss > prev;
        prev = loss;
      }
      ++sequences;
    }
  }
  report(12, "restart monotonicity", violations == 0,
         fmt("%d sequences R=1..6 (c in {0,1}), %d increases", sequences, violations));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  fs::path cache = fs::current_path();
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (a == "--cache" && i + 1 < argc) {
      cache = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only 1,5,...] [--cache DIR]\n");
      return 2;
    }
  }
  auto want = [&](int id) { return only.empty() || only.contains(id); };
  auto needs_net = [&] {
    for (int id : {3, 4, 5, 6, 7, 8, 10, 11, 12})
      if (want(id)) return true;
    return false;
  };

  const auto t0 = Clock::now();
  if (want(1)) gradient_integrity();
  if (want(2)) composition_identity();
  if (want(9)) lasso_correctness();
  if (needs_net()) {
    Dataset data = make_data();
    GeneratorNet net = trained_net(data, cache);
    Context ctx{std::move(data), std::move(net), {}};
    ctx.refs = first(ctx.data.images(Family::Faces, Split::Train), 100);
    if (want(10)) noise_model(ctx);
    if (want(11)) {
      const RunConfig d = run_config_from_json(nlohmann::json::object());
      determinism(cache / fmt("acceptance-vae-mini-e%zu-b%g-s%llu.gsw", d.train.epochs, d.train.beta,
                              static_cast<unsigned long long>(d.train.seed)));
    }
    if (want(12)) restart_monotonicity(ctx);
    if (want(3)) optimization_error(ctx);
    if (want(4)) representation_error(ctx);
    if (want(5)) cs_ordering(ctx);
    if (want(6)) out_of_distribution(ctx);
    if (want(7)) trained_weights(ctx);
    if (want(8)) compute_budget(ctx);
  }
  std::printf("# %d failing, %.0f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
