#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gs/metrics.hpp"
#include "gs/recovery.hpp"
#include "support.hpp"

using namespace gs;
using gs::testing::random_tensor;

namespace {

// x = W z + b on a 1×2×4 image; no activation, so recovery is linear least squares.
GeneratorNet linear_net(std::mt19937_64& rng) {
  Block b{{3}, {}, {layer::Dense{3, 8, 0, 1}, layer::Reshape{{1, 2, 4}}}, {1, 2, 4}};
  return GeneratorNet("linear", 3, {b}, {random_tensor({8, 3}, rng), random_tensor({8}, rng)});
}

// Dense 4→4 with every weight equal to `w`, then tanh; overflows once |Σz|·w exceeds DBL_MAX.
GeneratorNet fragile_net(double w) {
  Block b{{4}, {}, {layer::Dense{4, 4, 0, 1}, layer::Reshape{{1, 2, 2}}, layer::Act{Activation::Tanh}}, {1, 2, 2}};
  return GeneratorNet("fragile", 4, {b}, {Tensor({4, 4}, w), Tensor({4})});
}

// Solves the 3×3 system M v = r by Gaussian elimination with partial pivoting.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> M, std::array<double, 3> r) {
  for (int c = 0; c < 3; ++c) {
    int p = c;
    for (int i = c + 1; i < 3; ++i)
      if (std::abs(M[i][c]) > std::abs(M[p][c])) p = i;
    std::swap(M[c], M[p]);
    std::swap(r[c], r[p]);
    for (int i = c + 1; i < 3; ++i) {
      const double f = M[i][c] / M[c][c];
      for (int j = c; j < 3; ++j) M[i][j] -= f * M[c][j];
      r[i] -= f * r[c];
    }
  }
  std::array<double, 3> v{};
  for (int i = 2; i >= 0; --i) {
    double s = r[i];
    for (int j = i + 1; j < 3; ++j) s -= M[i][j] * v[j];
    v[i] = s / M[i][i];
  }
  return v;
}

RecoveryConfig quick(std::size_t cut, std::size_t restarts, std::uint64_t seed = 1) {
  RecoveryConfig cfg;
  cfg.cut = cut;
  cfg.restarts = restarts;
  cfg.steps = 30;
  cfg.lr = 0.05;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("derive_seed separates streams and is stable") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("init strategies") {
  SUBCASE("zero") {
    const Tensor z = init_latent({InitKind::Zero}, 50, 3);
    CHECK(std::all_of(z.data().begin(), z.data().end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("censored normal: range and mass at the bounds is 2 Phi(-1)") {
    const Tensor z = init_latent({InitKind::CensoredNormal}, 100000, 5);
    std::size_t at_bound = 0, outside = 0;
    for (double v : z.data()) {
      outside += std::abs(v) > 1.0;
      at_bound += std::abs(v) == 1.0;
    }
    CHECK(outside == 0);
    const double expected = std::erfc(1.0 / std::sqrt(2.0));  // 2Φ(−1) ≈ 0.3173
    CHECK(static_cast<double>(at_bound) / 1e5 == doctest::Approx(expected).epsilon(0.03));
  }
  SUBCASE("normal sigma scales the draw") {
    const Tensor a = init_latent({InitKind::Normal, 1.0}, 20, 7);
    const Tensor b = init_latent({InitKind::Normal, 2.5}, 20, 7);
    for (std::size_t i = 0; i < 20; ++i) CHECK(b[i] == doctest::Approx(2.5 * a[i]));
  }
  SUBCASE("seeded") {
    CHECK(init_latent({}, 10, 1) == init_latent({}, 10, 1));
    CHECK(init_latent({}, 10, 1) != init_latent({}, 10, 2));
  }
  SUBCASE("lasso_init needs a baseline image") {
    CHECK_THROWS(init_latent({InitKind::LassoInit}, 10, 1));
  }
  SUBCASE("names round-trip") {
    for (const char* s : {"zero", "censored_normal", "lasso_init", "normal:0.5"}) CHECK(init_name(parse_init(s)) == s);
    CHECK_THROWS(parse_init("uniform"));
  }
}

TEST_CASE("objective vanishes at the generating latent") {
  const GeneratorNet net = make_recipe(kVaeMini, 3);
  std::mt19937_64 rng(1);
  const Tensor z0 = random_tensor({32}, rng);
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 300, 2);
  const Measurement meas = measure(net.forward(z0), op, 0.0, 0);
  for (std::size_t c = 0; c < net.depth(); ++c) {
    const CutGenerator gc(net, c);
    const Tensor zc = net.lift(z0, c);
    std::vector<double> g(zc.size());
    CHECK(measurement_objective(gc, op, meas.y)(zc.data(), g) < 1e-10);
  }
}

TEST_CASE("objective gradient matches central differences") {
  const GeneratorNet net = make_recipe(kBeganMini, 4);
  std::mt19937_64 rng(2);
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 100, 3);
  const Tensor y = random_tensor({100}, rng);
  for (std::size_t c : {0u, 2u}) {
    const CutGenerator gc(net, c);
    const Objective f = measurement_objective(gc, op, y);
    Tensor z = random_tensor({gc.input_dim()}, rng);
    std::vector<double> g(z.size()), scratch(z.size());
    f(z.data(), g);
    std::uniform_int_distribution<std::size_t> pick(0, z.size() - 1);
    for (int t = 0; t < 20; ++t) {
      const std::size_t i = pick(rng);
      const double orig = z[i], h = 1e-5;
      z[i] = orig + h;
      const double up = f(z.data(), scratch);
      z[i] = orig - h;
      const double down = f(z.data(), scratch);
      z[i] = orig;
      CHECK(g[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1e-3));
    }
  }
}

TEST_CASE("linear generator: optimiser reaches the pseudo-inverse solution") {
  std::mt19937_64 rng(3);
  const GeneratorNet net = linear_net(rng);
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 6, 4);
  const Tensor y = random_tensor({6}, rng);  // not in the range: residual stays non-zero

  // Oracle: z* = (BᵀB)⁻¹Bᵀ(y − A b) with B = A W.
  const Tensor& W = net.params()[0];
  std::vector<Tensor> B;
  for (std::size_t j = 0; j < 3; ++j) {
    Tensor col({1, 2, 4});
    for (std::size_t i = 0; i < 8; ++i) col[i] = W[i * 3 + j];
    B.push_back(op.apply(col));
  }
  const Tensor ab = op.apply(net.params()[1].reshaped({1, 2, 4}));
  Tensor r = y;
  for (std::size_t i = 0; i < 6; ++i) r[i] -= ab[i];
  std::array<std::array<double, 3>, 3> M{};
  std::array<double, 3> rhs{};
  for (std::size_t a = 0; a < 3; ++a) {
    rhs[a] = dot(B[a].data(), r.data());
    for (std::size_t b = 0; b < 3; ++b) M[a][b] = dot(B[a].data(), B[b].data());
  }
  const auto zstar = solve3(M, rhs);

  RecoveryConfig cfg;
  cfg.restarts = 2;
  cfg.steps = 300;
  cfg.lr = 1.0;
  cfg.optimizer = OptimizerKind::Lbfgs;
  const RecoveryResult res = recover(CutGenerator(net, 0), op, Measurement{y, 0.0, 0}, cfg);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(res.latent[j] - zstar[j]) < 1e-6);
}

TEST_CASE("best-of-R keeps the lowest final loss and is monotone in R") {
  const GeneratorNet net = make_recipe(kDcganMini, 5);
  std::mt19937_64 rng(4);
  const Tensor truth = net.forward(random_tensor({32}, rng));
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 200, 6);
  const Measurement meas = measure(truth, op, 0.0, 0);
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t R = 1; R <= 5; ++R) {
    const RecoveryResult res = recover(CutGenerator(net, 1), op, meas, quick(1, R));
    REQUIRE(res.restarts.size() == R);
    for (const RestartRecord& rec : res.restarts) CHECK(res.loss <= rec.final_loss());
    CHECK(res.loss == res.restarts[res.best_restart].final_loss());
    CHECK(res.loss <= previous);
    previous = res.loss;
    for (std::size_t r = 0; r < R; ++r) CHECK(res.restarts[r].seed == derive_seed(1, r));
    CHECK(res.restarts.front().losses.size() == 31);
  }
}

TEST_CASE("recovery is deterministic and reports PSNR against the truth") {
  const GeneratorNet net = make_recipe(kVaeMini, 6);
  std::mt19937_64 rng(5);
  const Tensor truth = net.forward(random_tensor({32}, rng));
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 200, 7);
  const Measurement meas = measure(truth, op, 0.01, 3);
  const RecoveryResult a = recover(CutGenerator(net, 2), op, meas, quick(2, 2), &truth);
  const RecoveryResult b = recover(CutGenerator(net, 2), op, meas, quick(2, 2), &truth);
  CHECK(a.image == b.image);
  CHECK(a.loss == b.loss);
  REQUIRE(a.psnr.has_value());
  CHECK(*a.psnr == doctest::Approx(psnr(truth, a.image)));
  CHECK(a.image == CutGenerator(net, 2).forward(a.latent));
}

TEST_CASE("recovery input checks") {
  const GeneratorNet net = make_recipe(kVaeMini, 6);
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 20, 7);
  const Measurement meas{Tensor({20}), 0.0, 0};
  CHECK_THROWS(recover(CutGenerator(net, 1), op, meas, quick(2, 1)));  // cut mismatch
  CHECK_THROWS(recover(CutGenerator(net, 1), op, meas, quick(1, 0)));  // no restarts
  const Measurement wrong{Tensor({21}), 0.0, 0};
  CHECK_THROWS_AS(recover(CutGenerator(net, 1), op, wrong, quick(1, 1)), ShapeError);
}

TEST_CASE("norm cap keeps the latent inside the ball") {
  const GeneratorNet net = make_recipe(kVaeMini, 7);
  std::mt19937_64 rng(6);
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 100, 1);
  const Measurement meas = measure(net.forward(random_tensor({32}, rng, -3, 3)), op, 0.0, 0);
  RecoveryConfig cfg = quick(0, 2);
  cfg.norm_cap = 0.5;
  const RecoveryResult res = recover(CutGenerator(net, 0), op, meas, cfg);
  CHECK(l2_norm(res.latent.data()) <= 0.5 + 1e-12);
}

TEST_CASE("failed restarts are excluded; all failing is an error") {
  const auto op = MeasurementOperator::identity({1, 2, 2});
  const Measurement meas{Tensor({4}, 0.5), 0.0, 0};
  RecoveryConfig cfg;
  cfg.restarts = 12;
  cfg.steps = 3;
  cfg.lr = 1e-3;
  cfg.init = {InitKind::Normal, 10.0};
  SUBCASE("some restarts overflow") {
    const GeneratorNet net = fragile_net(1e307);
    const RecoveryResult res = recover(CutGenerator(net, 0), op, meas, cfg);
    const auto failed = std::count_if(res.restarts.begin(), res.restarts.end(), [](auto& r) { return r.failed; });
    CHECK(failed > 0);
    CHECK(failed < 12);
    CHECK(std::isfinite(res.loss));
    CHECK_FALSE(res.restarts[res.best_restart].failed);
    for (const RestartRecord& r : res.restarts)
      if (r.failed) CHECK_FALSE(r.failure.empty());
  }
  SUBCASE("every restart overflows") {
    const GeneratorNet net = fragile_net(1e308);
    cfg.init = {InitKind::Normal, 1e6};
    CHECK_THROWS_WITH_AS(recover(CutGenerator(net, 0), op, meas, cfg), doctest::Contains("restarts failed"),
                         RecoveryError);
  }
}

TEST_CASE("lasso_init lifts an uncut fit") {
  const GeneratorNet net = make_recipe(kVaeMini, 8);
  std::mt19937_64 rng(7);
  const Tensor image = net.forward(random_tensor({32}, rng));
  RecoveryConfig cfg = quick(0, 1);
  cfg.init = {InitKind::LassoInit};
  const Tensor z0 = init_latent(cfg.init, CutGenerator(net, 0), image, cfg, 11);
  CHECK(z0.size() == 32);
  for (std::size_t c = 1; c < net.depth(); ++c) {
    cfg.cut = c;
    const CutGenerator gc(net, c);
    const Tensor zc = init_latent(cfg.init, gc, image, cfg, 11);
    REQUIRE(zc.size() == gc.input_dim());
    CHECK(max_abs_diff(gc.forward(zc).data(), net.forward(z0).data()) < 1e-9);
  }
  // The whole recovery runs with it too.
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 300, 2);
  cfg.cut = 1;
  const RecoveryResult res = recover(CutGenerator(net, 1), op, measure(image, op, 0.0, 0), cfg, &image);
  CHECK(res.image.all_finite());
}

TEST_CASE("uncut recovery of an in-range image with A = I") {
  const GeneratorNet net = make_recipe(kVaeMini, 9);
  std::mt19937_64 rng(8);
  const Tensor truth = net.forward(random_tensor({32}, rng));
  RecoveryConfig cfg;
  cfg.restarts = 3;
  cfg.steps = 300;
  cfg.lr = 0.05;
  const auto op = MeasurementOperator::identity(net.image_shape());
  const RecoveryResult res = recover_uncut(net, op, measure(truth, op, 0.0, 0), cfg, &truth);
  CHECK(*res.psnr > 30.0);
}

TEST_CASE("IAGAN refinement") {
  const GeneratorNet net = make_recipe(kVaeMini, 10);
  std::mt19937_64 rng(9);
  const Tensor truth = random_tensor(net.image_shape(), rng, -0.5, 0.5);  // off the range
  const auto op = MeasurementOperator::gaussian(net.image_shape(), 300, 3);
  const Measurement meas = measure(truth, op, 0.0, 0);
  IaganConfig cfg;
  cfg.stage1 = {0.05, 0.0, 40};
  cfg.stage2 = {1e-3, 1e-3, 30};
  cfg.restarts = 2;
  const std::uint64_t before = net.weight_checksum();

  SUBCASE("stage 2 with zero steps is the uncut recovery") {
    cfg.stage2.steps = 0;
    const IaganResult res = iagan_refine(net, op, meas, cfg);
    RecoveryConfig uncut;
    uncut.restarts = 2;
    uncut.steps = 40;
    uncut.lr = 0.05;
    uncut.init = cfg.init;
    const RecoveryResult base = recover_uncut(net, op, meas, uncut);
    CHECK(res.result.image == base.image);
    CHECK(res.stage2_loss == res.stage1_loss);
  }
  SUBCASE("stage 2 never increases the loss and leaves the caller's weights alone") {
    const IaganResult res = iagan_refine(net, op, meas, cfg, &truth);
    CHECK(res.stage2_loss <= res.stage1_loss);
    CHECK(res.accepted_steps > 0);
    CHECK(net.weight_checksum() == before);
    CHECK(res.result.psnr.has_value());
    // Every weight is tunable in stage 2: far more parameters than pixels.
    CHECK(overparam_ratio(net.latent_dim() + net.weight_count(), net.output_dim()) > 10.0);
  }
}

TEST_CASE("cut search") {
  const GeneratorNet net = make_recipe(kVaeMini, 11);
  const auto images = net.sample(3, 4);
  ProblemSpec spec;
  spec.op = {OperatorKind::Gaussian, 0.2, 2, 5};
  spec.noisy = false;
  SUBCASE("single candidate") {
    const CutSearchResult r = select_cut_index(net, images, spec, quick(0, 1), {2});
    CHECK(r.best_cut == 2);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].psnrs.size() == 3);
    CHECK(r.rows[0].input_dim == net.input_dim(2));
  }
  SUBCASE("best is the argmax of the rows") {
    const CutSearchResult r = select_cut_index(net, images, spec, quick(0, 1), {0, 1, 2, 3});
    REQUIRE(r.rows.size() == 4);
    const auto best = std::max_element(r.rows.begin(), r.rows.end(),
                                       [](auto& a, auto& b) { return a.mean_psnr < b.mean_psnr; });
    CHECK(r.best_cut == best->cut);
  }
  SUBCASE("bad candidates") {
    CHECK_THROWS(select_cut_index(net, images, spec, quick(0, 1), {}));
    CHECK_THROWS(select_cut_index(net, images, spec, quick(0, 1), {4}));
    CHECK_THROWS(select_cut_index(net, {}, spec, quick(0, 1), {1}));
  }
}
