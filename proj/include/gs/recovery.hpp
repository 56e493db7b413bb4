#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gs/generator.hpp"
#include "gs/optim.hpp"
#include "gs/sensing.hpp"

namespace gs {

class RecoveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InitKind { Zero, CensoredNormal, Normal, LassoInit };

struct InitStrategy {
  InitKind kind = InitKind::CensoredNormal;
  double sigma = 1.0;  // Normal only
};

/// "zero", "censored_normal", "normal:<sigma>", "lasso_init".
InitStrategy parse_init(std::string_view text);
std::string init_name(const InitStrategy& init);

struct RecoveryConfig {
  std::size_t cut = 0;
  std::size_t restarts = 3;
  std::size_t steps = 100;
  double lr = 0.1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  InitStrategy init;
  std::uint64_t seed = 0;
  /// Project z onto {‖z‖ ≤ cap} after every step when set.
  std::optional<double> norm_cap;

  void validate() const;
};

/// splitmix64-mixed child seed; restart r of a run with seed s uses derive_seed(s, r).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct RestartRecord {
  std::uint64_t seed;
  std::vector<double> losses;  // loss at every iterate, last entry final
  bool failed = false;
  std::string failure;

  double final_loss() const { return losses.back(); }
};

struct RecoveryResult {
  Tensor image;   // x̂ = G_c(ẑ), [C,H,W]
  Tensor latent;  // ẑ, [k_c]
  double loss;    // L_min
  std::size_t best_restart;
  std::vector<RestartRecord> restarts;
  std::optional<double> psnr;
  double wall_ms = 0.0;
  RecoveryConfig config;
};

/// Latent start for zero / censored-normal / normal strategies.
/// Throws for lasso_init, which needs a baseline image (see below).
Tensor init_latent(const InitStrategy& init, std::size_t dims, std::uint64_t seed);
/// lasso_init: fit z₀ on the uncut net to `lasso_image` for steps/2 iterations
/// (A = I, from a censored-normal start), then lift to the cut.
Tensor init_latent(const InitStrategy& init, const CutGenerator& gc, const Tensor& lasso_image,
                   const RecoveryConfig& cfg, std::uint64_t seed);

/// ‖y − A·G_c(z)‖ and its gradient in z.
Objective measurement_objective(const CutGenerator& gc, const MeasurementOperator& op, const Tensor& y);

/// Best-of-R latent optimisation of ‖y − A·G_c(z)‖. Restarts whose loss turns
/// non-finite are marked failed and skipped; ties go to the lowest restart.
/// If `truth` is given, the result carries PSNR against it.
RecoveryResult recover(const CutGenerator& gc, const MeasurementOperator& op, const Measurement& meas,
                       const RecoveryConfig& cfg, const Tensor* truth = nullptr);

/// The uncut baseline: recover on cut(net, 0).
RecoveryResult recover_uncut(const GeneratorNet& net, const MeasurementOperator& op, const Measurement& meas,
                             RecoveryConfig cfg, const Tensor* truth = nullptr);

struct IaganStage {
  double lr_z;
  double lr_theta;
  std::size_t steps;
};

struct IaganConfig {
  IaganStage stage1{0.1, 0.0, 1600};
  IaganStage stage2{1e-4, 1e-4, 600};
  std::size_t restarts = 3;
  InitStrategy init;
  std::uint64_t seed = 0;
};

struct IaganResult {
  RecoveryResult result;  // restarts are the stage-1 runs; image/loss come from stage 2
  double stage1_loss;
  double stage2_loss;
  std::size_t accepted_steps;
};

/// Stage 1 optimises z on the uncut net; stage 2 jointly optimises z and a
/// private copy of the weights with Adam, accepting a step only if the loss
/// does not increase (a rejected step halves the stage-2 rates).
IaganResult iagan_refine(const GeneratorNet& net, const MeasurementOperator& op, const Measurement& meas,
                         const IaganConfig& cfg, const Tensor* truth = nullptr);

/// A recovery problem family: how to build A and whether to add noise.
struct ProblemSpec {
  OperatorSpec op;
  bool noisy = true;
  NoiseRule noise;
  std::uint64_t noise_seed = 0;
};

struct Problem {
  MeasurementOperator op;
  double sigma;
};

/// One operator per spec; σ calibrated on `references` (σ = 0 when not noisy).
Problem make_problem(const ProblemSpec& spec, const Shape& image, std::span<const Tensor> references);
/// Measurement of image `index` with noise seed derive_seed(noise_seed, index).
Measurement measure_for(const Problem& problem, const ProblemSpec& spec, const Tensor& x, std::size_t index);

struct CutSearchRow {
  std::size_t cut;
  std::size_t input_dim;
  double mean_psnr;
  double std_psnr;
  std::vector<double> psnrs;
};

struct CutSearchResult {
  std::size_t best_cut;
  std::vector<CutSearchRow> rows;
};

/// Mean PSNR per candidate cut over the validation images; argmax with ties
/// broken toward the smaller cut.
CutSearchResult select_cut_index(const GeneratorNet& net, const std::vector<Tensor>& validation,
                                 const ProblemSpec& problem, const RecoveryConfig& cfg_template,
                                 const std::vector<std::size_t>& candidates);

}  // namespace gs
