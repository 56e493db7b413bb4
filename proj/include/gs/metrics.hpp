#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gs/generator.hpp"
#include "gs/recovery.hpp"
#include "gs/tensor.hpp"

namespace gs {

/// Aggregates and CSV rows replace +∞ (exact match) with this value.
inline constexpr double kPsnrCap = 100.0;

/// 10·log10(peak² / MSE). Returns +∞ when the images are identical.
/// The default peak suits images in [-1, 1].
double psnr(const Tensor& x, const Tensor& estimate, double peak = 2.0);
inline double cap_psnr(double db) { return db < kPsnrCap ? db : kPsnrCap; }

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n − 1); 0 for a single value
  std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

/// Runs fn(0..n-1) on up to `workers` threads. Each index is handled exactly
/// once; callers write results into slot i so output order never depends on scheduling.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

struct StudyRecord {
  std::string target_id;
  std::string method;
  std::size_t cut;
  double psnr;  // capped
  double loss;
  std::vector<double> restart_losses;  // final loss per restart, in seed order
};

struct StudyAggregate {
  std::string method;
  Summary psnr;
};

struct StudyReport {
  std::string study;
  std::vector<StudyRecord> records;
  std::vector<StudyAggregate> aggregates;  // per method, in first-seen order
  nlohmann::ordered_json config;
  std::size_t optimizer_runs = 0;  // restarts × images, summed over cells

  const StudyAggregate& aggregate(const std::string& method) const;
};

/// Groups records by method (first-seen order) and summarises their PSNR.
std::vector<StudyAggregate> aggregate_records(const std::vector<StudyRecord>& records);

/// CSV (target_id, method, cut, psnr_db, final_loss) plus a JSON sidecar
/// holding the config echo and the aggregates (std dev labelled as such).
void write_report(const StudyReport& report, const std::filesystem::path& csv_path);

/// Representation-error isolation: A = I, σ = 0; cells {uncut, cut} × {train, generated}.
StudyReport representation_error_study(const GeneratorNet& net, std::size_t cut, const std::vector<Tensor>& train,
                                       const std::vector<Tensor>& generated, const RecoveryConfig& uncut_cfg,
                                       const RecoveryConfig& cut_cfg, std::size_t workers = 1);

/// Cut recovery with trained weights vs freshly initialised weights of the same recipe.
StudyReport untrained_weights_study(const GeneratorNet& trained, std::size_t cut, const std::vector<Tensor>& images,
                                    const ProblemSpec& problem, const RecoveryConfig& cfg, std::uint64_t weight_seed,
                                    std::size_t workers = 1);

struct BudgetMultipliers {
  std::size_t restarts = 6;
  std::size_t steps = 4;
};

/// Uncut recovery at (R,T) and at (a·R, b·T), and cut recovery at (R,T).
/// Methods: "uncut", "uncut_more", "gs".
StudyReport compute_budget_study(const GeneratorNet& net, std::size_t cut, const std::vector<Tensor>& images,
                                 const ProblemSpec& problem, const RecoveryConfig& uncut_cfg,
                                 const RecoveryConfig& cut_cfg, BudgetMultipliers multipliers = {},
                                 std::size_t workers = 1);

}  // namespace gs
