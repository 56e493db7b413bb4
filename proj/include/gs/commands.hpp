#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gs/dataset.hpp"
#include "gs/generator.hpp"
#include "gs/metrics.hpp"
#include "gs/run_config.hpp"

namespace gs {

/// Weights from cfg.weights (checked against cfg.recipe) or a fresh recipe seeded by cfg.weight_seed.
GeneratorNet load_generator(const RunConfig& cfg);
/// The synthetic dataset or the PNG folder (folder images split 80/10/10 in name order).
Dataset load_dataset(const RunConfig& cfg);
/// Noise-calibration references: up to 100 training images of the in-distribution family.
std::vector<Tensor> noise_references(const Dataset& ds);

struct Targets {
  std::vector<std::string> ids;
  std::vector<Tensor> images;
};
/// cfg.dataset.count images of cfg.dataset.family / split ("generated" samples the net instead).
Targets load_targets(const RunConfig& cfg, const Dataset& ds, const GeneratorNet& net);

/// Each command writes config.json (the resolved config) plus its artifacts into
/// `out` and returns a process exit code. Progress goes to `log`.
int cmd_dataset(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_train(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_recover(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_cutsearch(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_study(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Dispatches on cfg.command into resolve_output_dir(cfg).
int run_command(const RunConfig& cfg, std::ostream& log);

inline constexpr const char* kResultsHeader = "image_id,method,c,m_over_n,seed,psnr_db,final_loss,wall_ms";

}  // namespace gs
