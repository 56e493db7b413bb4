#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gs/lasso_dct.hpp"
#include "gs/recovery.hpp"
#include "gs/training.hpp"

namespace gs {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to the same double; "inf"/"-inf"/"nan" otherwise.
std::string format_double(double v);

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "folder"
  std::string folder;                // PNG directory when source = folder
  std::size_t faces = 2000;
  std::size_t scenes = 100;
  std::size_t size = 32;
  std::uint64_t seed = 0;
  std::string family = "faces";  // images to recover: faces | scenes
  std::string split = "test";    // train | val | test
  std::size_t count = 10;        // images used by recover / sweep / study
  std::size_t validation = 20;   // validation faces used by cutsearch
};

struct OperatorConfig {
  std::string kind = "gaussian";
  std::vector<double> ratios{0.1};
  std::size_t factor = 2;
  std::uint64_t seed = 0;
  bool noisy = true;
  std::uint64_t noise_seed = 0;
  std::size_t reference_size = 64;
};

struct StudyConfig {
  std::vector<std::string> studies{"representation", "untrained", "budget"};
  std::size_t generated = 10;  // generator samples for the representation study
  std::uint64_t random_weight_seed = 12345;
  std::size_t restart_multiplier = 6;
  std::size_t step_multiplier = 4;
};

inline RecoveryConfig preset(std::size_t cut, std::size_t steps, double lr, InitKind init) {
  RecoveryConfig c;
  c.cut = cut;
  c.steps = steps;
  c.lr = lr;
  c.init.kind = init;
  return c;
}

/// Everything a subcommand needs; the resolved config is echoed to
/// <output>/config.json and replaying that file reproduces the run.
struct RunConfig {
  std::string command;
  std::string recipe = "vae-mini";
  std::string weights;  // empty: fresh weights of `recipe` seeded by weight_seed
  std::uint64_t weight_seed = 0;
  DatasetConfig dataset;
  OperatorConfig op;
  // Defaults picked on validation faces (m/n 0.1-0.3, gaussian, vae-mini).
  RecoveryConfig recovery = preset(1, 50, 0.03, InitKind::Zero);           // GS
  RecoveryConfig uncut = preset(0, 300, 0.05, InitKind::CensoredNormal);  // NoGS (cut forced to 0)
  std::vector<std::size_t> cuts;   // cutsearch candidates; empty = all
  std::vector<std::string> methods{"gs", "nogs", "lasso", "iagan"};
  LassoOptions lasso{.lambda = 0.1, .max_iters = 2000, .tol = 1e-7, .fista = true};
  IaganConfig iagan;
  TrainConfig train{.epochs = 100, .beta = 0.25};
  StudyConfig study;
  std::size_t workers = 1;
  bool record_wall_time = false;  // wall_ms column (breaks byte-for-byte replay when on)
  std::string output;             // empty: $GS_OUTPUT_ROOT (or ./runs) / <command>-<hash>

  ProblemSpec problem(double ratio) const;
};

nlohmann::ordered_json to_json(const RecoveryConfig& cfg);
nlohmann::ordered_json to_json(const ProblemSpec& spec);
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Fills a RunConfig from JSON, starting from defaults. Unknown keys are errors.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// FNV-1a of the canonical config JSON with `output` removed, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// cfg.output if set, else <root>/<command>-<hash> with root from GS_OUTPUT_ROOT or "runs".
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

}  // namespace gs
