#include "gs/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace gs {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ProblemSpec RunConfig::problem(double ratio) const {
  ProblemSpec p;
  p.op.kind = parse_operator_kind(op.kind);
  p.op.ratio = ratio;
  p.op.factor = op.factor;
  p.op.seed = op.seed;
  p.noisy = op.noisy;
  p.noise.reference_size = op.reference_size;
  p.noise_seed = op.noise_seed;
  return p;
}

ojson to_json(const RecoveryConfig& c) {
  ojson j;
  j["cut"] = c.cut;
  j["restarts"] = c.restarts;
  j["steps"] = c.steps;
  j["lr"] = c.lr;
  j["optimizer"] = std::string(optimizer_name(c.optimizer));
  j["init"] = init_name(c.init);
  j["seed"] = c.seed;
  j["norm_cap"] = c.norm_cap ? ojson(*c.norm_cap) : ojson(nullptr);
  return j;
}

ojson to_json(const ProblemSpec& p) {
  return {{"kind", std::string(operator_kind_name(p.op.kind))},
          {"ratio", p.op.ratio},
          {"factor", p.op.factor},
          {"seed", p.op.seed},
          {"noisy", p.noisy},
          {"noise_seed", p.noise_seed},
          {"reference_size", p.noise.reference_size},
          {"reference_rms", p.noise.reference_rms}};
}

namespace {

ojson stage_json(const IaganStage& s) { return {{"lr_z", s.lr_z}, {"lr_theta", s.lr_theta}, {"steps", s.steps}}; }

// Reads the keys of one JSON object into fields, rejecting anything unknown.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

  template <class T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_recovery(const json& j, const std::string& where, RecoveryConfig& c) {
  Reader r(j, where);
  r.get("cut", c.cut);
  r.get("restarts", c.restarts);
  r.get("steps", c.steps);
  r.get("lr", c.lr);
  r.get("seed", c.seed);
  std::string opt(optimizer_name(c.optimizer)), init = init_name(c.init);
  r.get("optimizer", opt);
  r.get("init", init);
  try {
    c.optimizer = parse_optimizer(opt);
    c.init = parse_init(init);
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (const json* cap = r.child("norm_cap")) {
    if (cap->is_null()) {
      c.norm_cap.reset();
    } else if (cap->is_number()) {
      c.norm_cap = cap->get<double>();
    } else {
      throw ConfigError(where + ".norm_cap: expected a number or null");
    }
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void read_stage(const json& j, const std::string& where, IaganStage& s) {
  Reader r(j, where);
  r.get("lr_z", s.lr_z);
  r.get("lr_theta", s.lr_theta);
  r.get("steps", s.steps);
}

}  // namespace

ojson to_json(const RunConfig& c) {
  ojson j;
  j["command"] = c.command;
  j["recipe"] = c.recipe;
  j["weights"] = c.weights;
  j["weight_seed"] = c.weight_seed;
  j["dataset"] = {{"source", c.dataset.source},   {"folder", c.dataset.folder}, {"faces", c.dataset.faces},
                  {"scenes", c.dataset.scenes},   {"size", c.dataset.size},     {"seed", c.dataset.seed},
                  {"family", c.dataset.family},   {"split", c.dataset.split},   {"count", c.dataset.count},
                  {"validation", c.dataset.validation}};
  j["operator"] = {{"kind", c.op.kind},         {"ratios", c.op.ratios},         {"factor", c.op.factor},
                   {"seed", c.op.seed},         {"noisy", c.op.noisy},           {"noise_seed", c.op.noise_seed},
                   {"reference_size", c.op.reference_size}};
  j["recovery"] = to_json(c.recovery);
  j["uncut"] = to_json(c.uncut);
  j["cuts"] = c.cuts;
  j["methods"] = c.methods;
  j["lasso"] = {{"lambda", c.lasso.lambda}, {"max_iters", c.lasso.max_iters}, {"tol", c.lasso.tol},
                {"fista", c.lasso.fista}};
  j["iagan"] = {{"stage1", stage_json(c.iagan.stage1)},
                {"stage2", stage_json(c.iagan.stage2)},
                {"restarts", c.iagan.restarts},
                {"init", init_name(c.iagan.init)},
                {"seed", c.iagan.seed}};
  j["train"] = {{"epochs", c.train.epochs}, {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate}, {"beta", c.train.beta}, {"seed", c.train.seed}};
  j["study"] = {{"studies", c.study.studies},
                {"generated", c.study.generated},
                {"random_weight_seed", c.study.random_weight_seed},
                {"restart_multiplier", c.study.restart_multiplier},
                {"step_multiplier", c.study.step_multiplier}};
  j["workers"] = c.workers;
  j["record_wall_time"] = c.record_wall_time;
  j["output"] = c.output;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.uncut.cut = 0;
  Reader r(j, "config");
  r.get("command", c.command);
  r.get("recipe", c.recipe);
  if (const auto ids = recipe_ids(); std::find(ids.begin(), ids.end(), c.recipe) == ids.end()) {
    throw ConfigError("config.recipe: unknown recipe '" + c.recipe + "'");
  }
  r.get("weights", c.weights);
  r.get("weight_seed", c.weight_seed);
  if (const json* d = r.child("dataset")) {
    Reader s(*d, "config.dataset");
    s.get("source", c.dataset.source);
    s.get("folder", c.dataset.folder);
    s.get("faces", c.dataset.faces);
    s.get("scenes", c.dataset.scenes);
    s.get("size", c.dataset.size);
    s.get("seed", c.dataset.seed);
    s.get("family", c.dataset.family);
    s.get("split", c.dataset.split);
    s.get("count", c.dataset.count);
    s.get("validation", c.dataset.validation);
  }
  if (const json* o = r.child("operator")) {
    Reader s(*o, "config.operator");
    s.get("kind", c.op.kind);
    s.get("ratios", c.op.ratios);
    s.get("factor", c.op.factor);
    s.get("seed", c.op.seed);
    s.get("noisy", c.op.noisy);
    s.get("noise_seed", c.op.noise_seed);
    s.get("reference_size", c.op.reference_size);
  }
  if (const json* x = r.child("recovery")) read_recovery(*x, "config.recovery", c.recovery);
  if (const json* x = r.child("uncut")) read_recovery(*x, "config.uncut", c.uncut);
  r.get("cuts", c.cuts);
  r.get("methods", c.methods);
  if (const json* l = r.child("lasso")) {
    Reader s(*l, "config.lasso");
    s.get("lambda", c.lasso.lambda);
    s.get("max_iters", c.lasso.max_iters);
    s.get("tol", c.lasso.tol);
    s.get("fista", c.lasso.fista);
  }
  if (const json* g = r.child("iagan")) {
    Reader s(*g, "config.iagan");
    if (const json* x = s.child("stage1")) read_stage(*x, "config.iagan.stage1", c.iagan.stage1);
    if (const json* x = s.child("stage2")) read_stage(*x, "config.iagan.stage2", c.iagan.stage2);
    s.get("restarts", c.iagan.restarts);
    std::string init = init_name(c.iagan.init);
    s.get("init", init);
    c.iagan.init = parse_init(init);
    s.get("seed", c.iagan.seed);
  }
  if (const json* t = r.child("train")) {
    Reader s(*t, "config.train");
    s.get("epochs", c.train.epochs);
    s.get("batch_size", c.train.batch_size);
    s.get("learning_rate", c.train.learning_rate);
    s.get("beta", c.train.beta);
    s.get("seed", c.train.seed);
  }
  if (const json* t = r.child("study")) {
    Reader s(*t, "config.study");
    s.get("studies", c.study.studies);
    s.get("generated", c.study.generated);
    s.get("random_weight_seed", c.study.random_weight_seed);
    s.get("restart_multiplier", c.study.restart_multiplier);
    s.get("step_multiplier", c.study.step_multiplier);
  }
  r.get("workers", c.workers);
  r.get("record_wall_time", c.record_wall_time);
  r.get("output", c.output);

  c.train.recipe = c.recipe;
  if (c.uncut.cut != 0) throw ConfigError("config.uncut.cut must be 0 (it is the No GS baseline)");
  if (c.workers < 1) throw ConfigError("config.workers must be >= 1");
  if (c.dataset.source != "synthetic" && c.dataset.source != "folder") {
    throw ConfigError("config.dataset.source must be 'synthetic' or 'folder', got '" + c.dataset.source + "'");
  }
  if (c.dataset.source == "folder" && c.dataset.folder.empty()) {
    throw ConfigError("config.dataset.folder is required when source is 'folder'");
  }
  if (c.dataset.family != "faces" && c.dataset.family != "scenes" && c.dataset.family != "generated") {
    throw ConfigError("config.dataset.family must be faces, scenes or generated");
  }
  if (c.dataset.split != "train" && c.dataset.split != "val" && c.dataset.split != "test") {
    throw ConfigError("config.dataset.split must be train, val or test");
  }
  try {
    parse_operator_kind(c.op.kind);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config.operator.kind: ") + e.what());
  }
  for (double ratio : c.op.ratios) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("config.operator.ratios entries must lie in (0, 1]");
  }
  for (const std::string& m : c.methods) {
    if (m != "gs" && m != "nogs" && m != "lasso" && m != "iagan") {
      throw ConfigError("config.methods: unknown method '" + m + "' (gs, nogs, lasso, iagan)");
    }
  }
  for (const std::string& s : c.study.studies) {
    if (s != "representation" && s != "untrained" && s != "budget") {
      throw ConfigError("config.study.studies: unknown study '" + s + "' (representation, untrained, budget)");
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
  ojson j = to_json(cfg);
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  if (!cfg.output.empty()) return cfg.output;
  const char* root = std::getenv("GS_OUTPUT_ROOT");
  const std::filesystem::path base = root && *root ? root : "runs";
  return base / (cfg.command + "-" + config_hash(cfg));
}

}  // namespace gs
