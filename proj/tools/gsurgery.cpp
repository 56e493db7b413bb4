// gsurgery: train desk generators, recover images with and without surgery,
// and run the sweeps and studies. Every run echoes its resolved config to
// <output>/config.json; `gsurgery run <that file>` replays it.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "gs/commands.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::string config;
  std::string output;
  std::string recipe;
  std::string weights;
  std::vector<double> ratios;
  std::string op;
  int cut = -1;
  int count = -1;
  int workers = -1;
  int epochs = -1;
  std::vector<std::string> sets;  // key.path=json
};

json value_of(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;  // bare strings need no quotes
  }
}

void set_path(json& j, const std::string& dotted, json value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty()) throw gs::ConfigError("bad --set key '" + dotted + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

gs::RunConfig resolve(const std::string& command, const Overrides& o) {
  json j = json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw gs::ConfigError("cannot open config '" + o.config + "'");
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw gs::ConfigError("malformed config '" + o.config + "': " + e.what());
    }
  }
  if (!command.empty()) j["command"] = command;
  if (!o.output.empty()) j["output"] = o.output;
  if (!o.recipe.empty()) j["recipe"] = o.recipe;
  if (!o.weights.empty()) j["weights"] = o.weights;
  if (!o.ratios.empty()) set_path(j, "operator.ratios", o.ratios);
  if (!o.op.empty()) set_path(j, "operator.kind", o.op);
  if (o.cut >= 0) set_path(j, "recovery.cut", o.cut);
  if (o.count >= 0) set_path(j, "dataset.count", o.count);
  if (o.workers >= 0) j["workers"] = o.workers;
  if (o.epochs >= 0) set_path(j, "train.epochs", o.epochs);
  for (const std::string& s : o.sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw gs::ConfigError("--set expects key.path=value, got '" + s + "'");
    set_path(j, s.substr(0, eq), value_of(s.substr(eq + 1)));
  }
  return gs::run_config_from_json(j);
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "JSON config file (see docs/config.schema.json)");
  sub->add_option("-o,--output", o.output, "output directory (default: $GS_OUTPUT_ROOT/<command>-<hash>)");
  sub->add_option("--recipe", o.recipe, "generator recipe: dcgan-mini, began-mini, vae-mini");
  sub->add_option("--weights", o.weights, "weight file from `gsurgery train`");
  sub->add_option("--ratios", o.ratios, "m/n ratios (operator.ratios)");
  sub->add_option("--op", o.op, "operator kind: gaussian, inpainting, superres, identity");
  sub->add_option("--cut", o.cut, "cut index for GS (recovery.cut)");
  sub->add_option("--count", o.count, "images to process (dataset.count)");
  sub->add_option("-j,--workers", o.workers, "worker threads over images");
  sub->add_option("--epochs", o.epochs, "training epochs (train.epochs)");
  sub->add_option("--set", o.sets, "override any config key, e.g. --set recovery.steps=200");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generator surgery toolkit"};
  app.require_subcommand(1);
  Overrides o;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"dataset", "write the synthetic dataset as 16-bit PNGs"},
      {"train", "train a VAE decoder and save its weights"},
      {"recover", "recover images with GS and write PNG reconstructions + results.csv"},
      {"sweep", "mean ± std dev PSNR vs m/n for GS, NoGS, Lasso-DCT and IAGAN"},
      {"cutsearch", "PSNR per cut index on validation images"},
      {"study", "representation-error, untrained-weights and compute-budget studies"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o);
  std::string replay;
  CLI::App* run = app.add_subcommand("run", "run a config file (e.g. a config.json echo) as-is");
  run->add_option("config", replay, "config file")->required();
  run->add_option("-o,--output", o.output, "output directory");
  run->add_option("-j,--workers", o.workers, "worker threads over images");

  CLI11_PARSE(app, argc, argv);
  try {
    std::string command;
    for (CLI::App* sub : app.get_subcommands()) command = sub->get_name();
    if (command == "run") {
      o.config = replay;
      command.clear();
    }
    const gs::RunConfig cfg = resolve(command, o);
    if (cfg.command.empty()) throw gs::ConfigError("config has no \"command\"");
    return gs::run_command(cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "gsurgery: error: " << e.what() << '\n';
    return 2;
  }
}
