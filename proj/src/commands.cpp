#include "gs/commands.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "gs/image_io.hpp"
#include "gs/lasso_dct.hpp"
#include "gs/metrics.hpp"
#include "gs/recovery.hpp"
#include "gs/training.hpp"

namespace gs {

namespace fs = std::filesystem;

GeneratorNet load_generator(const RunConfig& cfg) {
  if (cfg.weights.empty()) return make_recipe(cfg.recipe, cfg.weight_seed);
  if (!fs::exists(cfg.weights)) {
    throw std::runtime_error("weights file '" + cfg.weights + "' not found (run `gsurgery train` first or fix config.weights)");
  }
  return load_weights(cfg.weights, cfg.recipe);
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.source == "synthetic") {
    SyntheticSpec spec;
    spec.faces = cfg.dataset.faces;
    spec.scenes = cfg.dataset.scenes;
    spec.size = cfg.dataset.size;
    spec.seed = cfg.dataset.seed;
    return generate_synthetic_dataset(spec);
  }
  Dataset ds;
  ds.image_shape = {1, cfg.dataset.size, cfg.dataset.size};
  std::vector<Tensor> images = load_png_folder(cfg.dataset.folder, cfg.dataset.size);
  const std::size_t n = images.size();
  const std::size_t train = n * 8 / 10, val = n / 10;
  for (std::size_t i = 0; i < n; ++i) {
    const Split s = i < train ? Split::Train : i < train + val ? Split::Val : Split::Test;
    ds.samples.push_back({std::move(images[i]), Family::Folder, s, i});
  }
  return ds;
}

namespace {

Family primary_family(const Dataset& ds) {
  for (const Sample& s : ds.samples) {
    if (s.family == Family::Folder) return Family::Folder;
  }
  return Family::Faces;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  return Split::Test;
}

}  // namespace

std::vector<Tensor> noise_references(const Dataset& ds) {
  std::vector<Tensor> refs = ds.images(primary_family(ds), Split::Train);
  if (refs.size() > 100) refs.resize(100);
  return refs;
}

Targets load_targets(const RunConfig& cfg, const Dataset& ds, const GeneratorNet& net) {
  Targets t;
  if (cfg.dataset.family == "generated") {
    t.images = net.sample(cfg.dataset.count, cfg.dataset.seed);
    for (std::size_t i = 0; i < t.images.size(); ++i) t.ids.push_back("generated-" + std::to_string(i));
    return t;
  }
  const Family fam = cfg.dataset.family == "scenes" ? Family::Scenes : primary_family(ds);
  const Split split = parse_split(cfg.dataset.split);
  std::vector<Tensor> images = ds.images(fam, split);
  std::vector<std::size_t> ids = ds.ids(fam, split);
  if (images.size() < cfg.dataset.count) {
    throw std::runtime_error("dataset has only " + std::to_string(images.size()) + " " + cfg.dataset.family + "/" +
                             cfg.dataset.split + " images, config asks for " + std::to_string(cfg.dataset.count));
  }
  for (std::size_t i = 0; i < cfg.dataset.count; ++i) {
    t.images.push_back(std::move(images[i]));
    t.ids.push_back(std::string(family_name(fam)) + "-" + std::to_string(ids[i]));
  }
  return t;
}

namespace {

void write_echo(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  RunConfig echo = cfg;
  echo.output.clear();
  std::ofstream f(out / "config.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write config echo in '" + out.string() + "'");
  f << to_json(echo).dump(2) << '\n';
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  return f;
}

struct Row {
  std::string image_id, method;
  std::size_t cut;
  double ratio;
  std::uint64_t seed;
  double psnr, loss, wall_ms;
};

void write_row(std::ostream& csv, const Row& r, bool wall) {
  csv << r.image_id << ',' << r.method << ',' << r.cut << ',' << format_double(r.ratio) << ',' << r.seed << ','
      << format_double(cap_psnr(r.psnr)) << ',' << format_double(r.loss) << ',';
  if (wall) csv << format_double(r.wall_ms);
  csv << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// One method on one measured image.
Row run_method(const std::string& method, const RunConfig& cfg, const GeneratorNet& net, const Problem& prob,
               const Measurement& meas, const Tensor& truth, double ratio, const std::string& id, Tensor* image_out) {
  const auto t0 = std::chrono::steady_clock::now();
  Row row{id, method, 0, ratio, 0, 0.0, 0.0, 0.0};
  if (method == "gs" || method == "nogs") {
    const RecoveryConfig& rc = method == "gs" ? cfg.recovery : cfg.uncut;
    const RecoveryResult res = recover(CutGenerator(net, rc.cut), prob.op, meas, rc, &truth);
    row.cut = rc.cut;
    row.seed = rc.seed;
    row.psnr = *res.psnr;
    row.loss = res.loss;
    if (image_out) *image_out = res.image;
  } else if (method == "lasso") {
    const LassoSolution sol = lasso_dct_solve(prob.op, meas.y, cfg.lasso);
    row.psnr = psnr(truth, sol.image);
    row.loss = sol.objective;
    if (image_out) *image_out = sol.image;
  } else {
    const IaganResult res = iagan_refine(net, prob.op, meas, cfg.iagan, &truth);
    row.seed = cfg.iagan.seed;
    row.psnr = *res.result.psnr;
    row.loss = res.result.loss;
    if (image_out) *image_out = res.result.image;
  }
  row.wall_ms = elapsed_ms(t0);
  return row;
}

}  // namespace

int cmd_dataset(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  write_echo(cfg, out);
  const Dataset ds = load_dataset(cfg);
  std::ofstream index = open_out(out / "index.csv");
  index << "file,family,split,id\n";
  for (const Sample& s : ds.samples) {
    std::ostringstream name;
    name << family_name(s.family) << '-' << split_name(s.split) << '-' << s.id << ".png";
    fs::create_directories(out / "images");
    write_png16(out / "images" / name.str(), s.image);
    index << "images/" << name.str() << ',' << family_name(s.family) << ',' << split_name(s.split) << ',' << s.id
          << '\n';
  }
  log << "wrote " << ds.samples.size() << " images to " << (out / "images").string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  write_echo(cfg, out);
  const Dataset ds = load_dataset(cfg);
  const std::vector<Tensor> train = ds.images(primary_family(ds), Split::Train);
  if (train.empty()) throw std::runtime_error("no training images in the dataset");
  std::ofstream csv = open_out(out / "train_log.csv");
  csv << "epoch,loss,reconstruction,kl\n";
  log << "training " << cfg.recipe << " on " << train.size() << " images for " << cfg.train.epochs << " epochs\n";
  const TrainResult res = train_vae(cfg.train, train, [&](const EpochLog& e) {
    csv << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.reconstruction) << ','
        << format_double(e.kl) << '\n';
    log << "  epoch " << e.epoch << " loss " << e.loss << " (rec " << e.reconstruction << ", kl " << e.kl << ")\n";
  });
  save_weights(res.decoder, out / "weights.gsw");
  log << "weights: " << (out / "weights.gsw").string() << '\n';
  return 0;
}

int cmd_recover(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  write_echo(cfg, out);
  const GeneratorNet net = load_generator(cfg);
  const Dataset ds = load_dataset(cfg);
  const Targets targets = load_targets(cfg, ds, net);
  const std::vector<Tensor> refs = noise_references(ds);
  fs::create_directories(out / "recon");
  std::ofstream csv = open_out(out / "results.csv");
  csv << kResultsHeader << '\n';
  for (double ratio : cfg.op.ratios) {
    const ProblemSpec spec = cfg.problem(ratio);
    const Problem prob = make_problem(spec, net.image_shape(), refs);
    std::vector<Row> rows(targets.images.size());
    parallel_for(targets.images.size(), cfg.workers, [&](std::size_t i) {
      const Measurement meas = measure_for(prob, spec, targets.images[i], i);
      Tensor image;
      rows[i] = run_method("gs", cfg, net, prob, meas, targets.images[i], ratio, targets.ids[i], &image);
      std::ostringstream name;
      name << targets.ids[i] << "_r" << format_double(ratio) << "_c" << cfg.recovery.cut << ".png";
      write_png16(out / "recon" / name.str(), image);
      write_png16(out / "recon" / (targets.ids[i] + "_truth.png"), targets.images[i]);
    });
    for (const Row& r : rows) {
      write_row(csv, r, cfg.record_wall_time);
      log << "  " << r.image_id << " m/n=" << ratio << " psnr " << r.psnr << " dB\n";
    }
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  write_echo(cfg, out);
  const GeneratorNet net = load_generator(cfg);
  const Dataset ds = load_dataset(cfg);
  const Targets targets = load_targets(cfg, ds, net);
  const std::vector<Tensor> refs = noise_references(ds);
  std::ofstream csv = open_out(out / "results.csv");
  csv << kResultsHeader << '\n';
  std::ofstream summary = open_out(out / "sweep.csv");
  summary << "m_over_n,method,count,mean_psnr_db,std_dev_psnr_db\n";
  for (double ratio : cfg.op.ratios) {
    const ProblemSpec spec = cfg.problem(ratio);
    const Problem prob = make_problem(spec, net.image_shape(), refs);
    const std::size_t n = targets.images.size(), k = cfg.methods.size();
    std::vector<Row> rows(n * k);
    parallel_for(n * k, cfg.workers, [&](std::size_t job) {
      const std::size_t i = job / k, j = job % k;
      const Measurement meas = measure_for(prob, spec, targets.images[i], i);
      rows[job] = run_method(cfg.methods[j], cfg, net, prob, meas, targets.images[i], ratio, targets.ids[i], nullptr);
    });
    for (const Row& r : rows) write_row(csv, r, cfg.record_wall_time);
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> v;
      for (std::size_t i = 0; i < n; ++i) v.push_back(cap_psnr(rows[i * k + j].psnr));
      const Summary s = summarize(v);
      summary << format_double(ratio) << ',' << cfg.methods[j] << ',' << s.count << ',' << format_double(s.mean) << ','
              << format_double(s.stddev) << '\n';
      log << "  m/n=" << ratio << ' ' << cfg.methods[j] << ": " << s.mean << " ± " << s.stddev << " dB (std dev)\n";
    }
  }
  return 0;
}

int cmd_cutsearch(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  write_echo(cfg, out);
  const GeneratorNet net = load_generator(cfg);
  const Dataset ds = load_dataset(cfg);
  std::vector<Tensor> val = ds.images(primary_family(ds), Split::Val);
  if (val.size() < cfg.dataset.validation) {
    throw std::runtime_error("dataset has only " + std::to_string(val.size()) + " validation images, config asks for " +
                             std::to_string(cfg.dataset.validation));
  }
  val.resize(cfg.dataset.validation);
  std::vector<std::size_t> candidates = cfg.cuts;
  if (candidates.empty()) {
    for (std::size_t c = 0; c < net.depth(); ++c) candidates.push_back(c);
  }
  const ProblemSpec spec = cfg.problem(cfg.op.ratios.at(0));
  const CutSearchResult res = select_cut_index(net, val, spec, cfg.recovery, candidates);
  std::ofstream csv = open_out(out / "cutsearch.csv");
  csv << "cut,input_dim,overparam_ratio,count,mean_psnr_db,std_dev_psnr_db\n";
  for (const CutSearchRow& r : res.rows) {
    csv << r.cut << ',' << r.input_dim << ',' << format_double(overparam_ratio(r.input_dim, net.output_dim())) << ','
        << r.psnrs.size() << ',' << format_double(r.mean_psnr) << ',' << format_double(r.std_psnr) << '\n';
    log << "  c=" << r.cut << " k_c=" << r.input_dim << ": " << r.mean_psnr << " ± " << r.std_psnr << " dB\n";
  }
  open_out(out / "best_cut.txt") << res.best_cut << '\n';
  log << "best cut: " << res.best_cut << '\n';
  return 0;
}

int cmd_study(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  write_echo(cfg, out);
  const GeneratorNet net = load_generator(cfg);
  const Dataset ds = load_dataset(cfg);
  const Targets targets = load_targets(cfg, ds, net);
  const ProblemSpec spec = cfg.problem(cfg.op.ratios.at(0));
  const std::size_t cut = cfg.recovery.cut;
  int status = 0;
  auto check = [&](bool ok, const std::string& what) {
    log << (ok ? "  holds: " : "  FAILED: ") << what << '\n';
    if (!ok) status = 3;
  };
  for (const std::string& study : cfg.study.studies) {
    StudyReport report;
    if (study == "representation") {
      std::vector<Tensor> train = ds.images(primary_family(ds), Split::Train);
      train.resize(std::min(train.size(), cfg.dataset.count));
      const std::vector<Tensor> generated = net.sample(cfg.study.generated, cfg.dataset.seed);
      report = representation_error_study(net, cut, train, generated, cfg.uncut, cfg.recovery, cfg.workers);
      const double gap = report.aggregate("cut/train").psnr.mean - report.aggregate("uncut/train").psnr.mean;
      check(gap > 0.0, "GS beats NoGS on training images with A=I (gap " + format_double(gap) + " dB)");
    } else if (study == "untrained") {
      report = untrained_weights_study(net, cut, targets.images, spec, cfg.recovery, cfg.study.random_weight_seed,
                                       cfg.workers);
      const double gap = report.aggregate("trained").psnr.mean - report.aggregate("random").psnr.mean;
      check(gap > 0.0, "trained weights beat random weights (gap " + format_double(gap) + " dB)");
    } else {
      report = compute_budget_study(net, cut, targets.images, spec, cfg.uncut, cfg.recovery,
                                    {cfg.study.restart_multiplier, cfg.study.step_multiplier}, cfg.workers);
      const double more = report.aggregate("uncut_more").psnr.mean - report.aggregate("uncut").psnr.mean;
      const double gs = report.aggregate("gs").psnr.mean - report.aggregate("uncut").psnr.mean;
      check(more < gs, "extra uncut budget gains less (" + format_double(more) + " dB) than GS (" +
                           format_double(gs) + " dB)");
    }
    write_report(report, out / (study + ".csv"));
    for (const StudyAggregate& a : report.aggregates) {
      log << "  " << study << ' ' << a.method << ": " << a.psnr.mean << " ± " << a.psnr.stddev << " dB (std dev, n="
          << a.psnr.count << ")\n";
    }
  }
  return status;
}

int run_command(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = resolve_output_dir(cfg);
  log << cfg.command << " → " << out.string() << '\n';
  if (cfg.command == "dataset") return cmd_dataset(cfg, out, log);
  if (cfg.command == "train") return cmd_train(cfg, out, log);
  if (cfg.command == "recover") return cmd_recover(cfg, out, log);
  if (cfg.command == "sweep") return cmd_sweep(cfg, out, log);
  if (cfg.command == "cutsearch") return cmd_cutsearch(cfg, out, log);
  if (cfg.command == "study") return cmd_study(cfg, out, log);
  throw ConfigError("unknown command '" + cfg.command + "' (dataset, train, recover, sweep, cutsearch, study)");
}

}  // namespace gs
