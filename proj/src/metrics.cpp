#include "gs/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "gs/run_config.hpp"

namespace gs {

double psnr(const Tensor& x, const Tensor& estimate, double peak) {
  if (x.shape() != estimate.shape()) {
    throw ShapeError("psnr: shape mismatch " + to_string(x.shape()) + " vs " + to_string(estimate.shape()));
  }
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - estimate[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(x.size());
  return 10.0 * std::log10(peak * peak / mse);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

const StudyAggregate& StudyReport::aggregate(const std::string& method) const {
  for (const StudyAggregate& a : aggregates) {
    if (a.method == method) return a;
  }
  throw std::out_of_range("study '" + study + "' has no method '" + method + "'");
}

std::vector<StudyAggregate> aggregate_records(const std::vector<StudyRecord>& records) {
  std::vector<std::string> order;
  for (const StudyRecord& r : records) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  std::vector<StudyAggregate> out;
  for (const std::string& m : order) {
    std::vector<double> v;
    for (const StudyRecord& r : records) {
      if (r.method == m) v.push_back(r.psnr);
    }
    out.push_back({m, summarize(v)});
  }
  return out;
}

void write_report(const StudyReport& report, const std::filesystem::path& csv_path) {
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
    csv << "target_id,method,cut,psnr_db,final_loss\n";
    for (const StudyRecord& r : report.records) {
      csv << r.target_id << ',' << r.method << ',' << r.cut << ',' << format_double(r.psnr) << ','
          << format_double(r.loss) << '\n';
    }
  }
  nlohmann::ordered_json side;
  side["study"] = report.study;
  side["config"] = report.config;
  side["optimizer_runs"] = report.optimizer_runs;
  side["psnr_cap_db"] = kPsnrCap;
  side["aggregates"] = nlohmann::ordered_json::array();
  for (const StudyAggregate& a : report.aggregates) {
    side["aggregates"].push_back({{"method", a.method},
                                  {"count", a.psnr.count},
                                  {"mean_psnr_db", a.psnr.mean},
                                  {"std_dev_psnr_db", a.psnr.stddev}});
  }
  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write '" + json_path.string() + "'");
  js << side.dump(2) << '\n';
}

namespace {

StudyRecord record_of(const std::string& id, const std::string& method, const RecoveryResult& res) {
  StudyRecord r{id, method, res.config.cut, cap_psnr(*res.psnr), res.loss, {}};
  for (const RestartRecord& rr : res.restarts) r.restart_losses.push_back(rr.final_loss());
  return r;
}

void finish(StudyReport& report) { report.aggregates = aggregate_records(report.records); }

}  // namespace

StudyReport representation_error_study(const GeneratorNet& net, std::size_t cut, const std::vector<Tensor>& train,
                                       const std::vector<Tensor>& generated, const RecoveryConfig& uncut_cfg,
                                       const RecoveryConfig& cut_cfg, std::size_t workers) {
  StudyReport report;
  report.study = "representation_error";
  report.config = {{"cut", cut}, {"train_images", train.size()}, {"generated_images", generated.size()},
                   {"uncut", to_json(uncut_cfg)}, {"cut_config", to_json(cut_cfg)}};
  const MeasurementOperator identity = MeasurementOperator::identity(net.image_shape());
  const CutGenerator g0(net, 0), gc(net, cut);
  RecoveryConfig u = uncut_cfg, c = cut_cfg;
  u.cut = 0;
  c.cut = cut;
  struct Cell {
    const char* method;
    const std::vector<Tensor>* images;
    const CutGenerator* gen;
    const RecoveryConfig* cfg;
    const char* prefix;
  };
  const Cell cells[] = {{"uncut/train", &train, &g0, &u, "train"},
                        {"cut/train", &train, &gc, &c, "train"},
                        {"uncut/generated", &generated, &g0, &u, "gen"},
                        {"cut/generated", &generated, &gc, &c, "gen"}};
  for (const Cell& cell : cells) {
    std::vector<StudyRecord> recs(cell.images->size());
    parallel_for(recs.size(), workers, [&](std::size_t i) {
      const Tensor& x = (*cell.images)[i];
      const Measurement meas = measure(x, identity, 0.0, 0);
      const RecoveryResult res = recover(*cell.gen, identity, meas, *cell.cfg, &x);
      recs[i] = record_of(std::string(cell.prefix) + "-" + std::to_string(i), cell.method, res);
    });
    report.records.insert(report.records.end(), recs.begin(), recs.end());
    report.optimizer_runs += cell.cfg->restarts * recs.size();
  }
  finish(report);
  return report;
}

StudyReport untrained_weights_study(const GeneratorNet& trained, std::size_t cut, const std::vector<Tensor>& images,
                                    const ProblemSpec& problem, const RecoveryConfig& cfg, std::uint64_t weight_seed,
                                    std::size_t workers) {
  const GeneratorNet random = make_recipe(trained.recipe(), weight_seed);
  StudyReport report;
  report.study = "untrained_weights";
  report.config = {{"cut", cut}, {"images", images.size()}, {"recipe", trained.recipe()},
                   {"random_weight_seed", weight_seed}, {"problem", to_json(problem)}, {"recovery", to_json(cfg)}};
  const Problem prob = make_problem(problem, trained.image_shape(), images);
  RecoveryConfig c = cfg;
  c.cut = cut;
  const std::pair<const char*, const GeneratorNet*> sources[] = {{"trained", &trained}, {"random", &random}};
  for (const auto& [method, net] : sources) {
    const CutGenerator gc(*net, cut);
    std::vector<StudyRecord> recs(images.size());
    parallel_for(recs.size(), workers, [&](std::size_t i) {
      const Measurement meas = measure_for(prob, problem, images[i], i);
      recs[i] = record_of("img-" + std::to_string(i), method, recover(gc, prob.op, meas, c, &images[i]));
    });
    report.records.insert(report.records.end(), recs.begin(), recs.end());
    report.optimizer_runs += c.restarts * recs.size();
  }
  finish(report);
  return report;
}

StudyReport compute_budget_study(const GeneratorNet& net, std::size_t cut, const std::vector<Tensor>& images,
                                 const ProblemSpec& problem, const RecoveryConfig& uncut_cfg,
                                 const RecoveryConfig& cut_cfg, BudgetMultipliers multipliers,
                                 std::size_t workers) {
  if (multipliers.restarts < 1 || multipliers.steps < 1) throw std::invalid_argument("budget multipliers must be >= 1");
  RecoveryConfig base = uncut_cfg, more = uncut_cfg, gs_cfg = cut_cfg;
  base.cut = more.cut = 0;
  more.restarts *= multipliers.restarts;
  more.steps *= multipliers.steps;
  gs_cfg.cut = cut;
  StudyReport report;
  report.study = "compute_budget";
  report.config = {{"cut", cut}, {"images", images.size()}, {"restart_multiplier", multipliers.restarts},
                   {"step_multiplier", multipliers.steps}, {"problem", to_json(problem)},
                   {"uncut", to_json(base)}, {"uncut_more", to_json(more)}, {"gs", to_json(gs_cfg)}};
  const Problem prob = make_problem(problem, net.image_shape(), images);
  const CutGenerator g0(net, 0), gc(net, cut);
  const std::tuple<const char*, const CutGenerator*, const RecoveryConfig*> cells[] = {
      {"uncut", &g0, &base}, {"uncut_more", &g0, &more}, {"gs", &gc, &gs_cfg}};
  for (const auto& [method, gen, cfg] : cells) {
    std::vector<StudyRecord> recs(images.size());
    parallel_for(recs.size(), workers, [&](std::size_t i) {
      const Measurement meas = measure_for(prob, problem, images[i], i);
      recs[i] = record_of("img-" + std::to_string(i), method, recover(*gen, prob.op, meas, *cfg, &images[i]));
    });
    report.records.insert(report.records.end(), recs.begin(), recs.end());
    report.optimizer_runs += cfg->restarts * recs.size();
  }
  finish(report);
  return report;
}

}  // namespace gs
