#include "gmr/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <unordered_map>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "gmr/benchmark.hpp"
#include "gmr/em.hpp"
#include "gmr/error.hpp"
#include "gmr/evaluation.hpp"
#include "gmr/io.hpp"
#include "gmr/prediction.hpp"
#include "gmr/selection.hpp"
#include "gmr/synthgen.hpp"

namespace gmr::cli {

namespace {

using io::Json;
using Logger = std::shared_ptr<spdlog::logger>;

struct Context {
  std::ostream& out;
  std::ostream& err;
  Logger log;
};

Logger make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("gmr", sink);
  log->set_pattern("gmr: %l: %v");
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("GMR_LOG")) {
    const std::string v = env;
    if (v == "error") level = spdlog::level::err;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
  }
  log->set_level(level);
  return log;
}

// An empty path or "-" means standard output.
template <class Fn>
void write_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    fallback.flush();
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  fn(file);
  file.flush();
  if (!file) throw Error(Errc::Io, "failed writing '" + path + "'");
}

// One-line summaries go to stdout unless stdout already carries the data.
std::ostream& summary_stream(const Context& ctx, const std::string& out_path) {
  return out_path.empty() || out_path == "-" ? ctx.err : ctx.out;
}

std::string config_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Fills options that were not given on the command line from a JSON object
// whose keys are the long option names ('_' and '-' are interchangeable).
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  const Json cfg = io::read_json_file(path);
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = name == "config" ? nullptr : sub.get_option_no_throw("--" + name);
    if (opt == nullptr) throw CLI::ValidationError("--config", "unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& e : value) opt->add_result(config_text(e));
    } else {
      opt->add_result(config_text(value));
    }
    opt->run_callback();
  }
}

void require(const CLI::App& sub, std::initializer_list<const char*> names) {
  for (const char* name : names)
    if (sub.get_option(name)->count() == 0) throw CLI::RequiredError(name);
}

bool given(const CLI::App& sub, const char* name) { return sub.get_option(name)->count() > 0; }

struct EmFlags {
  EmConfig cfg;
  std::string init = "random_hard";
  double sigma2_floor = 0.0;
};

void add_em_options(CLI::App& sub, EmFlags& f) {
  sub.add_option("--epsilon", f.cfg.epsilon, "Convergence threshold on max |delta tau|")->capture_default_str();
  sub.add_option("--max-iter", f.cfg.max_iter, "Iteration cap per restart")->capture_default_str();
  sub.add_option("--restarts", f.cfg.n_restarts, "Number of random restarts")->capture_default_str();
  sub.add_option("--init", f.init, "random_hard, random_soft or kmeans")->capture_default_str();
  sub.add_option("--sigma2-floor", f.sigma2_floor, "Lower bound on cluster variances (default 1e-8 var(y))");
  sub.add_option("--ridge", f.cfg.ridge, "Relative ridge on the coefficient solves")->capture_default_str();
  sub.add_option("--seed", f.cfg.seed, "Random seed")->capture_default_str();
  sub.add_option("--jobs", f.cfg.jobs, "Worker threads")->capture_default_str();
}

EmConfig em_config(const CLI::App& sub, const EmFlags& f) {
  EmConfig cfg = f.cfg;
  cfg.init = parse_init_strategy(f.init);
  if (given(sub, "--sigma2-floor")) cfg.sigma2_floor = f.sigma2_floor;
  return cfg;
}

// simulate

struct SimulateFlags {
  SimConfig cfg;
  int wishart_df = 0;
  int jobs = 1;
  std::string out, truth, config;
};

void setup_simulate(CLI::App& app, SimulateFlags& f) {
  auto* sub = app.add_subcommand("simulate", "Generate a synthetic grouped dataset");
  sub->add_option("--n", f.cfg.n, "Total observations");
  sub->add_option("--K", f.cfg.K, "Number of clusters");
  sub->add_option("--p", f.cfg.p, "Number of features");
  sub->add_option("--G", f.cfg.G, "Groups per cluster");
  sub->add_option("--sigma", f.cfg.sigma, "Noise standard deviation");
  sub->add_option("--delta-beta", f.cfg.delta_beta, "Pairwise distance between cluster coefficients");
  sub->add_option("--wishart-df", f.wishart_df, "Wishart degrees of freedom (default p + 2)");
  sub->add_option("--seed", f.cfg.seed, "Random seed")->capture_default_str();
  sub->add_option("--jobs", f.jobs, "Unused; generation is single-threaded");
  sub->add_option("--out", f.out, "Dataset CSV path (default stdout)");
  sub->add_option("--truth", f.truth, "Ground-truth JSON path");
  sub->add_option("--config", f.config, "JSON file with option defaults");
}

void run_simulate(const CLI::App& sub, SimulateFlags& f, const Context& ctx) {
  require(sub, {"--n", "--K", "--p", "--G", "--sigma", "--delta-beta"});
  SimConfig cfg = f.cfg;
  if (given(sub, "--wishart-df")) cfg.wishart_df = f.wishart_df;
  const Simulation sim = generate(cfg);
  write_output(f.out, ctx.out, [&](std::ostream& o) { io::write_dataset_csv(o, sim.data); });
  if (!f.truth.empty())
    write_output(f.truth, ctx.out, [&](std::ostream& o) { o << io::truth_to_json(sim.truth, cfg).dump(2) << '\n'; });

  Index lo = sim.data.groups.front().size(), hi = lo;
  for (const auto& g : sim.data.groups) {
    lo = std::min(lo, g.size());
    hi = std::max(hi, g.size());
  }
  auto& s = summary_stream(ctx, f.out);
  s << "simulated R=" << sim.data.num_groups() << " groups, n=" << sim.data.num_observations() << ", n_r=" << lo;
  if (hi != lo) s << ".." << hi;
  s << '\n';
}

// fit

struct FitFlags {
  EmFlags em;
  std::string data, out, config;
};

void setup_fit(CLI::App& app, FitFlags& f) {
  auto* sub = app.add_subcommand("fit", "Fit a grouped mixture of regressions");
  sub->add_option("data", f.data, "Dataset CSV");
  sub->add_option("--K", f.em.cfg.K, "Number of clusters");
  add_em_options(*sub, f.em);
  sub->add_option("--out", f.out, "Model JSON path (default stdout)");
  sub->add_option("--config", f.config, "JSON file with option defaults");
}

void run_fit(const CLI::App& sub, FitFlags& f, const Context& ctx) {
  require(sub, {"data", "--K"});
  const GroupedDataset data = io::read_dataset_csv(f.data);
  const EmConfig cfg = em_config(sub, f.em);
  // Reported up front so it is visible even when every restart then fails.
  const bool too_many = cfg.K > data.num_groups();
  if (too_many) ctx.log->warn("K={} exceeds the number of groups R={}", cfg.K, data.num_groups());
  const FitResult result = fit(data, cfg);
  if (!too_many)
    for (const auto& w : result.warnings) ctx.log->warn("{}", w);
  if (result.failed_restarts > 0)
    ctx.log->info("{} of {} restarts failed", result.failed_restarts, f.em.cfg.n_restarts);
  ctx.log->debug("best restart {}", result.best_restart);
  write_output(f.out, ctx.out, [&](std::ostream& o) { o << io::model_to_json(result).dump(2) << '\n'; });
  summary_stream(ctx, f.out) << "log_likelihood=" << io::format_double(result.log_likelihood)
                             << " n_iter=" << result.n_iter << " converged=" << (result.converged ? "true" : "false")
                             << '\n';
}

// predict

struct PredictFlags {
  std::string model, data, fallback = "error", out, config;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void setup_predict(CLI::App& app, PredictFlags& f) {
  auto* sub = app.add_subcommand("predict", "Predict responses of a dataset with a fitted model");
  sub->add_option("--model", f.model, "Model JSON");
  sub->add_option("--data", f.data, "Dataset CSV; the y column may be empty");
  sub->add_option("--fallback", f.fallback, "Unknown groups: prior or error")
      ->check(CLI::IsMember({"prior", "error"}))
      ->capture_default_str();
  sub->add_option("--seed", f.seed, "Unused; prediction is deterministic");
  sub->add_option("--jobs", f.jobs, "Unused");
  sub->add_option("--out", f.out, "Predictions CSV path (default stdout)");
  sub->add_option("--config", f.config, "JSON file with option defaults");
}

void run_predict(const CLI::App& sub, PredictFlags& f, const Context& ctx) {
  require(sub, {"--model", "--data"});
  if (f.fallback != "prior" && f.fallback != "error") throw CLI::ValidationError("--fallback", f.fallback);
  const FitResult model = io::model_from_json(io::read_json_file(f.model));
  const GroupedDataset data = io::read_dataset_csv(f.data, true);
  const auto policy = f.fallback == "prior" ? UnknownGroupPolicy::Prior : UnknownGroupPolicy::Error;
  const auto preds = predict_groups(model, data, policy);
  const auto n_fallback = std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.used_fallback; });
  if (n_fallback > 0) ctx.log->info("{} predictions used the prior weights", n_fallback);
  write_output(f.out, ctx.out, [&](std::ostream& o) { io::write_predictions_csv(o, preds); });
}

// evaluate

struct EvaluateFlags {
  std::string model, truth, predictions, out, config;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void setup_evaluate(CLI::App& app, EvaluateFlags& f) {
  auto* sub = app.add_subcommand("evaluate", "Score a fitted model and/or predictions");
  sub->add_option("--model", f.model, "Model JSON");
  sub->add_option("--truth", f.truth, "Ground-truth JSON from simulate");
  sub->add_option("--predictions", f.predictions, "Predictions CSV from predict");
  sub->add_option("--seed", f.seed, "Unused; evaluation is deterministic");
  sub->add_option("--jobs", f.jobs, "Unused");
  sub->add_option("--out", f.out, "Metrics JSON path (default stdout)");
  sub->add_option("--config", f.config, "JSON file with option defaults");
}

void run_evaluate(const CLI::App&, EvaluateFlags& f, const Context& ctx) {
  if (f.predictions.empty() && (f.model.empty() || f.truth.empty()))
    throw CLI::RequiredError("--predictions or both --model and --truth");
  if (!f.truth.empty() && f.model.empty()) throw CLI::RequiredError("--model (needed with --truth)");

  Json metrics = Json::object();
  std::optional<FitResult> model;
  if (!f.model.empty()) model = io::model_from_json(io::read_json_file(f.model));

  if (model && !f.truth.empty()) {
    const GroundTruth truth = io::truth_from_json(io::read_json_file(f.truth));
    std::unordered_map<std::string, Index> row_of;
    for (std::size_t r = 0; r < model->group_ids.size(); ++r) row_of.emplace(model->group_ids[r], static_cast<Index>(r));
    Responsibilities tau(static_cast<Index>(truth.group_ids.size()), model->tau.cols());
    for (std::size_t r = 0; r < truth.group_ids.size(); ++r) {
      const auto it = row_of.find(truth.group_ids[r]);
      if (it == row_of.end()) throw Error(Errc::UnknownGroup, "group '" + truth.group_ids[r] + "' is not in the model");
      tau.row(static_cast<Index>(r)) = model->tau.row(it->second);
    }
    const Labels est = hard_labels(tau);
    const int k_true = static_cast<int>(truth.beta_true.cols());
    const int k_est = static_cast<int>(model->params.K());
    metrics["nmi"] = nmi(truth.labels, est);
    metrics["beta_error"] = beta_error(truth.beta_true, model->params.beta, confusion(truth.labels, est, k_true, k_est));
  }

  if (!f.predictions.empty()) {
    std::ifstream in(f.predictions, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open '" + f.predictions + "'");
    std::vector<double> y, yhat, y_known, yhat_known;
    for (const auto& p : io::read_predictions_csv(in)) {
      if (!p.y_true) continue;
      y.push_back(*p.y_true);
      yhat.push_back(p.y_pred);
      if (!p.used_fallback) {
        y_known.push_back(*p.y_true);
        yhat_known.push_back(p.y_pred);
      }
    }
    if (y.empty()) throw Error(Errc::InvalidArgument, "no prediction row has a true response");
    metrics["rmse"] = rmse(y, yhat);
    metrics["rmse_known_groups"] = y_known.empty() ? Json() : Json(rmse(y_known, yhat_known));
    metrics["n_scored"] = y.size();
  }

  if (model) {
    metrics["n_iter"] = model->n_iter;
    metrics["converged"] = model->converged;
    metrics["log_likelihood"] = model->log_likelihood;
  }
  write_output(f.out, ctx.out, [&](std::ostream& o) { o << metrics.dump(2) << '\n'; });
}

// select-k

struct SelectFlags {
  EmFlags em;
  std::vector<int> k_grid;
  double test_frac = 0.2;
  int reps = 10;
  std::string data, out, json, config;
};

void setup_select(CLI::App& app, SelectFlags& f) {
  auto* sub = app.add_subcommand("select-k", "Choose K by repeated per-group hold-out");
  sub->add_option("data", f.data, "Dataset CSV");
  sub->add_option("--k-grid", f.k_grid, "Candidate K values, e.g. 2,3,4")->delimiter(',');
  sub->add_option("--test-frac", f.test_frac, "Hold-out fraction per group")->capture_default_str();
  sub->add_option("--reps", f.reps, "Number of random splits")->capture_default_str();
  add_em_options(*sub, f.em);
  sub->add_option("--out", f.out, "Score table CSV path (default stdout)");
  sub->add_option("--json", f.json, "Full report JSON path");
  sub->add_option("--config", f.config, "JSON file with option defaults");
}

Json report_to_json(const SelectionReport& report) {
  Json j;
  j["k_grid"] = report.k_grid;
  Json scores = Json::array();
  for (const auto& s : report.rmse_by_k) {
    Json e;
    e["K"] = s.K;
    e["mean_rmse"] = s.mean_rmse;
    e["sd_rmse"] = s.sd_rmse;
    e["rmse_per_rep"] = s.rmse_per_rep;
    scores.push_back(std::move(e));
  }
  j["rmse_by_k"] = std::move(scores);
  j["best_k"] = report.best_k;
  j["best_mixture_k"] = report.best_mixture_k;
  j["n_reps"] = report.n_reps;
  return j;
}

void run_select(const CLI::App& sub, SelectFlags& f, const Context& ctx) {
  require(sub, {"data", "--k-grid"});
  const GroupedDataset data = io::read_dataset_csv(f.data);
  const EmConfig cfg = em_config(sub, f.em);
  const SelectionReport report = select_k(data, f.k_grid, cfg, f.test_frac, f.reps, cfg.seed, cfg.jobs);
  write_output(f.out, ctx.out, [&](std::ostream& o) {
    o << "K,mean_rmse,sd_rmse\n";
    for (const auto& s : report.rmse_by_k)
      o << s.K << ',' << io::format_double(s.mean_rmse) << ',' << io::format_double(s.sd_rmse) << '\n';
  });
  if (!f.json.empty())
    write_output(f.json, ctx.out, [&](std::ostream& o) { o << report_to_json(report).dump(2) << '\n'; });
  summary_stream(ctx, f.out) << "best_k=" << report.best_k << " best_mixture_k=" << report.best_mixture_k << '\n';
}

// benchmark

struct BenchmarkFlags {
  std::string spec, out, summary;
  int reps = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void setup_benchmark(CLI::App& app, BenchmarkFlags& f) {
  auto* sub = app.add_subcommand("benchmark", "Run the Monte Carlo simulation grid");
  sub->add_option("spec", f.spec, "Benchmark spec JSON");
  sub->add_option("--reps", f.reps, "Override n_reps");
  sub->add_option("--seed", f.seed, "Override the spec seed");
  sub->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();
  sub->add_option("--out", f.out, "JSON-lines path, one replication per line (default stdout)");
  sub->add_option("--summary", f.summary, "Aggregate CSV path");
}

void run_benchmark_cmd(const CLI::App& sub, BenchmarkFlags& f, const Context& ctx) {
  require(sub, {"spec"});
  BenchmarkSpec spec = benchmark_spec_from_json(nlohmann::json::parse(io::read_json_file(f.spec).dump()));
  if (given(sub, "--reps")) spec.n_reps = f.reps;
  if (given(sub, "--seed")) spec.seed = f.seed;
  validate_benchmark_spec(spec);

  const auto cells = expand_grid(spec);
  const std::size_t per_cell = static_cast<std::size_t>(spec.n_reps);
  std::vector<Replication> reps;
  write_output(f.out, ctx.out, [&](std::ostream& o) {
    // Lines are released in (cell, rep) order as soon as every earlier one is done.
    std::vector<std::optional<std::string>> pending(cells.size() * per_cell);
    std::size_t next = 0;
    reps = run_benchmark(spec, f.jobs, [&](const Replication& r) {
      if (!r.ok) ctx.log->info("cell {} rep {} failed: {}", r.cell_index, r.rep, r.error);
      pending[r.cell_index * per_cell + static_cast<std::size_t>(r.rep)] = to_json(r).dump();
      while (next < pending.size() && pending[next]) {
        o << *pending[next] << '\n';
        o.flush();
        pending[next].reset();
        ++next;
      }
    });
  });

  const auto summary = aggregate(reps, cells);
  int failed = 0;
  for (const auto& s : summary) failed += s.n_failed;
  if (failed > 0) ctx.log->warn("{} of {} replications failed", failed, reps.size());
  if (!f.summary.empty()) {
    write_output(f.summary, ctx.out, [&](std::ostream& o) { o << summary_csv(summary); });
  } else if (!f.out.empty() && f.out != "-") {
    ctx.out << summary_csv(summary);
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grouped mixture of regressions: simulate, fit, predict, evaluate, select K, benchmark", "gmr"};
  app.require_subcommand(1);

  SimulateFlags sim;
  FitFlags fit_flags;
  PredictFlags pred;
  EvaluateFlags eval;
  SelectFlags sel;
  BenchmarkFlags bench;
  setup_simulate(app, sim);
  setup_fit(app, fit_flags);
  setup_predict(app, pred);
  setup_evaluate(app, eval);
  setup_select(app, sel);
  setup_benchmark(app, bench);

  const Context ctx{out, err, make_logger(err)};
  try {
    app.parse(argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
      if (name == "simulate") {
        apply_config(*sub, sim.config);
        run_simulate(*sub, sim, ctx);
      } else if (name == "fit") {
        apply_config(*sub, fit_flags.config);
        run_fit(*sub, fit_flags, ctx);
      } else if (name == "predict") {
        apply_config(*sub, pred.config);
        run_predict(*sub, pred, ctx);
      } else if (name == "evaluate") {
        apply_config(*sub, eval.config);
        run_evaluate(*sub, eval, ctx);
      } else if (name == "select-k") {
        apply_config(*sub, sel.config);
        run_select(*sub, sel, ctx);
      } else {
        run_benchmark_cmd(*sub, bench, ctx);
      }
    } catch (const CLI::ParseError&) {
      throw;
    } catch (const std::exception& e) {
      ctx.log->error("{}", e.what());
      return 1;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"gmr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gmr::cli
