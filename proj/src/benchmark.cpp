#include "gmr/benchmark.hpp"

#include <mutex>
#include <sstream>

#include "gmr/error.hpp"
#include "gmr/evaluation.hpp"
#include "gmr/io.hpp"
#include "gmr/parallel.hpp"
#include "gmr/prediction.hpp"
#include "gmr/random.hpp"

namespace gmr {

namespace {

template <class T>
std::vector<T> scalar_or_array(const nlohmann::json& j, const char* key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

double gmr_rmse(const FitResult& fit, const GroupedDataset& data) {
  std::vector<double> y, yhat;
  for (const auto& p : predict_groups(fit, data, UnknownGroupPolicy::Error)) {
    y.push_back(*p.y_true);
    yhat.push_back(p.y_pred);
  }
  return rmse(y, yhat);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void validate_benchmark_spec(const BenchmarkSpec& spec) {
  auto positive = [](const auto& grid, const char* name) {
    if (grid.empty()) throw Error(Errc::InvalidArgument, std::string("grid '") + name + "' is empty");
    for (auto v : grid)
      if (!(v > 0)) throw Error(Errc::InvalidArgument, std::string("grid '") + name + "' must be positive");
  };
  positive(spec.n, "n");
  positive(spec.K, "K");
  positive(spec.p, "p");
  positive(spec.G, "G");
  positive(spec.sigma, "sigma");
  positive(spec.delta_beta, "delta_beta");
  if (spec.n_reps < 1) throw Error(Errc::InvalidArgument, "n_reps must be >= 1");
  if (!(spec.test_frac > 0.0 && spec.test_frac < 1.0))
    throw Error(Errc::InvalidArgument, "test_frac must be in (0, 1)");
  EmConfig em = spec.em;
  em.K = 1;
  validate_config(em);
}

BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::Parse, "benchmark spec must be a JSON object");
  BenchmarkSpec spec;
  try {
    spec.n = scalar_or_array<int>(j, "n", spec.n);
    spec.K = scalar_or_array<int>(j, "K", spec.K);
    spec.p = scalar_or_array<int>(j, "p", spec.p);
    spec.G = scalar_or_array<int>(j, "G", spec.G);
    spec.sigma = scalar_or_array<double>(j, "sigma", spec.sigma);
    spec.delta_beta = scalar_or_array<double>(j, "delta_beta", spec.delta_beta);
    spec.n_reps = j.value("n_reps", spec.n_reps);
    spec.test_frac = j.value("test_frac", spec.test_frac);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("em")) {
      const auto& e = j.at("em");
      spec.em.epsilon = e.value("epsilon", spec.em.epsilon);
      spec.em.max_iter = e.value("max_iter", spec.em.max_iter);
      spec.em.n_restarts = e.value("n_restarts", spec.em.n_restarts);
      spec.em.ridge = e.value("ridge", spec.em.ridge);
      if (e.contains("sigma2_floor")) spec.em.sigma2_floor = e.at("sigma2_floor").get<double>();
      if (e.contains("init")) spec.em.init = parse_init_strategy(e.at("init").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("benchmark spec: ") + e.what());
  }
  validate_benchmark_spec(spec);
  return spec;
}

std::vector<Cell> expand_grid(const BenchmarkSpec& spec) {
  std::vector<Cell> cells;
  for (int K : spec.K)
    for (int p : spec.p)
      for (int n : spec.n)
        for (int G : spec.G)
          for (double db : spec.delta_beta)
            for (double s : spec.sigma) cells.push_back(Cell{n, K, p, G, s, db});
  return cells;
}

Replication run_replication(const Cell& cell, std::size_t cell_index, int rep, const BenchmarkSpec& spec) {
  Replication out;
  out.cell = cell;
  out.cell_index = cell_index;
  out.rep = rep;
  out.seed = derive_seed(spec.seed, {cell_index, static_cast<std::uint64_t>(rep)});
  try {
    SimConfig sc;
    sc.K = cell.K;
    sc.p = cell.p;
    sc.G = cell.G;
    sc.n = cell.n;
    sc.sigma = cell.sigma;
    sc.delta_beta = cell.delta_beta;
    sc.seed = derive_seed(out.seed, {0});
    const Simulation sim = generate(sc);

    std::optional<Split> split;
    if (splittable(sim.data)) split = train_test_split(sim.data, spec.test_frac, derive_seed(out.seed, {1}));
    const GroupedDataset& train = split ? split->train : sim.data;

    EmConfig em = spec.em;
    em.K = cell.K;
    em.jobs = 1;
    em.seed = derive_seed(out.seed, {2});
    const FitResult fitted = fit(train, em);

    const Labels est = hard_labels(fitted.tau);
    out.nmi = nmi(sim.truth.labels, est);
    out.beta_error = beta_error(sim.truth.beta_true, fitted.params.beta,
                                confusion(sim.truth.labels, est, cell.K, static_cast<int>(fitted.params.K())));
    if (split) {
      out.rmse_train = gmr_rmse(fitted, split->train);
      out.rmse_test = gmr_rmse(fitted, split->test);
      const Eigen::VectorXd y = stacked_responses(split->test);
      const std::vector<double> fmr = predict_fmr(fitted.params, split->test);
      out.rmse_test_fmr = rmse(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), fmr);
    }
    out.n_iter = fitted.n_iter;
    out.converged = fitted.converged;
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

std::vector<Replication> run_benchmark(const BenchmarkSpec& spec, int jobs,
                                       const std::function<void(const Replication&)>& on_done) {
  validate_benchmark_spec(spec);
  const auto cells = expand_grid(spec);
  const std::size_t per_cell = static_cast<std::size_t>(spec.n_reps);
  std::vector<Replication> results(cells.size() * per_cell);
  std::mutex done_mutex;
  parallel_for(results.size(), jobs, [&](std::size_t i) {
    const std::size_t c = i / per_cell;
    results[i] = run_replication(cells[c], c, static_cast<int>(i % per_cell), spec);
    if (on_done) {
      std::lock_guard lock(done_mutex);
      on_done(results[i]);
    }
  });
  return results;
}

std::vector<CellSummary> aggregate(const std::vector<Replication>& reps, const std::vector<Cell>& cells) {
  std::vector<CellSummary> out(cells.size());
  std::vector<std::vector<double>> train(cells.size()), test(cells.size()), fmr(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) out[c].cell = cells[c];
  for (const auto& r : reps) {
    auto& s = out.at(r.cell_index);
    if (!r.ok) {
      ++s.n_failed;
      continue;
    }
    ++s.n_ok;
    s.mean_nmi += r.nmi;
    s.mean_beta_error += r.beta_error;
    s.mean_n_iter += r.n_iter;
    s.frac_converged += r.converged ? 1.0 : 0.0;
    if (r.rmse_train) train[r.cell_index].push_back(*r.rmse_train);
    if (r.rmse_test) test[r.cell_index].push_back(*r.rmse_test);
    if (r.rmse_test_fmr) fmr[r.cell_index].push_back(*r.rmse_test_fmr);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& s = out[c];
    if (s.n_ok > 0) {
      s.mean_nmi /= s.n_ok;
      s.mean_beta_error /= s.n_ok;
      s.mean_n_iter /= s.n_ok;
      s.frac_converged /= s.n_ok;
    }
    s.mean_rmse_train = mean_of(train[c]);
    s.mean_rmse_test = mean_of(test[c]);
    s.mean_rmse_test_fmr = mean_of(fmr[c]);
  }
  return out;
}

nlohmann::ordered_json to_json(const Replication& r) {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["cell"] = r.cell_index;
  j["rep"] = r.rep;
  j["n"] = r.cell.n;
  j["K"] = r.cell.K;
  j["p"] = r.cell.p;
  j["G"] = r.cell.G;
  j["sigma"] = r.cell.sigma;
  j["delta_beta"] = r.cell.delta_beta;
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["nmi"] = r.nmi;
  j["beta_error"] = r.beta_error;
  j["rmse_train"] = opt(r.rmse_train);
  j["rmse_test"] = opt(r.rmse_test);
  j["rmse_test_fmr"] = opt(r.rmse_test_fmr);
  j["n_iter"] = r.n_iter;
  j["converged"] = r.converged;
  return j;
}

std::string summary_csv(const std::vector<CellSummary>& cells) {
  std::ostringstream out;
  auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
  out << "K,p,n,G,delta_beta,sigma,n_ok,n_failed,mean_nmi,mean_beta_error,mean_rmse_train,mean_rmse_test,"
         "mean_rmse_test_fmr,mean_n_iter,frac_converged\n";
  for (const auto& s : cells) {
    out << s.cell.K << ',' << s.cell.p << ',' << s.cell.n << ',' << s.cell.G << ','
        << io::format_double(s.cell.delta_beta) << ',' << io::format_double(s.cell.sigma) << ',' << s.n_ok << ','
        << s.n_failed << ',' << io::format_double(s.mean_nmi) << ',' << io::format_double(s.mean_beta_error) << ','
        << opt(s.mean_rmse_train) << ',' << opt(s.mean_rmse_test) << ',' << opt(s.mean_rmse_test_fmr) << ','
        << io::format_double(s.mean_n_iter) << ',' << io::format_double(s.frac_converged) << '\n';
  }
  return out.str();
}

}  // namespace gmr
