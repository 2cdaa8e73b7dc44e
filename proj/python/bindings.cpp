#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <unordered_map>

#include "gmr/em.hpp"
#include "gmr/error.hpp"
#include "gmr/evaluation.hpp"
#include "gmr/io.hpp"
#include "gmr/prediction.hpp"
#include "gmr/selection.hpp"
#include "gmr/synthgen.hpp"

namespace py = pybind11;
using namespace gmr;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Flat (group, y, X) rows to a dataset, groups in first-appearance order.
GroupedDataset to_dataset(const std::vector<std::string>& groups, const Eigen::VectorXd& y, const RowMatrix& x) {
  if (static_cast<Index>(groups.size()) != y.size() || y.size() != x.rows())
    throw Error(Errc::LengthMismatch, "groups, y and X must have the same number of rows");
  std::unordered_map<std::string, std::vector<Index>> rows;
  std::vector<std::string> order;
  for (Index i = 0; i < y.size(); ++i) {
    auto [it, inserted] = rows.try_emplace(groups[i]);
    if (inserted) order.push_back(groups[i]);
    it->second.push_back(i);
  }
  GroupedDataset d;
  d.p = x.cols();
  for (const auto& id : order) {
    const auto& idx = rows[id];
    Group g;
    g.id = id;
    g.responses.resize(idx.size());
    g.features.resize(idx.size(), x.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      g.responses(j) = y(idx[j]);
      g.features.row(j) = x.row(idx[j]);
    }
    d.groups.push_back(std::move(g));
  }
  return d;
}

py::dict flatten(const GroupedDataset& d) {
  std::vector<std::string> groups;
  const Index n = d.num_observations();
  Eigen::VectorXd y(n);
  RowMatrix x(n, d.p);
  Index row = 0;
  for (const auto& g : d.groups)
    for (Index i = 0; i < g.size(); ++i, ++row) {
      groups.push_back(g.id);
      y(row) = g.responses(i);
      x.row(row) = g.features.row(i);
    }
  py::dict out;
  out["groups"] = groups;
  out["y"] = y;
  out["X"] = x;
  return out;
}

EmConfig em_config(int K, double epsilon, int max_iter, int restarts, const std::string& init,
                   std::optional<double> sigma2_floor, double ridge, std::uint64_t seed, int jobs) {
  EmConfig cfg;
  cfg.K = K;
  cfg.epsilon = epsilon;
  cfg.max_iter = max_iter;
  cfg.n_restarts = restarts;
  cfg.init = parse_init_strategy(init);
  cfg.sigma2_floor = sigma2_floor;
  cfg.ridge = ridge;
  cfg.seed = seed;
  cfg.jobs = jobs;
  return cfg;
}

#define GMR_EM_ARGS                                                                                  \
  py::arg("epsilon") = 1e-6, py::arg("max_iter") = 200, py::arg("restarts") = 10,                    \
      py::arg("init") = "random_hard", py::arg("sigma2_floor") = py::none(), py::arg("ridge") = 1e-10, \
      py::arg("seed") = 0, py::arg("jobs") = 1

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grouped mixture of regressions";

  static py::exception<Error> gmr_error(m, "GmrError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(gmr_error, e.what());
    }
  });

  py::class_<FitResult>(m, "Model")
      .def_property_readonly("pi", [](const FitResult& f) { return f.params.pi; })
      .def_property_readonly("beta", [](const FitResult& f) { return f.params.beta; })
      .def_property_readonly("sigma2", [](const FitResult& f) { return f.params.sigma2; })
      .def_property_readonly("tau", [](const FitResult& f) { return f.tau; })
      .def_property_readonly("labels", [](const FitResult& f) { return hard_labels(f.tau); })
      .def_readonly("group_ids", &FitResult::group_ids)
      .def_readonly("log_likelihood", &FitResult::log_likelihood)
      .def_readonly("n_iter", &FitResult::n_iter)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("ll_trace", &FitResult::ll_trace)
      .def_readonly("warnings", &FitResult::warnings)
      .def(
          "predict",
          [](const FitResult& f, const std::vector<std::string>& groups, const RowMatrix& x,
             const std::string& fallback) {
            if (fallback != "error" && fallback != "prior")
              throw Error(Errc::InvalidArgument, "fallback must be 'error' or 'prior'");
            const Eigen::VectorXd y = Eigen::VectorXd::Zero(x.rows());
            const auto d = to_dataset(groups, y, x);
            const auto preds =
                predict_groups(f, d, fallback == "prior" ? UnknownGroupPolicy::Prior : UnknownGroupPolicy::Error);
            // predict_groups walks groups in first-appearance order; map back to input rows.
            std::unordered_map<std::string, std::size_t> next;
            std::unordered_map<std::string, std::size_t> start;
            std::size_t offset = 0;
            for (const auto& g : d.groups) start[g.id] = offset, offset += g.size();
            Eigen::VectorXd out(x.rows());
            for (std::size_t i = 0; i < groups.size(); ++i) out(i) = preds[start[groups[i]] + next[groups[i]]++].y_pred;
            return out;
          },
          py::arg("groups"), py::arg("X"), py::arg("fallback") = "error")
      .def("to_json", [](const FitResult& f) { return io::model_to_json(f).dump(2); })
      .def_static("from_json", [](const std::string& s) { return io::model_from_json(io::Json::parse(s)); });

  m.def(
      "simulate",
      [](int n, int K, int p, int G, double sigma, double delta_beta, std::uint64_t seed,
         std::optional<int> wishart_df) {
        SimConfig cfg;
        cfg.n = n;
        cfg.K = K;
        cfg.p = p;
        cfg.G = G;
        cfg.sigma = sigma;
        cfg.delta_beta = delta_beta;
        cfg.seed = seed;
        cfg.wishart_df = wishart_df;
        const auto sim = generate(cfg);
        auto out = flatten(sim.data);
        out["beta_true"] = sim.truth.beta_true;
        out["labels"] = sim.truth.labels;
        out["group_ids"] = sim.truth.group_ids;
        out["sigma_x"] = sim.truth.sigma_x;
        return out;
      },
      py::arg("n"), py::arg("K"), py::arg("p"), py::arg("G"), py::arg("sigma"), py::arg("delta_beta"),
      py::arg("seed") = 0, py::arg("wishart_df") = py::none());

  m.def(
      "fit",
      [](const std::vector<std::string>& groups, const Eigen::VectorXd& y, const RowMatrix& x, int K, double epsilon,
         int max_iter, int restarts, const std::string& init, std::optional<double> sigma2_floor, double ridge,
         std::uint64_t seed, int jobs) {
        const auto d = to_dataset(groups, y, x);
        const auto cfg = em_config(K, epsilon, max_iter, restarts, init, sigma2_floor, ridge, seed, jobs);
        py::gil_scoped_release release;
        return fit(d, cfg);
      },
      py::arg("groups"), py::arg("y"), py::arg("X"), py::arg("K"), GMR_EM_ARGS);

  m.def(
      "select_k",
      [](const std::vector<std::string>& groups, const Eigen::VectorXd& y, const RowMatrix& x,
         const std::vector<int>& k_grid, double test_frac, int n_reps, double epsilon, int max_iter, int restarts,
         const std::string& init, std::optional<double> sigma2_floor, double ridge, std::uint64_t seed, int jobs) {
        const auto d = to_dataset(groups, y, x);
        const auto cfg = em_config(2, epsilon, max_iter, restarts, init, sigma2_floor, ridge, seed, jobs);
        SelectionReport report;
        {
          py::gil_scoped_release release;
          report = select_k(d, k_grid, cfg, test_frac, n_reps, seed, jobs);
        }
        py::dict out;
        py::dict by_k;
        for (const auto& s : report.rmse_by_k) {
          py::dict row;
          row["mean_rmse"] = s.mean_rmse;
          row["sd_rmse"] = s.sd_rmse;
          row["rmse_per_rep"] = s.rmse_per_rep;
          by_k[py::int_(s.K)] = row;
        }
        out["rmse_by_k"] = by_k;
        out["best_k"] = report.best_k;
        out["best_mixture_k"] = report.best_mixture_k;
        return out;
      },
      py::arg("groups"), py::arg("y"), py::arg("X"), py::arg("k_grid"), py::arg("test_frac") = 0.2,
      py::arg("n_reps") = 10, GMR_EM_ARGS);

  m.def("nmi", &nmi, py::arg("truth"), py::arg("est"));
  m.def(
      "rmse",
      [](const std::vector<double>& y_true, const std::vector<double>& y_pred) { return rmse(y_true, y_pred); },
      py::arg("y_true"), py::arg("y_pred"));
  m.def(
      "beta_error",
      [](const Eigen::MatrixXd& beta_true, const Eigen::MatrixXd& beta_est, const Labels& truth, const Labels& est) {
        return beta_error(beta_true, beta_est,
                          confusion(truth, est, static_cast<int>(beta_true.cols()), static_cast<int>(beta_est.cols())));
      },
      py::arg("beta_true"), py::arg("beta_est"), py::arg("truth"), py::arg("est"));
}
