#include "gmr/selection.hpp"

#include <algorithm>
#include <cmath>

#include "gmr/error.hpp"
#include "gmr/evaluation.hpp"
#include "gmr/parallel.hpp"
#include "gmr/prediction.hpp"
#include "gmr/random.hpp"
#include "gmr/synthgen.hpp"

namespace gmr {

namespace {

double gmr_rmse(const FitResult& fit, const GroupedDataset& test) {
  const auto preds = predict_groups(fit, test, UnknownGroupPolicy::Error);
  std::vector<double> y, yhat;
  y.reserve(preds.size());
  yhat.reserve(preds.size());
  for (const auto& p : preds) {
    y.push_back(*p.y_true);
    yhat.push_back(p.y_pred);
  }
  return rmse(y, yhat);
}

}  // namespace

double baseline_mean(const GroupedDataset& train, const GroupedDataset& test) {
  if (train.num_observations() == 0) throw Error(Errc::EmptyGroup, "training data is empty");
  const double mean = stacked_responses(train).mean();
  const Eigen::VectorXd y = stacked_responses(test);
  const std::vector<double> truth(y.data(), y.data() + y.size());
  const std::vector<double> pred(truth.size(), mean);
  return rmse(truth, pred);
}

double baseline_ols(const GroupedDataset& train, const GroupedDataset& test, double ridge) {
  const GroupStats stats = compute_group_stats(train);
  const Responsibilities ones = Responsibilities::Ones(stats.num_groups(), 1);
  const Eigen::VectorXd beta = m_step_beta(stats, ones, ridge).col(0);
  const Eigen::VectorXd y = stacked_responses(test);
  const Eigen::VectorXd yhat = stacked_features(test) * beta;
  return rmse(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
              std::span<const double>(yhat.data(), static_cast<std::size_t>(yhat.size())));
}

const KScore& SelectionReport::score(int K) const {
  for (const auto& s : rmse_by_k)
    if (s.K == K) return s;
  throw Error(Errc::InvalidArgument, "K=" + std::to_string(K) + " not in report");
}

SelectionReport select_k(const GroupedDataset& data, const std::vector<int>& k_grid, const EmConfig& cfg,
                         double test_frac, int n_reps, std::uint64_t seed, int jobs) {
  if (k_grid.empty()) throw Error(Errc::InvalidArgument, "k_grid is empty");
  if (n_reps < 1) throw Error(Errc::InvalidArgument, "n_reps must be >= 1");
  for (int K : k_grid)
    if (K < 1) throw Error(Errc::InvalidArgument, "grid entries must be >= 1");
  validate_dataset(data);

  std::vector<int> ks = {0, 1};
  for (int K : k_grid)
    if (std::find(ks.begin(), ks.end(), K) == ks.end()) ks.push_back(K);
  std::sort(ks.begin(), ks.end());

  // scores[rep][j] for ks[j]
  std::vector<std::vector<double>> scores(static_cast<std::size_t>(n_reps), std::vector<double>(ks.size()));
  parallel_for(static_cast<std::size_t>(n_reps), jobs, [&](std::size_t rep) {
    const Split split = train_test_split(data, test_frac, derive_seed(seed, {rep, 0}));
    auto& row = scores[rep];
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const int K = ks[j];
      const bool in_grid = std::find(k_grid.begin(), k_grid.end(), K) != k_grid.end();
      if (K == 0) {
        row[j] = baseline_mean(split.train, split.test);
      } else if (K == 1 && !in_grid) {
        row[j] = baseline_ols(split.train, split.test, cfg.ridge);
      } else {
        EmConfig c = cfg;
        c.K = K;
        c.jobs = 1;
        c.seed = derive_seed(seed, {rep, 1, static_cast<std::uint64_t>(K)});
        row[j] = gmr_rmse(fit(split.train, c), split.test);
      }
    }
  });

  SelectionReport report;
  report.k_grid = k_grid;
  report.n_reps = n_reps;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    KScore s;
    s.K = ks[j];
    for (const auto& row : scores) s.rmse_per_rep.push_back(row[j]);
    double sum = 0.0;
    for (double v : s.rmse_per_rep) sum += v;
    s.mean_rmse = sum / n_reps;
    double ss = 0.0;
    for (double v : s.rmse_per_rep) ss += (v - s.mean_rmse) * (v - s.mean_rmse);
    s.sd_rmse = n_reps > 1 ? std::sqrt(ss / (n_reps - 1)) : 0.0;
    report.rmse_by_k.push_back(std::move(s));
  }

  auto argmin = [&](auto&& keep) {
    const KScore* best = nullptr;
    for (const auto& s : report.rmse_by_k) {
      if (!keep(s.K)) continue;
      if (!best || s.mean_rmse < best->mean_rmse || (s.mean_rmse == best->mean_rmse && s.K < best->K)) best = &s;
    }
    return best;
  };
  report.best_k = argmin([](int) { return true; })->K;
  const bool has_mixture = std::any_of(k_grid.begin(), k_grid.end(), [](int K) { return K >= 2; });
  report.best_mixture_k =
      argmin([&](int K) {
        const bool in_grid = std::find(k_grid.begin(), k_grid.end(), K) != k_grid.end();
        return in_grid && (!has_mixture || K >= 2);
      })->K;
  return report;
}

}  // namespace gmr
