#pragma once

#include <cstdint>
#include <vector>

#include "gmr/dataset.hpp"
#include "gmr/em.hpp"

namespace gmr {

/// Hold-out RMSE of predicting every test response by the training mean (K = 0).
double baseline_mean(const GroupedDataset& train, const GroupedDataset& test);

/// Hold-out RMSE of one pooled least-squares fit (K = 1), using the EM ridge policy.
double baseline_ols(const GroupedDataset& train, const GroupedDataset& test, double ridge = 1e-10);

struct KScore {
  int K = 0;
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;
  std::vector<double> rmse_per_rep;
};

struct SelectionReport {
  std::vector<int> k_grid;
  /// K = 0 and K = 1 baselines first, then each grid entry not already present.
  std::vector<KScore> rmse_by_k;
  /// Argmin over every entry, ties to smaller K.
  int best_k = 0;
  /// Argmin over grid entries with K >= 2 (over the whole grid if none).
  int best_mixture_k = 0;
  int n_reps = 0;

  const KScore& score(int K) const;
};

/// Repeated per-group hold-out: each rep draws a split, fits every K in the
/// grid on the training half and scores GMR predictions on the test half.
SelectionReport select_k(const GroupedDataset& data, const std::vector<int>& k_grid, const EmConfig& cfg,
                         double test_frac, int n_reps, std::uint64_t seed, int jobs = 1);

}  // namespace gmr
