#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmr/dataset.hpp"

namespace gmr {

enum class InitStrategy { RandomSoft, RandomHard, KMeansOnGroupCoefs };

std::string to_string(InitStrategy s);
InitStrategy parse_init_strategy(const std::string& name);

struct EmConfig {
  int K = 2;
  double epsilon = 1e-6;
  int max_iter = 200;
  int n_restarts = 10;
  /// Lower bound on every sigma_k^2. Unset means 1e-8 * var(y).
  std::optional<double> sigma2_floor;
  /// Relative ridge: lambda = ridge * trace(Sigma~_k) / p on each beta solve.
  double ridge = 1e-10;
  InitStrategy init = InitStrategy::RandomHard;
  std::uint64_t seed = 0;
  /// Restarts evaluated concurrently; results never depend on this.
  int jobs = 1;
};

struct FitResult {
  ModelParams params;
  Responsibilities tau;
  std::vector<std::string> group_ids;
  double log_likelihood = 0.0;
  int n_iter = 0;
  bool converged = false;
  std::vector<double> ll_trace;
  int best_restart = 0;
  int failed_restarts = 0;
  std::vector<std::string> warnings;
};

void validate_config(const EmConfig& cfg);

/// Default variance floor: 1e-8 * var(y), or 1e-8 when every response is identical.
double default_sigma2_floor(const GroupedDataset& data);

/// E_rk(beta) = (1/n_r) sum_i (y_ri - beta_k^T x_ri)^2 by a direct residual pass.
Eigen::MatrixXd group_errors(const GroupedDataset& data, const Eigen::MatrixXd& beta);

/// log gamma_rk = log pi_k - (n_r/2) log(2 pi sigma_k^2) - n_r E_rk / (2 sigma_k^2).
Eigen::MatrixXd log_gamma(const GroupStats& stats, const GroupedDataset& data, const ModelParams& params);
Eigen::MatrixXd log_gamma_from_errors(const Eigen::VectorXd& n_r, const Eigen::MatrixXd& errors,
                                      const ModelParams& params);

/// Row-normalizes exp(log_gamma) through logsumexp.
Responsibilities e_step(const Eigen::MatrixXd& log_gamma);

Eigen::VectorXd m_step_pi(const Responsibilities& tau);

/// Column-normalized weights n_r tau_rk / w_{+k}. Throws EmptyCluster when a
/// cluster's total weight is below 1e-12 of the observation count.
Eigen::MatrixXd normalized_weights(const Eigen::VectorXd& n_r, const Responsibilities& tau);

/// Solves (Sigma~_k + lambda I) beta_k = rho~_k by Cholesky for each k. The ridge
/// escalates by 10x up to a relative 1e-4 before SingularSystem is thrown.
Eigen::MatrixXd m_step_beta(const GroupStats& stats, const Responsibilities& tau, double ridge);

Eigen::VectorXd m_step_sigma2(const GroupedDataset& data, const Responsibilities& tau,
                              const Eigen::MatrixXd& beta, double floor);
Eigen::VectorXd sigma2_from_errors(const Eigen::VectorXd& n_r, const Responsibilities& tau,
                                   const Eigen::MatrixXd& errors, double floor);

/// Observed-data log-likelihood: sum_r logsumexp_k log_gamma(r, k).
double log_marginal_likelihood(const Eigen::MatrixXd& log_gamma);

/// Starting responsibilities. The k-means strategy clusters per-group ridge
/// regression coefficients derived from `stats`.
Responsibilities init_responsibilities(const GroupStats& stats, int K, InitStrategy strategy,
                                       std::uint64_t seed);

/// One EM run from a given starting tau (no restarts, no failure recovery).
FitResult run_em(const GroupedDataset& data, const GroupStats& stats, const EmConfig& cfg,
                 Responsibilities tau0);

/// Best of cfg.n_restarts EM runs by final log-likelihood.
FitResult fit(const GroupedDataset& data, const EmConfig& cfg);

}  // namespace gmr
