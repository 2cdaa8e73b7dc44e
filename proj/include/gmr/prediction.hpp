#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gmr/dataset.hpp"
#include "gmr/em.hpp"

namespace gmr {

/// Posterior-predictive density for one new observation of a known group:
/// sum_k weights_k N(y; means_k, sigmas2_k).
struct PredictiveMixture {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd sigmas2;

  double density(double y) const;
  double log_density(double y) const;
  double cdf(double y) const;
  double mean() const { return weights.dot(means); }
};

PredictiveMixture predictive_density(const ModelParams& params, const Eigen::VectorXd& tau_row,
                                     const Eigen::VectorXd& x_new);

/// Posterior mean sum_k tau_rk beta_k^T x_new.
double map_predict_gmr(const ModelParams& params, const Eigen::VectorXd& tau_row, const Eigen::VectorXd& x_new);

/// Prior mean sum_k pi_k beta_k^T x_new; ignores group identity.
double map_predict_fmr(const ModelParams& params, const Eigen::VectorXd& x_new);

enum class UnknownGroupPolicy { Prior, Error };

struct ObservationPrediction {
  std::string group;
  std::optional<double> y_true;
  double y_pred = 0.0;
  /// Predictive log-density at y_true; empty when the response is unknown.
  std::optional<double> log_density;
  bool used_fallback = false;
};

/// Links each test group to its trained posterior row by group id. Unknown
/// groups either throw UnknownGroup or fall back to the prior weights pi.
std::vector<ObservationPrediction> predict_groups(const FitResult& fit, const GroupedDataset& test,
                                                  UnknownGroupPolicy policy = UnknownGroupPolicy::Error);

/// Regular FMR prediction for every test observation, in dataset order.
std::vector<double> predict_fmr(const ModelParams& params, const GroupedDataset& test);

}  // namespace gmr
