#include "gmr/prediction.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "gmr/error.hpp"

namespace gmr {

namespace {

void check_dims(const ModelParams& params, const Eigen::VectorXd& x_new) {
  if (x_new.size() != params.p())
    throw Error(Errc::DimensionMismatch, "x_new has " + std::to_string(x_new.size()) + " features, model expects " +
                                             std::to_string(params.p()));
}

void check_tau_row(const ModelParams& params, const Eigen::VectorXd& tau_row) {
  if (tau_row.size() != params.K())
    throw Error(Errc::DimensionMismatch, "tau row length differs from K");
}

}  // namespace

double PredictiveMixture::log_density(double y) const {
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd terms(weights.size());
  for (Index k = 0; k < weights.size(); ++k) {
    const double d = y - means(k);
    terms(k) = std::log(weights(k)) - 0.5 * (log_two_pi + std::log(sigmas2(k))) - 0.5 * d * d / sigmas2(k);
  }
  const double m = terms.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((terms.array() - m).exp().sum());
}

double PredictiveMixture::density(double y) const { return std::exp(log_density(y)); }

double PredictiveMixture::cdf(double y) const {
  double c = 0.0;
  for (Index k = 0; k < weights.size(); ++k)
    c += weights(k) * 0.5 * std::erfc(-(y - means(k)) / std::sqrt(2.0 * sigmas2(k)));
  return c;
}

PredictiveMixture predictive_density(const ModelParams& params, const Eigen::VectorXd& tau_row,
                                     const Eigen::VectorXd& x_new) {
  check_dims(params, x_new);
  check_tau_row(params, tau_row);
  return PredictiveMixture{tau_row, params.beta.transpose() * x_new, params.sigma2};
}

double map_predict_gmr(const ModelParams& params, const Eigen::VectorXd& tau_row, const Eigen::VectorXd& x_new) {
  check_dims(params, x_new);
  check_tau_row(params, tau_row);
  return tau_row.dot(params.beta.transpose() * x_new);
}

double map_predict_fmr(const ModelParams& params, const Eigen::VectorXd& x_new) {
  check_dims(params, x_new);
  return params.pi.dot(params.beta.transpose() * x_new);
}

std::vector<ObservationPrediction> predict_groups(const FitResult& fit, const GroupedDataset& test,
                                                  UnknownGroupPolicy policy) {
  if (test.p != fit.params.p())
    throw Error(Errc::DimensionMismatch, "test data has " + std::to_string(test.p) + " features, model expects " +
                                             std::to_string(fit.params.p()));
  std::unordered_map<std::string, Index> row_of;
  for (std::size_t r = 0; r < fit.group_ids.size(); ++r) row_of.emplace(fit.group_ids[r], static_cast<Index>(r));

  std::vector<ObservationPrediction> out;
  out.reserve(static_cast<std::size_t>(test.num_observations()));
  for (const auto& g : test.groups) {
    Eigen::VectorXd weights;
    bool fallback = false;
    if (auto it = row_of.find(g.id); it != row_of.end()) {
      weights = fit.tau.row(it->second).transpose();
    } else if (policy == UnknownGroupPolicy::Prior) {
      weights = fit.params.pi;
      fallback = true;
    } else {
      throw Error(Errc::UnknownGroup, "group '" + g.id + "' was not seen in training");
    }
    for (Index i = 0; i < g.size(); ++i) {
      const Eigen::VectorXd x = g.features.row(i).transpose();
      const PredictiveMixture mix = predictive_density(fit.params, weights, x);
      ObservationPrediction pred;
      pred.group = g.id;
      pred.y_pred = mix.mean();
      pred.used_fallback = fallback;
      if (std::isfinite(g.responses(i))) {
        pred.y_true = g.responses(i);
        pred.log_density = mix.log_density(g.responses(i));
      }
      out.push_back(std::move(pred));
    }
  }
  return out;
}

std::vector<double> predict_fmr(const ModelParams& params, const GroupedDataset& test) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(test.num_observations()));
  for (const auto& g : test.groups)
    for (Index i = 0; i < g.size(); ++i) out.push_back(map_predict_fmr(params, g.features.row(i).transpose()));
  return out;
}

}  // namespace gmr
