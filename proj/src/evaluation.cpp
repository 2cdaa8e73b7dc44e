#include "gmr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gmr/error.hpp"

namespace gmr {

Eigen::MatrixXd confusion(const Labels& truth, const Labels& est, int k_true, int k_est) {
  if (truth.size() != est.size()) throw Error(Errc::LengthMismatch, "label vectors differ in length");
  if (truth.empty()) throw Error(Errc::LengthMismatch, "labelings are empty");
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(k_true, k_est);
  for (std::size_t r = 0; r < truth.size(); ++r) {
    if (truth[r] < 0 || truth[r] >= k_true || est[r] < 0 || est[r] >= k_est)
      throw Error(Errc::InvalidArgument, "label out of range at position " + std::to_string(r));
    f(truth[r], est[r]) += 1.0;
  }
  return f / static_cast<double>(truth.size());
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& true_beta, const Eigen::MatrixXd& est_beta) {
  if (true_beta.rows() != est_beta.rows())
    throw Error(Errc::DimensionMismatch, "true and estimated coefficients differ in dimension");
  Eigen::MatrixXd d(true_beta.cols(), est_beta.cols());
  for (Index k = 0; k < true_beta.cols(); ++k)
    for (Index l = 0; l < est_beta.cols(); ++l) d(k, l) = (est_beta.col(l) - true_beta.col(k)).squaredNorm();
  return d;
}

double beta_error(const Eigen::MatrixXd& true_beta, const Eigen::MatrixXd& est_beta, const Eigen::MatrixXd& f) {
  if (f.rows() != true_beta.cols() || f.cols() != est_beta.cols())
    throw Error(Errc::DimensionMismatch, "confusion matrix shape does not match coefficient counts");
  return (distance_matrix(true_beta, est_beta).transpose() * f).trace();
}

double nmi(const Labels& truth, const Labels& est) {
  if (truth.size() != est.size()) throw Error(Errc::LengthMismatch, "label vectors differ in length");
  if (truth.empty()) throw Error(Errc::LengthMismatch, "labelings are empty");
  const double n = static_cast<double>(truth.size());
  std::map<int, double> pu, pv;
  std::map<std::pair<int, int>, double> puv;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    pu[truth[i]] += 1.0;
    pv[est[i]] += 1.0;
    puv[{truth[i], est[i]}] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hu = entropy(pu);
  const double hv = entropy(pv);
  if (hu == 0.0 && hv == 0.0) return 1.0;
  if (hu == 0.0 || hv == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : puv) {
    const double pj = c / n;
    mi += pj * std::log(pj / ((pu[key.first] / n) * (pv[key.second] / n)));
  }
  return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw Error(Errc::LengthMismatch, "rmse inputs differ in length");
  if (y_true.empty()) throw Error(Errc::LengthMismatch, "rmse of empty vectors");
  double ss = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(y_true.size()));
}

}  // namespace gmr
