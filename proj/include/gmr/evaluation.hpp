#pragma once

#include <span>

#include "gmr/dataset.hpp"

namespace gmr {

/// F_kl = (1/R) #{r : truth(r) = k and est(r) = l}. Labels are 0-based.
Eigen::MatrixXd confusion(const Labels& truth, const Labels& est, int k_true, int k_est);

/// D_kl = ||est_beta_l - true_beta_k||^2.
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& true_beta, const Eigen::MatrixXd& est_beta);

/// Average squared coefficient error over groups, computed as tr(D^T F).
double beta_error(const Eigen::MatrixXd& true_beta, const Eigen::MatrixXd& est_beta, const Eigen::MatrixXd& f);

/// I(U;V) / sqrt(H(U) H(V)) with natural logs. Two single-class labelings score 1.
double nmi(const Labels& truth, const Labels& est);

double rmse(std::span<const double> y_true, std::span<const double> y_pred);

}  // namespace gmr
