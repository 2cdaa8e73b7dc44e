#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gmr {

using Index = Eigen::Index;
using Labels = std::vector<int>;

/// One known group: all of its observations share a single latent cluster.
struct Group {
  std::string id;
  Eigen::VectorXd responses;  // n_r
  Eigen::MatrixXd features;   // n_r x p, row i is x_ri

  Index size() const { return responses.size(); }
};

/// Observations partitioned into R known groups, in first-appearance order.
struct GroupedDataset {
  std::vector<Group> groups;
  Index p = 0;

  Index num_groups() const { return static_cast<Index>(groups.size()); }
  Index num_observations() const;
  std::vector<std::string> group_ids() const;
};

/// theta = (pi, beta, sigma2). Column k of beta is the coefficient vector of cluster k.
struct ModelParams {
  Eigen::VectorXd pi;      // K
  Eigen::MatrixXd beta;    // p x K
  Eigen::VectorXd sigma2;  // K

  Index K() const { return pi.size(); }
  Index p() const { return beta.rows(); }
};

/// R x K posterior cluster-membership probabilities; each row sums to one.
using Responsibilities = Eigen::MatrixXd;

/// Per-group second moments, computed once before the EM loop.
struct GroupStats {
  std::vector<Eigen::MatrixXd> sigma_hat;  // (1/n_r) sum x x^T
  std::vector<Eigen::VectorXd> rho_hat;    // (1/n_r) sum y x
  Eigen::VectorXd n_r;

  Index num_groups() const { return n_r.size(); }
  Index p() const { return sigma_hat.empty() ? 0 : sigma_hat.front().rows(); }
};

/// Throws gmr::Error (DimensionMismatch, NonFinite, EmptyGroup, DuplicateGroupId)
/// if any dataset invariant is violated.
void validate_dataset(const GroupedDataset& data);

GroupStats compute_group_stats(const GroupedDataset& data);

/// Row-wise argmax; ties go to the lowest cluster index.
Labels hard_labels(const Responsibilities& tau);

/// Population variance of every response in the dataset.
double response_variance(const GroupedDataset& data);

/// Concatenated responses and features over all groups, in group order.
Eigen::VectorXd stacked_responses(const GroupedDataset& data);
Eigen::MatrixXd stacked_features(const GroupedDataset& data);

}  // namespace gmr
