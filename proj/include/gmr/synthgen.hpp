#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmr/dataset.hpp"

namespace gmr {

/// Monte Carlo setup. R = K * G groups; each cluster owns n / K observations.
struct SimConfig {
  int K = 2;
  int p = 2;
  int G = 10;
  int n = 800;
  /// Noise standard deviation, shared by every cluster.
  double sigma = 2.0;
  double delta_beta = 12.0;
  /// Wishart degrees of freedom; unset means p + 2.
  std::optional<int> wishart_df;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Eigen::MatrixXd beta_true;  // p x K
  Labels labels;              // true cluster per group, 0-based
  Eigen::VectorXd sigma_true;
  Eigen::MatrixXd sigma_x;
  std::vector<std::string> group_ids;
};

struct Simulation {
  GroupedDataset data;
  GroundTruth truth;
};

void validate_sim_config(const SimConfig& cfg);

/// Vertices of a regular (K-1)-simplex with edge length delta_beta, embedded
/// in R^p and randomly rotated. Every column has norm delta * sqrt((K-1)/(2K)).
Eigen::MatrixXd simplex_betas(int K, int p, double delta_beta, std::uint64_t seed);

/// Haar-distributed p x p orthogonal matrix.
Eigen::MatrixXd random_rotation(int p, std::uint64_t seed);

/// Wishart(I, df) draw rescaled to unit diagonal.
Eigen::MatrixXd wishart_covariance(int p, int df, std::uint64_t seed);

/// Splits `count` observations over G groups; the first count mod G groups get one extra.
std::vector<int> partition_groups(int count, int G);

Simulation generate(const SimConfig& cfg);

struct Split {
  GroupedDataset train;
  GroupedDataset test;
};

/// Per-group random hold-out. Each group contributes round(test_frac * n_r)
/// observations to the test half, clamped to [1, n_r - 1].
Split train_test_split(const GroupedDataset& data, double test_frac, std::uint64_t seed);

/// True when every group has at least two observations.
bool splittable(const GroupedDataset& data);

}  // namespace gmr
