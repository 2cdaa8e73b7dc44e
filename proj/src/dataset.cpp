#include "gmr/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "gmr/error.hpp"

namespace gmr {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::DuplicateGroupId: return "DuplicateGroupId";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::AllRestartsFailed: return "AllRestartsFailed";
    case Errc::TooFewGroups: return "TooFewGroups";
    case Errc::TooManyGroups: return "TooManyGroups";
    case Errc::GroupTooSmall: return "GroupTooSmall";
    case Errc::UnknownGroup: return "UnknownGroup";
    case Errc::Infeasible: return "Infeasible";
    case Errc::Io: return "Io";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

Index GroupedDataset::num_observations() const {
  Index n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

std::vector<std::string> GroupedDataset::group_ids() const {
  std::vector<std::string> ids;
  ids.reserve(groups.size());
  for (const auto& g : groups) ids.push_back(g.id);
  return ids;
}

void validate_dataset(const GroupedDataset& data) {
  if (data.groups.empty()) throw Error(Errc::EmptyGroup, "dataset has no groups");
  if (data.p < 1) throw Error(Errc::DimensionMismatch, "feature dimension must be >= 1");
  std::unordered_set<std::string> seen;
  for (const auto& g : data.groups) {
    if (!seen.insert(g.id).second) throw Error(Errc::DuplicateGroupId, "group '" + g.id + "' appears twice");
    if (g.size() == 0) throw Error(Errc::EmptyGroup, "group '" + g.id + "' has no observations");
    if (g.features.cols() != data.p)
      throw Error(Errc::DimensionMismatch, "group '" + g.id + "' has " + std::to_string(g.features.cols()) +
                                               " features, expected " + std::to_string(data.p));
    if (g.features.rows() != g.size())
      throw Error(Errc::DimensionMismatch, "group '" + g.id + "' response/feature row counts differ");
    if (!g.features.allFinite() || !g.responses.allFinite())
      throw Error(Errc::NonFinite, "group '" + g.id + "' contains NaN or Inf");
  }
}

GroupStats compute_group_stats(const GroupedDataset& data) {
  validate_dataset(data);
  GroupStats stats;
  const auto R = data.num_groups();
  stats.sigma_hat.reserve(R);
  stats.rho_hat.reserve(R);
  stats.n_r.resize(R);
  for (Index r = 0; r < R; ++r) {
    const auto& g = data.groups[r];
    const double n = static_cast<double>(g.size());
    Eigen::MatrixXd s = (g.features.transpose() * g.features) / n;
    // Exact symmetry regardless of how the product was blocked.
    s = 0.5 * (s + s.transpose()).eval();
    stats.sigma_hat.push_back(std::move(s));
    stats.rho_hat.push_back((g.features.transpose() * g.responses) / n);
    stats.n_r(r) = n;
  }
  return stats;
}

Labels hard_labels(const Responsibilities& tau) {
  Labels labels(tau.rows());
  for (Index r = 0; r < tau.rows(); ++r) {
    Index best = 0;
    for (Index k = 1; k < tau.cols(); ++k)
      if (tau(r, k) > tau(r, best)) best = k;
    labels[r] = static_cast<int>(best);
  }
  return labels;
}

double response_variance(const GroupedDataset& data) {
  const Eigen::VectorXd y = stacked_responses(data);
  if (y.size() == 0) return 0.0;
  const double mean = y.mean();
  return (y.array() - mean).square().mean();
}

Eigen::VectorXd stacked_responses(const GroupedDataset& data) {
  Eigen::VectorXd y(data.num_observations());
  Index at = 0;
  for (const auto& g : data.groups) {
    y.segment(at, g.size()) = g.responses;
    at += g.size();
  }
  return y;
}

Eigen::MatrixXd stacked_features(const GroupedDataset& data) {
  Eigen::MatrixXd x(data.num_observations(), data.p);
  Index at = 0;
  for (const auto& g : data.groups) {
    x.middleRows(at, g.size()) = g.features;
    at += g.size();
  }
  return x;
}

}  // namespace gmr
