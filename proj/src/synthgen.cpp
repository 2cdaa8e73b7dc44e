#include "gmr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gmr/error.hpp"
#include "gmr/random.hpp"

namespace gmr {

namespace {

Eigen::MatrixXd standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Fill row by row so the draw order is independent of Eigen's storage order.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

std::string group_name(int index, int total) {
  const auto width = std::to_string(total).size();
  std::string digits = std::to_string(index);
  return "g" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

void validate_sim_config(const SimConfig& cfg) {
  if (cfg.K < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
  if (cfg.p < 1) throw Error(Errc::InvalidArgument, "p must be >= 1");
  if (cfg.G < 1) throw Error(Errc::InvalidArgument, "G must be >= 1");
  if (cfg.K > cfg.p + 1) throw Error(Errc::Infeasible, "K equidistant coefficients need K <= p + 1");
  if (cfg.n < cfg.K * cfg.G) throw Error(Errc::TooManyGroups, "n must be at least K * G");
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) throw Error(Errc::InvalidArgument, "sigma must be >= 0");
  if (!(cfg.delta_beta >= 0.0) || !std::isfinite(cfg.delta_beta))
    throw Error(Errc::InvalidArgument, "delta_beta must be >= 0");
  if (cfg.wishart_df && *cfg.wishart_df < cfg.p) throw Error(Errc::InvalidArgument, "wishart_df must be >= p");
}

Eigen::MatrixXd random_rotation(int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd a = standard_normal(p, p, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign-correct so Q is Haar distributed rather than biased by the QR convention.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Eigen::MatrixXd simplex_betas(int K, int p, double delta_beta, std::uint64_t seed) {
  if (K < 1 || p < 1) throw Error(Errc::InvalidArgument, "K and p must be >= 1");
  if (K > p + 1) throw Error(Errc::Infeasible, "cannot place " + std::to_string(K) + " equidistant points in R^" +
                                                   std::to_string(p));
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(p, K);
  if (K > 1) {
    // Centered standard basis vertices; the centering matrix is a projector whose
    // unit-eigenvalue eigenvectors span the (K-1)-dim affine hull.
    Eigen::MatrixXd vertices = Eigen::MatrixXd::Identity(K, K);
    vertices.array() -= 1.0 / K;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(vertices);
    const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(K - 1);
    const Eigen::MatrixXd coords = basis.transpose() * vertices;  // (K-1) x K, edge sqrt(2)
    beta.topRows(K - 1) = coords * (delta_beta / std::sqrt(2.0));
  }
  return random_rotation(p, seed) * beta;
}

Eigen::MatrixXd wishart_covariance(int p, int df, std::uint64_t seed) {
  if (df < p) throw Error(Errc::InvalidArgument, "wishart df must be >= p");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd a = standard_normal(df, p, rng);
  Eigen::MatrixXd w = a.transpose() * a;
  const Eigen::VectorXd inv_sd = w.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd s = inv_sd.asDiagonal() * w * inv_sd.asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();
  s.diagonal().setOnes();
  return s;
}

std::vector<int> partition_groups(int count, int G) {
  if (G < 1) throw Error(Errc::InvalidArgument, "G must be >= 1");
  if (count < G) throw Error(Errc::TooManyGroups, std::to_string(count) + " observations cannot fill " +
                                                      std::to_string(G) + " groups");
  std::vector<int> sizes(G, count / G);
  for (int i = 0; i < count % G; ++i) ++sizes[i];
  return sizes;
}

Simulation generate(const SimConfig& cfg) {
  validate_sim_config(cfg);
  const int df = cfg.wishart_df.value_or(cfg.p + 2);

  Simulation sim;
  auto& truth = sim.truth;
  truth.sigma_x = wishart_covariance(cfg.p, df, derive_seed(cfg.seed, {1}));
  truth.beta_true = simplex_betas(cfg.K, cfg.p, cfg.delta_beta, derive_seed(cfg.seed, {2}));
  truth.sigma_true = Eigen::VectorXd::Constant(cfg.K, cfg.sigma);

  const Eigen::MatrixXd chol = truth.sigma_x.llt().matrixL();
  std::mt19937_64 rng(derive_seed(cfg.seed, {3}));
  std::normal_distribution<double> z(0.0, 1.0);

  const int R = cfg.K * cfg.G;
  sim.data.p = cfg.p;
  sim.data.groups.reserve(R);
  for (int k = 0; k < cfg.K; ++k) {
    const int count = cfg.n / cfg.K + (k < cfg.n % cfg.K ? 1 : 0);
    for (int size : partition_groups(count, cfg.G)) {
      Group g;
      g.id = group_name(static_cast<int>(sim.data.groups.size()) + 1, R);
      g.features.resize(size, cfg.p);
      g.responses.resize(size);
      for (int i = 0; i < size; ++i) {
        Eigen::VectorXd u(cfg.p);
        for (int j = 0; j < cfg.p; ++j) u(j) = z(rng);
        const Eigen::VectorXd x = chol * u;
        g.features.row(i) = x.transpose();
        g.responses(i) = truth.beta_true.col(k).dot(x) + cfg.sigma * z(rng);
      }
      truth.labels.push_back(k);
      truth.group_ids.push_back(g.id);
      sim.data.groups.push_back(std::move(g));
    }
  }
  return sim;
}

bool splittable(const GroupedDataset& data) {
  return std::all_of(data.groups.begin(), data.groups.end(), [](const Group& g) { return g.size() >= 2; });
}

Split train_test_split(const GroupedDataset& data, double test_frac, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw Error(Errc::InvalidArgument, "test_frac must be in (0, 1)");
  Split split;
  split.train.p = split.test.p = data.p;
  for (std::size_t r = 0; r < data.groups.size(); ++r) {
    const auto& g = data.groups[r];
    const Index n = g.size();
    if (n < 2) throw Error(Errc::GroupTooSmall, "group '" + g.id + "' has fewer than two observations");
    const Index n_test = std::clamp<Index>(static_cast<Index>(std::llround(test_frac * static_cast<double>(n))), 1, n - 1);

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> test_idx(order.begin(), order.begin() + n_test);
    std::vector<Index> train_idx(order.begin() + n_test, order.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    auto take = [&g](const std::vector<Index>& idx) {
      Group out;
      out.id = g.id;
      out.responses = g.responses(idx);
      out.features = g.features(idx, Eigen::all);
      return out;
    };
    split.train.groups.push_back(take(train_idx));
    split.test.groups.push_back(take(test_idx));
  }
  return split;
}

}  // namespace gmr
