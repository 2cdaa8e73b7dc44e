#include "gmr/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gmr/error.hpp"
#include "gmr/parallel.hpp"
#include "gmr/random.hpp"

namespace gmr {

namespace {

constexpr double kEmptyClusterFraction = 1e-12;
constexpr double kMaxRelativeRidge = 1e-4;
constexpr double kMinRcond = 1e-13;
constexpr int kKMeansIterations = 50;

double logsumexp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double m = row.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((row.array() - m).exp().sum());
}

Responsibilities one_hot(const Labels& labels, int K) {
  Responsibilities tau = Responsibilities::Zero(static_cast<Index>(labels.size()), K);
  for (std::size_t r = 0; r < labels.size(); ++r) tau(static_cast<Index>(r), labels[r]) = 1.0;
  return tau;
}

// Moves randomly chosen groups out of clusters that own at least two groups
// until every cluster owns one.
void repair_empty_clusters(Labels& labels, int K, std::mt19937_64& rng) {
  std::vector<int> counts(K, 0);
  for (int l : labels) ++counts[l];
  for (int k = 0; k < K; ++k) {
    if (counts[k] > 0) continue;
    std::vector<std::size_t> donors;
    for (std::size_t r = 0; r < labels.size(); ++r)
      if (counts[labels[r]] >= 2) donors.push_back(r);
    std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
    const std::size_t r = donors[pick(rng)];
    --counts[labels[r]];
    labels[r] = k;
    ++counts[k];
  }
}

Labels kmeans_labels(const std::vector<Eigen::VectorXd>& points, int K, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  auto sqdist = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); };

  // k-means++ seeding
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(K);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.push_back(points[first(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sqdist(points[i], centers[0]);
  while (static_cast<int>(centers.size()) < K) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (chosen = 0; chosen + 1 < n; ++chosen) {
        target -= d2[chosen];
        if (target <= 0.0) break;
      }
    } else {
      chosen = first(rng);
    }
    centers.push_back(points[chosen]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sqdist(points[i], centers.back()));
  }

  Labels labels(n, 0);
  for (int it = 0; it < kKMeansIterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sqdist(points[i], centers[0]);
      for (int k = 1; k < K; ++k) {
        const double d = sqdist(points[i], centers[k]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (labels[i] != best) changed = true;
      labels[i] = best;
    }
    std::vector<int> counts(K, 0);
    std::vector<Eigen::VectorXd> sums(K, Eigen::VectorXd::Zero(points[0].size()));
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      sums[labels[i]] += points[i];
    }
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) {
        centers[k] = sums[k] / counts[k];
        continue;
      }
      // Empty cluster: reseed at the point farthest from its current center.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sqdist(points[i], centers[labels[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers[k] = points[far];
      labels[far] = k;
      changed = true;
    }
    if (!changed && it > 0) break;
  }
  return labels;
}

}  // namespace

std::string to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::RandomSoft: return "random_soft";
    case InitStrategy::RandomHard: return "random_hard";
    case InitStrategy::KMeansOnGroupCoefs: return "kmeans";
  }
  return "random_hard";
}

InitStrategy parse_init_strategy(const std::string& name) {
  if (name == "random_soft") return InitStrategy::RandomSoft;
  if (name == "random_hard") return InitStrategy::RandomHard;
  if (name == "kmeans" || name == "kmeans_on_group_coefs") return InitStrategy::KMeansOnGroupCoefs;
  throw Error(Errc::InvalidArgument, "unknown init strategy '" + name + "'");
}

void validate_config(const EmConfig& cfg) {
  if (cfg.K < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
  if (!(cfg.epsilon > 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be > 0");
  if (cfg.max_iter < 1) throw Error(Errc::InvalidArgument, "max_iter must be >= 1");
  if (cfg.n_restarts < 1) throw Error(Errc::InvalidArgument, "n_restarts must be >= 1");
  if (cfg.ridge < 0.0) throw Error(Errc::InvalidArgument, "ridge must be >= 0");
  if (cfg.sigma2_floor && !(*cfg.sigma2_floor > 0.0))
    throw Error(Errc::InvalidArgument, "sigma2_floor must be > 0");
}

double default_sigma2_floor(const GroupedDataset& data) {
  const double v = response_variance(data);
  return v > 0.0 ? 1e-8 * v : 1e-8;
}

Eigen::MatrixXd group_errors(const GroupedDataset& data, const Eigen::MatrixXd& beta) {
  if (beta.rows() != data.p) throw Error(Errc::DimensionMismatch, "beta rows differ from feature dimension");
  Eigen::MatrixXd errors(data.num_groups(), beta.cols());
  for (Index r = 0; r < data.num_groups(); ++r) {
    const auto& g = data.groups[r];
    const Eigen::MatrixXd residuals = (-(g.features * beta)).colwise() + g.responses;
    errors.row(r) = residuals.colwise().squaredNorm() / static_cast<double>(g.size());
  }
  return errors;
}

Eigen::MatrixXd log_gamma_from_errors(const Eigen::VectorXd& n_r, const Eigen::MatrixXd& errors,
                                      const ModelParams& params) {
  const Index K = params.K();
  if (errors.cols() != K || params.sigma2.size() != K || errors.rows() != n_r.size())
    throw Error(Errc::DimensionMismatch, "log_gamma inputs disagree on R or K");
  if ((params.sigma2.array() <= 0.0).any() || !params.sigma2.allFinite())
    throw Error(Errc::NonFinite, "sigma2 must be finite and positive");
  Eigen::MatrixXd lg(errors.rows(), K);
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (Index k = 0; k < K; ++k) {
    const double s2 = params.sigma2(k);
    const double log_pi = std::log(params.pi(k));
    lg.col(k) = (log_pi - 0.5 * n_r.array() * (log_two_pi + std::log(s2)) -
                 n_r.array() * errors.col(k).array() / (2.0 * s2))
                    .matrix();
  }
  return lg;
}

Eigen::MatrixXd log_gamma(const GroupStats& stats, const GroupedDataset& data, const ModelParams& params) {
  if (stats.num_groups() != data.num_groups())
    throw Error(Errc::DimensionMismatch, "group stats do not match dataset");
  return log_gamma_from_errors(stats.n_r, group_errors(data, params.beta), params);
}

Responsibilities e_step(const Eigen::MatrixXd& log_gamma) {
  Responsibilities tau(log_gamma.rows(), log_gamma.cols());
  for (Index r = 0; r < log_gamma.rows(); ++r) {
    const double lse = logsumexp(log_gamma.row(r));
    tau.row(r) = (log_gamma.row(r).array() - lse).exp();
    // Guard the last ulp so every row sums to one.
    tau.row(r) /= tau.row(r).sum();
  }
  return tau;
}

Eigen::VectorXd m_step_pi(const Responsibilities& tau) {
  return tau.colwise().sum().transpose() / static_cast<double>(tau.rows());
}

Eigen::MatrixXd normalized_weights(const Eigen::VectorXd& n_r, const Responsibilities& tau) {
  if (tau.rows() != n_r.size()) throw Error(Errc::DimensionMismatch, "tau rows differ from group count");
  Eigen::MatrixXd w = tau.array().colwise() * n_r.array();
  const double threshold = kEmptyClusterFraction * n_r.sum();
  for (Index k = 0; k < w.cols(); ++k) {
    const double total = w.col(k).sum();
    if (!(total >= threshold) || total <= 0.0)
      throw Error(Errc::EmptyCluster, "cluster " + std::to_string(k) + " has no weight");
    w.col(k) /= total;
  }
  return w;
}

Eigen::MatrixXd m_step_beta(const GroupStats& stats, const Responsibilities& tau, double ridge) {
  const Index p = stats.p();
  const Index K = tau.cols();
  const Eigen::MatrixXd w = normalized_weights(stats.n_r, tau);
  Eigen::MatrixXd beta(p, K);
  for (Index k = 0; k < K; ++k) {
    Eigen::MatrixXd sigma_t = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rho_t = Eigen::VectorXd::Zero(p);
    for (Index r = 0; r < stats.num_groups(); ++r) {
      const double wr = w(r, k);
      if (wr == 0.0) continue;
      sigma_t.noalias() += wr * stats.sigma_hat[r];
      rho_t.noalias() += wr * stats.rho_hat[r];
    }
    const double scale = sigma_t.trace() / static_cast<double>(p);
    bool solved = false;
    for (double rel = ridge; rel <= kMaxRelativeRidge; rel = (rel == 0.0 ? 1e-10 : rel * 10.0)) {
      Eigen::MatrixXd a = sigma_t;
      a.diagonal().array() += rel * scale;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond)) continue;
      beta.col(k) = llt.solve(rho_t);
      solved = beta.col(k).allFinite();
      if (solved) break;
    }
    if (!solved)
      throw Error(Errc::SingularSystem, "weighted covariance of cluster " + std::to_string(k) + " is singular");
  }
  return beta;
}

Eigen::VectorXd sigma2_from_errors(const Eigen::VectorXd& n_r, const Responsibilities& tau,
                                   const Eigen::MatrixXd& errors, double floor) {
  const Eigen::MatrixXd w = normalized_weights(n_r, tau);
  Eigen::VectorXd s2 = (w.array() * errors.array()).colwise().sum().transpose();
  return s2.cwiseMax(floor);
}

Eigen::VectorXd m_step_sigma2(const GroupedDataset& data, const Responsibilities& tau,
                              const Eigen::MatrixXd& beta, double floor) {
  Eigen::VectorXd n_r(data.num_groups());
  for (Index r = 0; r < data.num_groups(); ++r) n_r(r) = static_cast<double>(data.groups[r].size());
  return sigma2_from_errors(n_r, tau, group_errors(data, beta), floor);
}

double log_marginal_likelihood(const Eigen::MatrixXd& log_gamma) {
  double ll = 0.0;
  for (Index r = 0; r < log_gamma.rows(); ++r) ll += logsumexp(log_gamma.row(r));
  return ll;
}

Responsibilities init_responsibilities(const GroupStats& stats, int K, InitStrategy strategy,
                                       std::uint64_t seed) {
  const Index R = stats.num_groups();
  if (K < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
  if (R < 1) throw Error(Errc::EmptyGroup, "no groups to initialize");
  std::mt19937_64 rng(seed);

  switch (strategy) {
    case InitStrategy::RandomSoft: {
      std::exponential_distribution<double> expo(1.0);
      Responsibilities tau(R, K);
      for (Index r = 0; r < R; ++r) {
        for (Index k = 0; k < K; ++k) tau(r, k) = expo(rng);
        tau.row(r) /= tau.row(r).sum();
      }
      return tau;
    }
    case InitStrategy::RandomHard: {
      if (R < K) throw Error(Errc::TooFewGroups, "random_hard needs R >= K");
      std::uniform_int_distribution<int> pick(0, K - 1);
      Labels labels(R);
      for (auto& l : labels) l = pick(rng);
      repair_empty_clusters(labels, K, rng);
      return one_hot(labels, K);
    }
    case InitStrategy::KMeansOnGroupCoefs: {
      if (R < K) throw Error(Errc::TooFewGroups, "kmeans initialization needs R >= K");
      const Index p = stats.p();
      std::vector<Eigen::VectorXd> coefs;
      coefs.reserve(R);
      for (Index r = 0; r < R; ++r) {
        Eigen::MatrixXd a = stats.sigma_hat[r];
        const double tr = a.trace();
        a.diagonal().array() += tr > 0.0 ? 1e-6 * tr / static_cast<double>(p) : 1e-6;
        coefs.push_back(a.ldlt().solve(stats.rho_hat[r]));
      }
      Labels labels = kmeans_labels(coefs, K, rng);
      repair_empty_clusters(labels, K, rng);
      return one_hot(labels, K);
    }
  }
  throw Error(Errc::InvalidArgument, "unknown init strategy");
}

FitResult run_em(const GroupedDataset& data, const GroupStats& stats, const EmConfig& cfg,
                 Responsibilities tau) {
  validate_config(cfg);
  if (tau.rows() != data.num_groups() || tau.cols() != cfg.K)
    throw Error(Errc::DimensionMismatch, "initial responsibilities must be R x K");
  const double floor = cfg.sigma2_floor.value_or(default_sigma2_floor(data));

  FitResult out;
  out.group_ids = data.group_ids();
  out.ll_trace.reserve(static_cast<std::size_t>(cfg.max_iter));
  for (int t = 1; t <= cfg.max_iter; ++t) {
    ModelParams theta;
    theta.pi = m_step_pi(tau);
    theta.beta = m_step_beta(stats, tau, cfg.ridge);
    const Eigen::MatrixXd errors = group_errors(data, theta.beta);
    theta.sigma2 = sigma2_from_errors(stats.n_r, tau, errors, floor);

    const Eigen::MatrixXd lg = log_gamma_from_errors(stats.n_r, errors, theta);
    const double ll = log_marginal_likelihood(lg);
    if (!std::isfinite(ll)) throw Error(Errc::NonFinite, "log-likelihood is not finite");
    Responsibilities next = e_step(lg);
    const double change = (next - tau).cwiseAbs().maxCoeff();

    tau = std::move(next);
    out.params = std::move(theta);
    out.ll_trace.push_back(ll);
    out.log_likelihood = ll;
    out.n_iter = t;
    if (change < cfg.epsilon) {
      out.converged = true;
      break;
    }
  }
  out.tau = std::move(tau);
  return out;
}

FitResult fit(const GroupedDataset& data, const EmConfig& cfg) {
  validate_config(cfg);
  const GroupStats stats = compute_group_stats(data);
  const Index R = data.num_groups();

  std::vector<std::string> warnings;
  InitStrategy strategy = cfg.init;
  if (cfg.K > R) {
    warnings.push_back("K=" + std::to_string(cfg.K) + " exceeds the number of groups R=" + std::to_string(R) +
                       "; using random_soft initialization");
    strategy = InitStrategy::RandomSoft;
  }

  struct Attempt {
    std::optional<FitResult> result;
    std::string error;
  };
  std::vector<Attempt> attempts(static_cast<std::size_t>(cfg.n_restarts));
  parallel_for(attempts.size(), cfg.jobs, [&](std::size_t i) {
    try {
      const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(i)});
      attempts[i].result = run_em(data, stats, cfg, init_responsibilities(stats, cfg.K, strategy, seed));
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::EmptyCluster:
        case Errc::SingularSystem:
        case Errc::NonFinite:
          attempts[i].error = e.what();
          break;
        default:
          throw;
      }
    }
  });

  int best = -1;
  int failed = 0;
  std::string last_error;
  for (std::size_t i = 0; i < attempts.size(); ++i) {
    if (!attempts[i].result) {
      ++failed;
      last_error = attempts[i].error;
      continue;
    }
    if (best < 0 || attempts[i].result->log_likelihood > attempts[best].result->log_likelihood)
      best = static_cast<int>(i);
  }
  if (best < 0)
    throw Error(Errc::AllRestartsFailed,
                "all " + std::to_string(cfg.n_restarts) + " restarts failed; last: " + last_error);

  FitResult out = std::move(*attempts[best].result);
  out.best_restart = best;
  out.failed_restarts = failed;
  out.warnings = std::move(warnings);
  return out;
}

}  // namespace gmr
