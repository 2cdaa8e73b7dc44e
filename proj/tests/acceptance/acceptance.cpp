// Acceptance gate: runs every criterion and prints one PASS/FAIL line each.
// Exit status is 0 only when all criteria pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../test_util.hpp"
#include "gmr/benchmark.hpp"
#include "gmr/cli.hpp"
#include "gmr/em.hpp"
#include "gmr/error.hpp"
#include "gmr/evaluation.hpp"
#include "gmr/prediction.hpp"
#include "gmr/random.hpp"
#include "gmr/selection.hpp"
#include "gmr/synthgen.hpp"

using namespace gmr;

namespace {

constexpr std::uint64_t kSeed = 2024;

struct Outcome {
  bool pass;
  std::string detail;
};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<CellSummary> run_cells(BenchmarkSpec spec) {
  spec.seed = kSeed;
  const auto reps = run_benchmark(spec, jobs());
  return aggregate(reps, expand_grid(spec));
}

BenchmarkSpec cell(int K, int p, int n, int G, std::vector<double> sigma, std::vector<double> delta) {
  BenchmarkSpec spec;
  spec.K = {K};
  spec.p = {p};
  spec.n = {n};
  spec.G = {G};
  spec.sigma = std::move(sigma);
  spec.delta_beta = std::move(delta);
  spec.n_reps = 50;
  return spec;
}

Outcome easy_recovery() {
  const auto s = run_cells(cell(2, 2, 800, 10, {2}, {12}))[0];
  return {s.mean_nmi >= 0.98, fmt("mean NMI %.4f (need >= 0.98), %d failed reps", s.mean_nmi, s.n_failed)};
}

Outcome hard_failure() {
  const auto s = run_cells(cell(2, 2, 100, 10, {10}, {4}))[0];
  return {s.mean_nmi <= 0.25, fmt("mean NMI %.4f (need <= 0.25)", s.mean_nmi)};
}

// A curve passes if it has at most one adjacent-pair violation, of size <= slack.
bool monotone(const std::vector<double>& v, bool increasing, double slack, std::string& trace) {
  int violations = 0;
  bool ok = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = increasing ? v[i] - v[i - 1] : v[i - 1] - v[i];
    if (step < 0.0) {
      ++violations;
      if (-step > slack) ok = false;
    }
  }
  for (double x : v) trace += fmt("%.3f ", x);
  trace += "| ";
  return ok && violations <= 1;
}

Outcome monotone_trends() {
  const std::vector<double> sigmas = {2, 4, 6, 8, 10}, deltas = {4, 8, 12};
  const auto summary = run_cells(cell(2, 2, 200, 10, sigmas, deltas));
  std::map<std::pair<double, double>, double> nmi_at;
  for (const auto& s : summary) nmi_at[{s.cell.delta_beta, s.cell.sigma}] = s.mean_nmi;
  bool ok = true;
  std::string trace = "NMI vs sigma per delta: ";
  for (double d : deltas) {
    std::vector<double> curve;
    for (double s : sigmas) curve.push_back(nmi_at[{d, s}]);
    ok = monotone(curve, false, 0.03, trace) && ok;
  }
  trace += " NMI vs delta per sigma: ";
  for (double s : sigmas) {
    std::vector<double> curve;
    for (double d : deltas) curve.push_back(nmi_at[{d, s}]);
    ok = monotone(curve, true, 0.03, trace) && ok;
  }
  return {ok, trace};
}

Outcome group_structure_benefit() {
  const auto summary = run_cells(cell(4, 4, 200, 10, {2, 4, 6, 8, 10}, {8}));
  bool ok = true;
  std::string trace = "sigma: GMR vs FMR rmse: ";
  for (const auto& s : summary) {
    const double g = s.mean_rmse_test.value_or(NAN), f = s.mean_rmse_test_fmr.value_or(NAN);
    ok = ok && g < f;
    trace += fmt("%g: %.3f vs %.3f%s; ", s.cell.sigma, g, f, g < f ? "" : " (not below)");
  }
  return {ok, trace};
}

Outcome k_selection() {
  constexpr int kRuns = 10;
  const std::vector<int> grid = {2, 3, 4, 5, 6, 7, 8};
  std::map<int, int> votes;
  std::map<int, double> mean_by_k;
  for (int run = 0; run < kRuns; ++run) {
    SimConfig sc;
    sc.K = 4;
    sc.p = 4;
    sc.n = 200;
    sc.G = 10;
    sc.sigma = 6;
    sc.delta_beta = 8;
    sc.seed = derive_seed(kSeed, {5, static_cast<std::uint64_t>(run)});
    const auto data = generate(sc).data;
    const auto report = select_k(data, grid, EmConfig{}, 0.2, 10, derive_seed(sc.seed, {1}), jobs());
    ++votes[report.best_mixture_k];
    for (const auto& s : report.rmse_by_k) mean_by_k[s.K] += s.mean_rmse / kRuns;
  }
  const auto modal = std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) {
                       return a.second < b.second || (a.second == b.second && a.first > b.first);
                     })->first;
  const double base = std::min(mean_by_k[0], mean_by_k[1]);
  bool below = true;
  std::string trace = fmt("modal best mixture K = %d (need 4); votes:", modal);
  for (auto [k, v] : votes) trace += fmt(" K%d x%d", k, v);
  trace += "; mean rmse by K:";
  for (auto [k, v] : mean_by_k) {
    trace += fmt(" %d:%.3f", k, v);
    if (k >= 2 && !(v < base)) below = false;
  }
  if (!below) trace += " (some K >= 2 not below both baselines)";
  return {modal == 4 && below, trace};
}

Outcome iteration_counts() {
  const auto easy = run_cells(cell(2, 2, 800, 10, {2}, {12}))[0];
  const auto hard = run_cells(cell(4, 4, 100, 10, {10}, {4}))[0];
  const double capped = 1.0 - hard.frac_converged;
  const bool ok = easy.mean_n_iter <= 10 && (hard.mean_n_iter >= 50 || capped >= 0.25);
  return {ok, fmt("easy mean %.2f (need <= 10); hard mean %.1f, %.0f%% hit max_iter (need mean >= 50 or >= 25%%)",
                  easy.mean_n_iter, hard.mean_n_iter, 100 * capped)};
}

Outcome group_count_effect() {
  const auto summary = run_cells(cell(2, 2, 100, 1, {6}, {12}));
  auto spec = cell(2, 2, 100, 50, {6}, {12});
  const auto many = run_cells(spec)[0];
  const double diff = summary[0].mean_nmi - many.mean_nmi;
  return {diff >= 0.1, fmt("NMI G=1 %.3f, G=50 %.3f, difference %.3f (need >= 0.1)", summary[0].mean_nmi,
                           many.mean_nmi, diff)};
}

Outcome em_monotonicity() {
  std::mt19937_64 rng(kSeed);
  const int Ks[] = {1, 2, 4}, ps[] = {1, 2, 4};
  int checked = 0, worst_trial = -1;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int K = Ks[trial % 3], p = ps[(trial / 3) % 3];
    SimConfig sc;
    sc.K = std::min(K, p + 1);
    sc.p = p;
    sc.G = 4 + trial % 5;
    sc.n = sc.K * sc.G * (2 + trial % 6);
    sc.sigma = 0.5 + (trial % 7);
    sc.delta_beta = 2.0 + (trial % 11);
    sc.seed = rng();
    const auto data = generate(sc).data;
    EmConfig cfg;
    cfg.K = K;
    cfg.max_iter = 200;
    const auto stats = compute_group_stats(data);
    FitResult r;
    try {
      r = run_em(data, stats, cfg, init_responsibilities(stats, K, InitStrategy::RandomSoft, rng()));
    } catch (const Error&) {
      continue;  // degenerate start; monotonicity is only defined along completed steps
    }
    ++checked;
    for (std::size_t t = 1; t < r.ll_trace.size(); ++t) {
      const double drop = r.ll_trace[t - 1] - r.ll_trace[t];
      const double allowed = 1e-8 * (1.0 + std::abs(r.ll_trace[t]));
      if (drop - allowed > worst) worst = drop - allowed, worst_trial = trial;
    }
  }
  const auto where = worst_trial < 0 ? std::string("no decrease beyond slack")
                                     : fmt("worst excess decrease %.3g in instance %d", worst, worst_trial);
  return {worst <= 0.0 && checked >= 90, fmt("%d instances checked; ", checked) + where};
}

Outcome m_step_oracle() {
  std::mt19937_64 rng(kSeed + 9);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; checked < 500 && trial < 5000; ++trial) {
    const int R = 1 + trial % 4, p = 1 + (trial / 4) % 2, K = 1 + trial % 3;
    const auto d = gmr::testing::random_dataset(rng, R, 1, 3, p);
    const auto tau = gmr::testing::random_tau(rng, R, K);
    const auto beta = m_step_beta(compute_group_stats(d), tau, 0.0);
    for (int k = 0; k < K; ++k) {
      // Normal equations assembled observation by observation.
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
      for (int r = 0; r < R; ++r) {
        const auto& g = d.groups[r];
        for (Index i = 0; i < g.size(); ++i) {
          for (int u = 0; u < p; ++u) {
            b(u) += tau(r, k) * g.responses(i) * g.features(i, u);
            for (int v = 0; v < p; ++v) a(u, v) += tau(r, k) * g.features(i, u) * g.features(i, v);
          }
        }
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
      const double cond = svd.singularValues()(0) / svd.singularValues()(p - 1);
      if (!(cond < 1e4)) continue;
      const Eigen::VectorXd oracle = a.fullPivLu().solve(b);
      worst = std::max(worst, (beta.col(k) - oracle).norm() / std::max(oracle.norm(), 1e-300));
      ++checked;
    }
  }
  return {worst <= 1e-9 && checked >= 500, fmt("%d well-posed solves, worst relative error %.3g (need <= 1e-9)",
                                               checked, worst)};
}

Outcome beta_error_identity() {
  std::mt19937_64 rng(kSeed + 10);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int R = 2 + trial % 30, kt = 1 + trial % 4, ke = 1 + (trial / 4) % 4, p = 1 + trial % 5;
    std::uniform_int_distribution<int> lt(0, kt - 1), le(0, ke - 1);
    Labels t(R), e(R);
    for (int r = 0; r < R; ++r) t[r] = lt(rng), e[r] = le(rng);
    const Eigen::MatrixXd bt = Eigen::MatrixXd::NullaryExpr(p, kt, [&] { return 3 * z(rng); });
    const Eigen::MatrixXd be = Eigen::MatrixXd::NullaryExpr(p, ke, [&] { return 3 * z(rng); });
    double direct = 0.0;
    for (int r = 0; r < R; ++r) direct += (be.col(e[r]) - bt.col(t[r])).squaredNorm();
    direct /= R;
    worst = std::max(worst, std::abs(beta_error(bt, be, confusion(t, e, kt, ke)) - direct));
  }
  return {worst <= 1e-12, fmt("100 instances, worst |tr(D'F) - direct| = %.3g (need <= 1e-12)", worst)};
}

Outcome reductions() {
  std::mt19937_64 rng(kSeed + 11);
  double ols_gap = 0.0, fmr_gap = 0.0, row_gap = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = gmr::testing::random_dataset(rng, 3 + trial % 10, 2, 12, 1 + trial % 4);
    EmConfig cfg;
    cfg.K = 1;
    cfg.n_restarts = 1;
    const auto f = fit(d, cfg);
    const Eigen::VectorXd ols = gmr::testing::weighted_ols(d, Eigen::VectorXd::Ones(d.num_groups()));
    ols_gap = std::max(ols_gap, (f.params.beta.col(0) - ols).norm() / std::max(1.0, ols.norm()));

    ModelParams m;
    const int K = 1 + trial % 5;
    m.pi = gmr::testing::random_tau(rng, 1, K).row(0).transpose();
    m.beta = Eigen::MatrixXd::Random(d.p, K) * 10;
    m.sigma2 = Eigen::VectorXd::Ones(K);
    for (const auto& g : d.groups)
      for (Index i = 0; i < g.size(); ++i) {
        const Eigen::VectorXd x = g.features.row(i).transpose();
        fmr_gap = std::max(fmr_gap, std::abs(map_predict_gmr(m, m.pi, x) - map_predict_fmr(m, x)));
      }

    Eigen::MatrixXd lg = Eigen::MatrixXd::Random(50, K) * std::pow(10.0, trial % 7);
    const auto tau = e_step(lg);
    row_gap = std::max(row_gap, (tau.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }
  const bool ok = ols_gap <= 1e-8 && fmr_gap <= 1e-12 && row_gap <= 1e-10;
  return {ok, fmt("K=1 vs OLS %.3g (<= 1e-8); tau=pi vs FMR %.3g (<= 1e-12); row sums %.3g (<= 1e-10)", ols_gap,
                  fmr_gap, row_gap)};
}

Outcome simplex_construction() {
  double worst = 0.0;
  int shapes = 0;
  for (int p = 1; p <= 16; ++p)
    for (int K = 1; K <= std::min(8, p + 1); ++K) {
      const double delta = 12.0;
      const auto b = simplex_betas(K, p, delta, derive_seed(kSeed, {12, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(K)}));
      const double n0 = b.col(0).norm();
      for (int k = 0; k < K; ++k) {
        worst = std::max(worst, std::abs(b.col(k).norm() - n0));
        for (int l = k + 1; l < K; ++l) worst = std::max(worst, std::abs((b.col(k) - b.col(l)).norm() - delta));
      }
      ++shapes;
    }
  return {worst <= 1e-9, fmt("%d (K, p) shapes, worst deviation %.3g (need <= 1e-9)", shapes, worst)};
}

Outcome cli_determinism() {
  const std::vector<std::string> files = {"d.csv", "t.json", "m.json", "p.csv", "e.json", "s.csv", "s.json",
                                          "b.jsonl", "b.csv"};
  gmr::testing::TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    {
      std::ofstream spec(dir->file("spec.json"));
      spec << R"({"n": 100, "K": 2, "p": 2, "G": 10, "sigma": [2, 6], "delta_beta": 8, "n_reps": 4, "seed": 3})";
    }
    const std::vector<std::vector<std::string>> steps = {
        {"simulate", "--n", "200", "--K", "2", "--p", "2", "--G", "10", "--sigma", "4", "--delta-beta", "8",
         "--seed", "13", "--out", dir->file("d.csv"), "--truth", dir->file("t.json")},
        {"fit", dir->file("d.csv"), "--K", "2", "--seed", "5", "--jobs", "4", "--out", dir->file("m.json")},
        {"predict", "--model", dir->file("m.json"), "--data", dir->file("d.csv"), "--out", dir->file("p.csv")},
        {"evaluate", "--model", dir->file("m.json"), "--truth", dir->file("t.json"), "--predictions",
         dir->file("p.csv"), "--out", dir->file("e.json")},
        {"select-k", dir->file("d.csv"), "--k-grid", "2,3", "--reps", "3", "--seed", "8", "--jobs", "4", "--out",
         dir->file("s.csv"), "--json", dir->file("s.json")},
        {"benchmark", dir->file("spec.json"), "--jobs", "4", "--out", dir->file("b.jsonl"), "--summary",
         dir->file("b.csv")}};
    for (const auto& args : steps) {
      std::ostringstream out, err;
      if (cli::run(args, out, err) != 0) return {false, "'" + args[0] + "' failed: " + err.str()};
    }
  }
  for (const auto& f : files)
    if (gmr::testing::slurp(a.file(f)) != gmr::testing::slurp(b.file(f))) return {false, f + " differs between runs"};
  return {true, fmt("%zu output files byte-identical across two runs of simulate/fit/predict/evaluate/select-k/benchmark",
                    files.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"C1 easy-regime recovery", easy_recovery},
      {"C2 hard-regime failure", hard_failure},
      {"C3 monotone trends", monotone_trends},
      {"C4 group-structure benefit", group_structure_benefit},
      {"C5 K selection", k_selection},
      {"C6 iteration counts", iteration_counts},
      {"C7 group-count effect", group_count_effect},
      {"C8 EM monotonicity", em_monotonicity},
      {"C9 M-step oracle equivalence", m_step_oracle},
      {"C10 beta-error identity", beta_error_identity},
      {"C11 reductions", reductions},
      {"C12 simplex construction", simplex_construction},
      {"C13 CLI determinism", cli_determinism},
  };
  int passed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %-30s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    passed += o.pass ? 1 : 0;
  }
  std::printf("%d/%zu criteria passed\n", passed, criteria.size());
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
