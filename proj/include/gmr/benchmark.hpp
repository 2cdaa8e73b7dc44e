#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmr/em.hpp"
#include "gmr/synthgen.hpp"

namespace gmr {

/// Grids over the simulation axes; every combination is one cell.
struct BenchmarkSpec {
  std::vector<int> n = {800};
  std::vector<int> K = {2};
  std::vector<int> p = {2};
  std::vector<int> G = {10};
  std::vector<double> sigma = {2.0};
  std::vector<double> delta_beta = {12.0};
  int n_reps = 50;
  double test_frac = 0.2;
  /// EM settings; K is taken from the cell.
  EmConfig em;
  std::uint64_t seed = 0;
};

struct Cell {
  int n = 0, K = 0, p = 0, G = 0;
  double sigma = 0.0, delta_beta = 0.0;
};

struct Replication {
  Cell cell;
  std::size_t cell_index = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double nmi = 0.0;
  double beta_error = 0.0;
  /// Absent when some group is too small to split.
  std::optional<double> rmse_train;
  std::optional<double> rmse_test;
  std::optional<double> rmse_test_fmr;
  int n_iter = 0;
  bool converged = false;
};

struct CellSummary {
  Cell cell;
  int n_ok = 0;
  int n_failed = 0;
  double mean_nmi = 0.0;
  double mean_beta_error = 0.0;
  std::optional<double> mean_rmse_train;
  std::optional<double> mean_rmse_test;
  std::optional<double> mean_rmse_test_fmr;
  double mean_n_iter = 0.0;
  double frac_converged = 0.0;
};

void validate_benchmark_spec(const BenchmarkSpec& spec);
BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j);

std::vector<Cell> expand_grid(const BenchmarkSpec& spec);

/// generate -> split -> fit -> predict -> evaluate for one seeded replication.
/// Groups with a single observation skip the split; the fit then uses all data.
Replication run_replication(const Cell& cell, std::size_t cell_index, int rep, const BenchmarkSpec& spec);

/// Runs every replication of every cell. on_done is called once per finished
/// replication (possibly from worker threads, serialized by the caller's lock).
/// The returned vector is ordered by (cell, rep).
std::vector<Replication> run_benchmark(const BenchmarkSpec& spec, int jobs = 1,
                                       const std::function<void(const Replication&)>& on_done = {});

std::vector<CellSummary> aggregate(const std::vector<Replication>& reps, const std::vector<Cell>& cells);

nlohmann::ordered_json to_json(const Replication& rep);
/// Header + one row per cell; column layout mirrors the simulation tables.
std::string summary_csv(const std::vector<CellSummary>& cells);

}  // namespace gmr
