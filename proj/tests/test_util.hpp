#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gmr/dataset.hpp"

namespace gmr::testing {

inline Group make_group(std::string id, const std::vector<double>& y, const std::vector<std::vector<double>>& x) {
  Group g;
  g.id = std::move(id);
  g.responses = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Index>(y.size()));
  const Index p = x.empty() ? 0 : static_cast<Index>(x.front().size());
  g.features.resize(static_cast<Index>(x.size()), p);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (Index j = 0; j < p; ++j) g.features(static_cast<Index>(i), j) = x[i][static_cast<std::size_t>(j)];
  return g;
}

// Standard-normal features and responses; group sizes uniform in [n_min, n_max].
inline GroupedDataset random_dataset(std::mt19937_64& rng, int R, int n_min, int n_max, int p) {
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> size(n_min, n_max);
  GroupedDataset d;
  d.p = p;
  for (int r = 0; r < R; ++r) {
    Group g;
    g.id = "r" + std::to_string(r);
    const int n = size(rng);
    g.features.resize(n, p);
    g.responses.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) g.features(i, j) = z(rng);
      g.responses(i) = z(rng);
    }
    d.groups.push_back(std::move(g));
  }
  return d;
}

inline Responsibilities random_tau(std::mt19937_64& rng, Index R, Index K) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Responsibilities tau(R, K);
  for (Index r = 0; r < R; ++r) {
    for (Index k = 0; k < K; ++k) tau(r, k) = u(rng);
    tau.row(r) /= tau.row(r).sum();
  }
  return tau;
}

inline double normal_pdf(double x, double mean, double var) {
  const double pi = 3.14159265358979323846;
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * pi * var);
}

// Weighted least squares by QR on the sqrt-weighted stacked design; every
// observation of group r carries weight w[r].
inline Eigen::VectorXd weighted_ols(const GroupedDataset& d, const Eigen::VectorXd& w) {
  Eigen::MatrixXd a(d.num_observations(), d.p);
  Eigen::VectorXd b(d.num_observations());
  Index at = 0;
  for (Index r = 0; r < d.num_groups(); ++r) {
    const auto& g = d.groups[r];
    const double s = std::sqrt(w(r));
    a.middleRows(at, g.size()) = s * g.features;
    b.segment(at, g.size()) = s * g.responses;
    at += g.size();
  }
  return a.colPivHouseholderQr().solve(b);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gmr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace gmr::testing
