#include "gmr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "gmr/error.hpp"

namespace gmr::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double parse_double(const std::string& text, std::size_t line_no) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw Error(Errc::Parse, "line " + std::to_string(line_no) + ": '" + text + "' is not a number");
  return v;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  return in;
}

Json matrix_columns(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Index c = 0; c < m.cols(); ++c) {
    Json col = Json::array();
    for (Index r = 0; r < m.rows(); ++r) col.push_back(m(r, c));
    out.push_back(std::move(col));
  }
  return out;
}

Eigen::MatrixXd columns_matrix(const Json& j, Index rows, const char* what) {
  if (!j.is_array()) throw Error(Errc::Parse, std::string(what) + " must be an array of arrays");
  Eigen::MatrixXd m(rows, static_cast<Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    if (!j[c].is_array() || static_cast<Index>(j[c].size()) != rows)
      throw Error(Errc::Parse, std::string(what) + " column " + std::to_string(c) + " has the wrong length");
    for (Index r = 0; r < rows; ++r) m(r, static_cast<Index>(c)) = j[c][static_cast<std::size_t>(r)].get<double>();
  }
  return m;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd json_vector(const Json& j, const char* what) {
  if (!j.is_array()) throw Error(Errc::Parse, std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(Errc::Parse, std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

GroupedDataset read_dataset_csv(std::istream& in, bool allow_missing_response) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.size() < 3 || header[0] != "group" || header[1] != "y")
    throw Error(Errc::Parse, "dataset header must be 'group,y,x1,...,xp'");

  GroupedDataset data;
  data.p = static_cast<Index>(header.size() - 2);
  std::unordered_map<std::string, std::size_t> index_of;
  std::vector<std::vector<double>> ys;
  std::vector<std::vector<double>> xs;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(line_no) + " has " +
                                               std::to_string(fields.size()) + " fields, expected " +
                                               std::to_string(header.size()));
    auto [it, inserted] = index_of.emplace(fields[0], data.groups.size());
    if (inserted) {
      data.groups.push_back(Group{fields[0], {}, {}});
      ys.emplace_back();
      xs.emplace_back();
    }
    const std::size_t r = it->second;
    if (fields[1].empty() && allow_missing_response)
      ys[r].push_back(std::nan(""));
    else
      ys[r].push_back(parse_double(fields[1], line_no));
    for (std::size_t j = 2; j < fields.size(); ++j) xs[r].push_back(parse_double(fields[j], line_no));
  }
  for (std::size_t r = 0; r < data.groups.size(); ++r) {
    auto& g = data.groups[r];
    const auto n = static_cast<Index>(ys[r].size());
    g.responses = Eigen::Map<const Eigen::VectorXd>(ys[r].data(), n);
    g.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        xs[r].data(), n, data.p);
  }
  if (data.groups.empty()) throw Error(Errc::EmptyGroup, "dataset has no rows");
  if (!allow_missing_response) validate_dataset(data);
  return data;
}

GroupedDataset read_dataset_csv(const std::string& path, bool allow_missing_response) {
  auto in = open_input(path);
  return read_dataset_csv(in, allow_missing_response);
}

void write_dataset_csv(std::ostream& out, const GroupedDataset& data) {
  out << "group,y";
  for (Index j = 1; j <= data.p; ++j) out << ",x" << j;
  out << '\n';
  for (const auto& g : data.groups) {
    const std::string id = quote_if_needed(g.id);
    for (Index i = 0; i < g.size(); ++i) {
      out << id << ',' << format_double(g.responses(i));
      for (Index j = 0; j < data.p; ++j) out << ',' << format_double(g.features(i, j));
      out << '\n';
    }
  }
}

Json model_to_json(const FitResult& fit) {
  Json j;
  j["K"] = fit.params.K();
  j["p"] = fit.params.p();
  j["pi"] = vector_json(fit.params.pi);
  j["beta"] = matrix_columns(fit.params.beta);
  j["sigma2"] = vector_json(fit.params.sigma2);
  Json posteriors = Json::object();
  for (std::size_t r = 0; r < fit.group_ids.size(); ++r)
    posteriors[fit.group_ids[r]] = vector_json(fit.tau.row(static_cast<Index>(r)).transpose());
  j["group_posteriors"] = std::move(posteriors);
  j["log_likelihood"] = fit.log_likelihood;
  j["n_iter"] = fit.n_iter;
  j["converged"] = fit.converged;
  return j;
}

FitResult model_from_json(const Json& j) {
  FitResult fit;
  const auto K = require(j, "K").get<Index>();
  const auto p = require(j, "p").get<Index>();
  fit.params.pi = json_vector(require(j, "pi"), "pi");
  fit.params.beta = columns_matrix(require(j, "beta"), p, "beta");
  fit.params.sigma2 = json_vector(require(j, "sigma2"), "sigma2");
  if (fit.params.pi.size() != K || fit.params.beta.cols() != K || fit.params.sigma2.size() != K)
    throw Error(Errc::DimensionMismatch, "model arrays disagree with K");
  const auto& posteriors = require(j, "group_posteriors");
  fit.tau.resize(static_cast<Index>(posteriors.size()), K);
  Index r = 0;
  for (const auto& [id, row] : posteriors.items()) {
    const Eigen::VectorXd v = json_vector(row, "group posterior");
    if (v.size() != K) throw Error(Errc::DimensionMismatch, "posterior of group '" + id + "' has wrong length");
    fit.tau.row(r++) = v.transpose();
    fit.group_ids.push_back(id);
  }
  fit.log_likelihood = j.value("log_likelihood", 0.0);
  fit.n_iter = j.value("n_iter", 0);
  fit.converged = j.value("converged", false);
  return fit;
}

Json truth_to_json(const GroundTruth& truth, const SimConfig& cfg) {
  Json j;
  j["beta_true"] = matrix_columns(truth.beta_true);
  j["labels"] = truth.labels;
  j["group_ids"] = truth.group_ids;
  j["sigma"] = vector_json(truth.sigma_true);
  j["Sigma_x"] = matrix_columns(truth.sigma_x);
  Json c;
  c["K"] = cfg.K;
  c["p"] = cfg.p;
  c["G"] = cfg.G;
  c["n"] = cfg.n;
  c["sigma"] = cfg.sigma;
  c["delta_beta"] = cfg.delta_beta;
  c["wishart_df"] = cfg.wishart_df.value_or(cfg.p + 2);
  c["seed"] = cfg.seed;
  j["config"] = std::move(c);
  return j;
}

GroundTruth truth_from_json(const Json& j) {
  GroundTruth t;
  const auto& beta = require(j, "beta_true");
  if (!beta.is_array() || beta.empty()) throw Error(Errc::Parse, "beta_true must be a non-empty array");
  t.beta_true = columns_matrix(beta, static_cast<Index>(beta[0].size()), "beta_true");
  t.labels = require(j, "labels").get<Labels>();
  t.group_ids = require(j, "group_ids").get<std::vector<std::string>>();
  if (t.labels.size() != t.group_ids.size())
    throw Error(Errc::LengthMismatch, "labels and group_ids differ in length");
  if (j.contains("sigma")) t.sigma_true = json_vector(j.at("sigma"), "sigma");
  if (j.contains("Sigma_x")) {
    const auto& s = j.at("Sigma_x");
    t.sigma_x = columns_matrix(s, static_cast<Index>(s.size()), "Sigma_x");
  }
  return t;
}

void write_predictions_csv(std::ostream& out, const std::vector<ObservationPrediction>& preds) {
  out << "group,y_true,y_pred,log_density,used_fallback\n";
  for (const auto& p : preds) {
    out << quote_if_needed(p.group) << ',' << (p.y_true ? format_double(*p.y_true) : "") << ','
        << format_double(p.y_pred) << ',' << (p.log_density ? format_double(*p.log_density) : "") << ','
        << (p.used_fallback ? 1 : 0) << '\n';
  }
}

std::vector<ObservationPrediction> read_predictions_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || split_csv_line(line) !=
                                     std::vector<std::string>{"group", "y_true", "y_pred", "log_density", "used_fallback"})
    throw Error(Errc::Parse, "prediction header must be 'group,y_true,y_pred,log_density,used_fallback'");
  std::vector<ObservationPrediction> preds;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw Error(Errc::Parse, "line " + std::to_string(line_no) + " must have 5 fields");
    ObservationPrediction p;
    p.group = f[0];
    if (!f[1].empty()) p.y_true = parse_double(f[1], line_no);
    p.y_pred = parse_double(f[2], line_no);
    if (!f[3].empty()) p.log_density = parse_double(f[3], line_no);
    p.used_fallback = f[4] == "1";
    preds.push_back(std::move(p));
  }
  return preds;
}

Json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, path + ": " + e.what());
  }
}

}  // namespace gmr::io
