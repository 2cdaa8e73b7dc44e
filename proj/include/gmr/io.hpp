#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmr/dataset.hpp"
#include "gmr/em.hpp"
#include "gmr/prediction.hpp"
#include "gmr/synthgen.hpp"

namespace gmr::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

// Dataset CSV: header `group,y,x1,...,xp`; groups ordered by first appearance.
// With allow_missing_response, an empty y cell is read as NaN.
GroupedDataset read_dataset_csv(std::istream& in, bool allow_missing_response = false);
GroupedDataset read_dataset_csv(const std::string& path, bool allow_missing_response = false);
void write_dataset_csv(std::ostream& out, const GroupedDataset& data);

// Model JSON: K, p, pi, beta (K arrays of length p), sigma2, group_posteriors,
// plus log_likelihood, n_iter, converged.
Json model_to_json(const FitResult& fit);
FitResult model_from_json(const Json& j);

Json truth_to_json(const GroundTruth& truth, const SimConfig& cfg);
GroundTruth truth_from_json(const Json& j);

/// Header `group,y_true,y_pred,log_density,used_fallback`; unknown values are empty.
void write_predictions_csv(std::ostream& out, const std::vector<ObservationPrediction>& preds);
std::vector<ObservationPrediction> read_predictions_csv(std::istream& in);

Json read_json_file(const std::string& path);

}  // namespace gmr::io
