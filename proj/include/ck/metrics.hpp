#ifndef CK_METRICS_HPP
#define CK_METRICS_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ck/prediction.hpp"

#include "json.hpp"

namespace ck {

// Optional aggregation of alternatives for the share RMSE (e.g. pooling two
// closely related alternatives). Groups must partition the alternatives.
struct ShareGroups {
  std::vector<std::string> names;
  std::vector<std::vector<int>> groups;
};

ShareGroups singleton_groups(const std::vector<std::string>& alternatives);

// Mean over rows of the probability assigned to the chosen alternative.
double avg_chosen_probability(const PredictionTable& pt);

// Per-individual variant: mean over individuals of their row means.
double avg_chosen_probability_by_individual(const PredictionTable& pt);

// RMSE between predicted and observed shares over groups; predicted group
// share is the row mean of the summed member probabilities. Divides by the
// group count G.
double rmse_shares(const PredictionTable& pt, std::span<const double> true_shares,
                   const ShareGroups* groups = nullptr);

// Probabilistic true positive rate per alternative: sum of P_j over rows where
// j was chosen, divided by the times j was chosen. Absent for never-chosen j.
std::vector<std::optional<double>> tpr(const PredictionTable& pt);

struct MetricCell {
  std::string model;
  PredCase pcase = PredCase::Case1;
  Conditioning conditioning = Conditioning::None;
  bool missing = true;
  long n_rows = 0;
  double avg_chosen = 0.0;
  double avg_chosen_by_individual = 0.0;
  double rmse = 0.0;
  std::vector<std::optional<double>> tpr_by_alt;
};

struct MetricReport {
  std::vector<std::string> models;
  std::vector<std::string> alternatives;
  ShareGroups groups;
  std::vector<MetricCell> cells;  // model-major, then case, then conditioning
  long populated = 0;
};

// Builds the (model x case x conditioning) grid over the given tables; truth
// shares are supplied per case. Cells without a table (or with an empty one)
// become gap markers.
MetricReport assemble_report(const std::vector<PredictionTable>& tables,
                             const std::map<PredCase, std::vector<double>>& truth_by_case,
                             const ShareGroups* groups = nullptr);

std::string metrics_csv(const MetricReport& r);
nlohmann::json report_json(const MetricReport& r);

}  // namespace ck

#endif
