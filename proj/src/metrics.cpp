#include "ck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ck/error.hpp"
#include "ck/io.hpp"

namespace ck {

ShareGroups singleton_groups(const std::vector<std::string>& alternatives) {
  ShareGroups g;
  g.names = alternatives;
  for (std::size_t j = 0; j < alternatives.size(); ++j)
    g.groups.push_back({static_cast<int>(j)});
  return g;
}

double avg_chosen_probability(const PredictionTable& pt) {
  if (pt.rows.empty()) throw ConfigError("avg_chosen_probability: empty prediction table");
  double sum = 0.0;
  for (const auto& row : pt.rows) {
    if (row.chosen < 0) throw ConfigError("avg_chosen_probability: row without chosen alternative");
    sum += row.probs[row.chosen];
  }
  return sum / static_cast<double>(pt.rows.size());
}

double avg_chosen_probability_by_individual(const PredictionTable& pt) {
  if (pt.rows.empty()) throw ConfigError("avg_chosen_probability: empty prediction table");
  double total = 0.0;
  long individuals = 0;
  std::size_t i = 0;
  while (i < pt.rows.size()) {
    std::size_t k = i;
    double s = 0.0;
    while (k < pt.rows.size() && pt.rows[k].indiv_id == pt.rows[i].indiv_id) {
      s += pt.rows[k].probs[pt.rows[k].chosen];
      ++k;
    }
    total += s / static_cast<double>(k - i);
    ++individuals;
    i = k;
  }
  return total / static_cast<double>(individuals);
}

double rmse_shares(const PredictionTable& pt, std::span<const double> true_shares,
                   const ShareGroups* groups) {
  if (pt.rows.empty()) throw ConfigError("rmse_shares: empty prediction table");
  const std::size_t J = pt.alternatives.size();
  ShareGroups singles;
  if (!groups) {
    singles = singleton_groups(pt.alternatives);
    groups = &singles;
  }
  std::vector<std::uint8_t> seen(J, 0);
  for (const auto& g : groups->groups)
    for (int j : g) {
      if (j < 0 || j >= static_cast<int>(J) || seen[j])
        throw ConfigError("rmse_shares: groups must partition the alternatives");
      seen[j] = 1;
    }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw ConfigError("rmse_shares: groups must cover every alternative");

  const auto G = groups->groups.size();
  double sq = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    double pred = 0.0;
    double truth = 0.0;
    for (int j : groups->groups[g]) {
      for (const auto& row : pt.rows) pred += row.probs[j];
      truth += true_shares[j];
    }
    pred /= static_cast<double>(pt.rows.size());
    sq += (pred - truth) * (pred - truth);
  }
  return std::sqrt(sq / static_cast<double>(G));
}

std::vector<std::optional<double>> tpr(const PredictionTable& pt) {
  const std::size_t J = pt.alternatives.size();
  std::vector<double> num(J, 0.0);
  std::vector<long> den(J, 0);
  for (const auto& row : pt.rows) {
    if (row.chosen < 0) throw ConfigError("tpr: row without chosen alternative");
    num[row.chosen] += row.probs[row.chosen];
    den[row.chosen] += 1;
  }
  std::vector<std::optional<double>> out(J);
  for (std::size_t j = 0; j < J; ++j)
    if (den[j] > 0) out[j] = num[j] / static_cast<double>(den[j]);
  return out;
}

MetricReport assemble_report(const std::vector<PredictionTable>& tables,
                             const std::map<PredCase, std::vector<double>>& truth_by_case,
                             const ShareGroups* groups) {
  MetricReport rep;
  if (tables.empty()) throw ConfigError("assemble_report: no prediction tables");
  rep.alternatives = tables.front().alternatives;
  for (const auto& t : tables)
    if (t.alternatives != rep.alternatives)
      throw ConfigError("assemble_report: tables disagree on alternatives");
  rep.groups = groups ? *groups : singleton_groups(rep.alternatives);

  std::set<std::string> model_set;
  bool any_posterior = false;
  for (const auto& t : tables) {
    model_set.insert(t.model);
    if (t.conditioning == Conditioning::Posterior) any_posterior = true;
  }
  rep.models.assign(model_set.begin(), model_set.end());

  const PredCase cases[] = {PredCase::Case1, PredCase::Case2, PredCase::Case3};
  std::vector<Conditioning> conds = {Conditioning::None};
  if (any_posterior) conds.push_back(Conditioning::Posterior);

  for (const auto& model : rep.models) {
    for (PredCase c : cases) {
      for (Conditioning cond : conds) {
        MetricCell cell;
        cell.model = model;
        cell.pcase = c;
        cell.conditioning = cond;
        const PredictionTable* found = nullptr;
        for (const auto& t : tables)
          if (t.model == model && t.pcase == c && t.conditioning == cond) found = &t;
        if (found && !found->rows.empty()) {
          cell.missing = false;
          cell.n_rows = static_cast<long>(found->rows.size());
          cell.avg_chosen = avg_chosen_probability(*found);
          cell.avg_chosen_by_individual = avg_chosen_probability_by_individual(*found);
          const auto it = truth_by_case.find(c);
          if (it == truth_by_case.end())
            throw ConfigError("assemble_report: no truth shares for " + to_string(c));
          cell.rmse = rmse_shares(*found, it->second, &rep.groups);
          cell.tpr_by_alt = tpr(*found);
          ++rep.populated;
        }
        rep.cells.push_back(std::move(cell));
      }
    }
  }
  return rep;
}

std::string metrics_csv(const MetricReport& r) {
  std::string out = "model,case,conditioning,metric,alternative,value\n";
  for (const auto& cell : r.cells) {
    const std::string prefix =
        cell.model + "," + to_string(cell.pcase) + "," + to_string(cell.conditioning) + ",";
    if (cell.missing) {
      out += prefix + "missing,,1\n";
      continue;
    }
    out += prefix + "n_rows,," + std::to_string(cell.n_rows) + "\n";
    out += prefix + "avg_chosen_probability,," + fmt_double(cell.avg_chosen) + "\n";
    out += prefix + "avg_chosen_probability_by_individual,," +
           fmt_double(cell.avg_chosen_by_individual) + "\n";
    out += prefix + "rmse_shares,," + fmt_double(cell.rmse) + "\n";
    for (std::size_t j = 0; j < cell.tpr_by_alt.size(); ++j)
      if (cell.tpr_by_alt[j])
        out += prefix + "tpr," + r.alternatives[j] + "," + fmt_double(*cell.tpr_by_alt[j]) + "\n";
  }
  return out;
}

nlohmann::json report_json(const MetricReport& r) {
  nlohmann::json j;
  j["alternatives"] = r.alternatives;
  j["models"] = r.models;
  j["share_groups"] = nlohmann::json::object();
  for (std::size_t g = 0; g < r.groups.names.size(); ++g) {
    nlohmann::json members = nlohmann::json::array();
    for (int a : r.groups.groups[g]) members.push_back(r.alternatives[a]);
    j["share_groups"][r.groups.names[g]] = members;
  }
  j["rmse_denominator"] = "G";
  j["populated_cells"] = r.populated;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : r.cells) {
    nlohmann::json cj;
    cj["model"] = cell.model;
    cj["case"] = to_string(cell.pcase);
    cj["conditioning"] = to_string(cell.conditioning);
    if (cell.missing) {
      cj["missing"] = true;
    } else {
      cj["missing"] = false;
      cj["n_rows"] = cell.n_rows;
      cj["avg_chosen_probability"] = cell.avg_chosen;
      cj["avg_chosen_probability_by_individual"] = cell.avg_chosen_by_individual;
      cj["rmse_shares"] = cell.rmse;
      nlohmann::json tj = nlohmann::json::object();
      for (std::size_t a = 0; a < cell.tpr_by_alt.size(); ++a)
        if (cell.tpr_by_alt[a]) tj[r.alternatives[a]] = *cell.tpr_by_alt[a];
      cj["tpr"] = tj;
    }
    cells.push_back(cj);
  }
  j["cells"] = cells;
  return j;
}

}  // namespace ck
