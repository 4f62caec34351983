#include "ck/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/rng.hpp"

namespace ck {

namespace {
int index_of(const std::vector<std::string>& v, std::string_view s) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] == s) return static_cast<int>(i);
  return -1;
}
}  // namespace

int Schema::alt_index(std::string_view id) const { return index_of(alternatives, id); }
int Schema::attr_index(std::string_view name) const { return index_of(attributes, name); }
int Schema::cov_index(std::string_view name) const { return index_of(covariates, name); }

std::size_t ChoiceDataset::n_obs() const {
  std::size_t n = 0;
  for (const auto& ind : individuals) n += ind.obs.size();
  return n;
}

int ChoiceDataset::find_individual(std::string_view id) const {
  for (std::size_t i = 0; i < individuals.size(); ++i)
    if (individuals[i].id == id) return static_cast<int>(i);
  return -1;
}

void ChoiceDataset::validate() const {
  const std::size_t J = schema.alternatives.size();
  const std::size_t A = schema.attributes.size();
  if (schema.alternatives.empty()) throw ConfigError("dataset schema has no alternatives");
  {
    std::set<std::string> seen(schema.alternatives.begin(), schema.alternatives.end());
    if (seen.size() != J) throw ConfigError("duplicate alternative ids in schema");
  }
  std::set<std::string> ids;
  for (const auto& ind : individuals) {
    if (!ids.insert(ind.id).second)
      throw ConfigError("duplicate individual id '" + ind.id + "'");
    if (ind.obs.empty())
      throw ConfigError("individual '" + ind.id + "' has no observations");
    if (ind.covariates.size() != schema.covariates.size())
      throw ConfigError("individual '" + ind.id + "' covariate count mismatch");
    int prev_task = std::numeric_limits<int>::min();
    for (const auto& o : ind.obs) {
      if (o.task <= prev_task)
        throw ConfigError("individual '" + ind.id + "': task indices not strictly increasing");
      prev_task = o.task;
      if (o.avail.size() != J || o.attrs.size() != J * A)
        throw ConfigError("individual '" + ind.id + "': observation shape mismatch");
      if (o.chosen < 0 || o.chosen >= static_cast<int>(J))
        throw ConfigError("individual '" + ind.id + "': chosen alternative out of range");
      if (!o.avail[o.chosen])
        throw ConfigError("individual '" + ind.id + "', task " + std::to_string(o.task) +
                          ": chosen alternative unavailable");
      if (std::none_of(o.avail.begin(), o.avail.end(), [](std::uint8_t a) { return a != 0; }))
        throw ConfigError("individual '" + ind.id + "': no available alternative");
      for (double x : o.attrs)
        if (!std::isfinite(x))
          throw ConfigError("individual '" + ind.id + "': non-finite attribute value");
    }
  }
}

ChoiceDataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset file: " + path);
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    int i = index_of(header, name);
    if (i < 0) throw ConfigError("missing column '" + name + "' in " + path);
    return i;
  };

  const std::size_t J = schema.alternatives.size();
  const std::size_t A = schema.attributes.size();
  const int c_id = col("indiv_id");
  const int c_task = col("task");
  const int c_choice = col("choice");
  std::vector<int> c_avail(J), c_cov(schema.covariates.size());
  std::vector<int> c_attr(J * A);
  for (std::size_t j = 0; j < J; ++j) c_avail[j] = col("avail_" + schema.alternatives[j]);
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t j = 0; j < J; ++j)
      c_attr[j * A + a] = col(schema.attributes[a] + "_" + schema.alternatives[j]);
  for (std::size_t c = 0; c < schema.covariates.size(); ++c) c_cov[c] = col(schema.covariates[c]);

  ChoiceDataset ds;
  ds.schema = schema;
  std::unordered_map<std::string, std::size_t> ind_index;
  std::set<std::pair<std::string, int>> seen_keys;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto tok = split_csv_line(line);
    if (tok.size() != header.size())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(tok.size()));
    const std::string ctx = path + ":" + std::to_string(line_no);

    const std::string& id = tok[c_id];
    const int task = static_cast<int>(parse_long(tok[c_task], ctx + " task"));
    if (!seen_keys.insert({id, task}).second)
      throw ConfigError(ctx + ": duplicate (individual, task) key (" + id + ", " +
                        std::to_string(task) + ")");

    Observation o;
    o.task = task;
    o.avail.resize(J);
    o.attrs.resize(J * A);
    const int chosen = schema.alt_index(tok[c_choice]);
    if (chosen < 0)
      throw ConfigError(ctx + ": unknown choice alternative '" + tok[c_choice] + "'");
    o.chosen = chosen;
    for (std::size_t j = 0; j < J; ++j) {
      const double av = parse_double(tok[c_avail[j]], ctx + " availability");
      if (av != 0.0 && av != 1.0)
        throw ConfigError(ctx + ": availability must be 0 or 1");
      o.avail[j] = av != 0.0;
    }
    if (!o.avail[chosen])
      throw ConfigError(ctx + ": chosen alternative unavailable");
    for (std::size_t k = 0; k < J * A; ++k)
      o.attrs[k] = parse_double(tok[c_attr[k]], ctx + " attribute");

    std::vector<double> covs(schema.covariates.size());
    for (std::size_t c = 0; c < covs.size(); ++c)
      covs[c] = parse_double(tok[c_cov[c]], ctx + " covariate");

    auto it = ind_index.find(id);
    if (it == ind_index.end()) {
      ind_index.emplace(id, ds.individuals.size());
      Individual ind;
      ind.id = id;
      ind.covariates = std::move(covs);
      ind.obs.push_back(std::move(o));
      ds.individuals.push_back(std::move(ind));
    } else {
      Individual& ind = ds.individuals[it->second];
      if (covs != ind.covariates)
        throw ConfigError(ctx + ": covariates differ across rows of individual '" + id + "'");
      ind.obs.push_back(std::move(o));
    }
  }

  for (auto& ind : ds.individuals)
    std::sort(ind.obs.begin(), ind.obs.end(),
              [](const Observation& a, const Observation& b) { return a.task < b.task; });

  ds.validate();
  return ds;
}

void write_dataset(const ChoiceDataset& ds, const std::string& path) {
  const auto& s = ds.schema;
  const std::size_t J = s.alternatives.size();
  const std::size_t A = s.attributes.size();
  std::ostringstream out;
  out << "indiv_id,task,choice";
  for (const auto& alt : s.alternatives) out << ",avail_" << alt;
  for (const auto& attr : s.attributes)
    for (const auto& alt : s.alternatives) out << "," << attr << "_" << alt;
  for (const auto& cov : s.covariates) out << "," << cov;
  out << "\n";
  for (const auto& ind : ds.individuals) {
    for (const auto& o : ind.obs) {
      out << ind.id << "," << o.task << "," << s.alternatives[o.chosen];
      for (std::size_t j = 0; j < J; ++j) out << "," << int(o.avail[j]);
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t j = 0; j < J; ++j) out << "," << fmt_double(o.attrs[j * A + a]);
      for (double c : ind.covariates) out << "," << fmt_double(c);
      out << "\n";
    }
  }
  write_text_file(path, out.str());
}

SplitDataset split_dataset(const ChoiceDataset& ds, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ConfigError("holdout_fraction must lie in (0,1)");
  for (const auto& ind : ds.individuals)
    if (ind.obs.size() < 2)
      throw ConfigError("split_dataset: individual '" + ind.id +
                        "' has a single observation; the final-choice holdout requires at "
                        "least two per individual");

  const std::size_t n = ds.n_individuals();
  const auto retained_count =
      static_cast<std::size_t>(std::ceil((1.0 - holdout_fraction) * static_cast<double>(n)));

  // seeded Fisher-Yates over individual indices; first retained_count are kept
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_key(seed, 0x53504c4954ULL));  // "SPLIT" stream
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::uint8_t> retained(n, 0);
  for (std::size_t i = 0; i < retained_count && i < n; ++i) retained[order[i]] = 1;

  SplitDataset out;
  out.holdout_fraction = holdout_fraction;
  out.split_seed = seed;
  out.estimation.schema = ds.schema;
  out.new_individuals.schema = ds.schema;
  out.last_choices.schema = ds.schema;
  for (std::size_t i = 0; i < n; ++i) {
    const Individual& ind = ds.individuals[i];
    if (!retained[i]) {
      out.new_individuals.individuals.push_back(ind);
      continue;
    }
    Individual est = ind;
    Individual last = ind;
    last.obs.assign(1, est.obs.back());
    est.obs.pop_back();
    out.estimation.individuals.push_back(std::move(est));
    out.last_choices.individuals.push_back(std::move(last));
  }
  return out;
}

std::vector<double> observed_shares(const ChoiceDataset& ds) {
  if (ds.individuals.empty()) throw ConfigError("observed_shares: empty dataset");
  std::vector<double> counts(ds.schema.alternatives.size(), 0.0);
  double total = 0.0;
  for (const auto& ind : ds.individuals)
    for (const auto& o : ind.obs) {
      counts[o.chosen] += 1.0;
      total += 1.0;
    }
  for (auto& c : counts) c /= total;
  return counts;
}

}  // namespace ck
