#ifndef CK_DATA_HPP
#define CK_DATA_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ck {

// Column layout shared by every dataset file:
//   indiv_id, task, choice, avail_<alt>..., <attr>_<alt>..., <covariate>...
// Attribute columns exist for every (attribute, alternative) pair.
struct Schema {
  std::vector<std::string> alternatives;
  std::vector<std::string> attributes;
  std::vector<std::string> covariates;

  int alt_index(std::string_view id) const;
  int attr_index(std::string_view name) const;
  int cov_index(std::string_view name) const;
  bool operator==(const Schema&) const = default;
};

// One choice situation. Attribute values are stored row-major as
// attrs[alt * n_attributes + attr].
struct Observation {
  int task = 0;
  std::vector<std::uint8_t> avail;
  std::vector<double> attrs;
  int chosen = -1;

  double attr(int alt, int a, int n_attrs) const { return attrs[alt * n_attrs + a]; }
};

struct Individual {
  std::string id;
  std::vector<double> covariates;
  std::vector<Observation> obs;
};

class ChoiceDataset {
public:
  Schema schema;
  std::vector<Individual> individuals;

  std::size_t n_individuals() const { return individuals.size(); }
  std::size_t n_obs() const;
  int find_individual(std::string_view id) const;  // -1 if absent

  // Throws ConfigError on any invariant violation (chosen unavailable,
  // non-finite attribute, no available alternative, non-increasing tasks).
  void validate() const;
};

// The three-way split: estimation sample (case 1), held-out individuals
// (case 2) and the final choice of each estimation individual (case 3).
struct SplitDataset {
  ChoiceDataset estimation;
  ChoiceDataset new_individuals;
  ChoiceDataset last_choices;
  double holdout_fraction = 0.0;
  std::uint64_t split_seed = 0;
};

ChoiceDataset load_dataset(const std::string& path, const Schema& schema);
void write_dataset(const ChoiceDataset& ds, const std::string& path);

// Retains ceil((1-holdout_fraction)*N) individuals (uniformly without
// replacement, seeded); their final observation moves to last_choices.
// Individuals with a single observation are rejected.
SplitDataset split_dataset(const ChoiceDataset& ds, double holdout_fraction, std::uint64_t seed);

// share_j = (# times j chosen) / (total observations); sums to 1.
std::vector<double> observed_shares(const ChoiceDataset& ds);

}  // namespace ck

#endif
