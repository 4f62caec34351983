#ifndef CK_SYNTH_HPP
#define CK_SYNTH_HPP

#include <map>
#include <string>
#include <vector>

#include "ck/data.hpp"
#include "ck/model.hpp"

#include "json.hpp"

namespace ck {

struct AttributeGen {
  double min = 0.0;
  double max = 1.0;
};

struct CovariateGen {
  double rate = 0.5;  // Bernoulli
};

// Synthetic data-generating process: a model plus true parameter values.
// Every individual draws its coefficients (or class) once; each task draws
// fresh attributes and samples the choice from the kernel probabilities.
struct DgpSpec {
  ModelSpec model;
  std::map<std::string, double> true_params;
  int individuals = 100;
  int tasks = 2;
  std::uint64_t seed = 0;
  std::map<std::string, AttributeGen> attributes;
  std::map<std::string, CovariateGen> covariates;
};

DgpSpec parse_dgp_spec(const nlohmann::json& j, const std::string& base_dir = {});
DgpSpec load_dgp_spec(const std::string& path);

struct SimulatedData {
  ChoiceDataset data;
  Schema schema;
  ParameterVector true_values;                // full parameter vector at truth
  std::vector<std::vector<double>> true_beta; // [individual][coefficient slot]
  std::vector<int> true_class;                // [individual]; -1 without classes
};

Schema dgp_schema(const DgpSpec& dgp);

SimulatedData simulate_dataset(const DgpSpec& dgp);

// Ground-truth comparator: kernel probabilities at the individual's true
// coefficients (and true class for the nesting parameters).
std::vector<double> oracle_choice_probs(const CompiledModel& cm, const SimulatedData& sim,
                                        int individual, const BoundIndividual& bi, int t);

void write_truth(const SimulatedData& sim, const CompiledModel& cm, const std::string& path);

}  // namespace ck

#endif
