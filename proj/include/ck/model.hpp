#ifndef CK_MODEL_HPP
#define CK_MODEL_HPP

#include <string>
#include <vector>

#include "ck/data.hpp"
#include "ck/mixing.hpp"
#include "ck/params.hpp"

#include "json.hpp"

namespace ck {

// One named coefficient of the utility specification.
struct Coefficient {
  std::string name;
  MixingKind mixing = MixingKind::Fixed;
  std::string shared_base;    // coefficients sharing a base reuse one xi column
  std::string shared_spread;  // coefficients sharing a spread reuse one b/sigma parameter
  bool generic = false;       // in latent-class models: not copied per class
  bool pinned = false;        // normalization: fixed at pinned_value
  double pinned_value = 0.0;
};

// coef * multiplier enters the utility of `alt`. The multiplier is 1 for a
// constant, the alternative's attribute value, or the individual's covariate.
struct UtilityTerm {
  std::string coef;
  std::string alt;
  std::string attribute;
  std::string covariate;
};

struct NestSpec {
  std::string name;
  std::vector<std::string> members;
  bool generic_lambda = false;  // share lambda across classes
};

struct ClassSpec {
  int count = 1;
  std::vector<std::string> allocation_covariates;
};

struct ModelSpec {
  std::string name = "model";
  std::string kernel = "mnl";  // "mnl" or "nl"
  std::vector<std::string> alternatives;
  std::vector<Coefficient> coefficients;
  std::vector<UtilityTerm> terms;
  std::vector<NestSpec> nests;
  ClassSpec classes;
};

ModelSpec parse_model_spec(const nlohmann::json& j);
ModelSpec load_model_spec(const std::string& path);
nlohmann::json model_spec_json(const ModelSpec& spec);

enum class Family { Plain, Mixed, LatentClass };

// A coefficient resolved against the parameter layout. loc/spread hold one
// parameter index per class (generic coefficients repeat the same index).
struct CoefSlot {
  std::string name;
  MixingKind kind = MixingKind::Fixed;
  int xi_dim = -1;  // base-draw dimension; -1 for fixed coefficients
  std::vector<int> loc;
  std::vector<int> spread;

  MixingSpec mixing_at(const ParameterVector& p, int cls) const {
    MixingSpec m;
    m.kind = kind;
    m.loc = p.value(loc[cls]);
    m.spread = spread[cls] >= 0 ? p.value(spread[cls]) : 0.0;
    return m;
  }
};

struct CompiledTermSource {
  int alt = 0;
  int slot = 0;
  int kind = 0;    // 0 constant, 1 attribute, 2 covariate
  int column = 0;  // attribute or covariate index
};

// Nests cover every alternative; singletons get lambda fixed at 1 (param -1).
struct CompiledNest {
  std::string name;
  std::vector<int> members;
  std::vector<int> lambda_param;  // per class; -1 means fixed at 1
};

struct CompiledAllocation {
  std::vector<int> cov_columns;            // covariate indices used by the allocation model
  std::vector<int> intercept;              // per class; -1 for the base class
  std::vector<std::vector<int>> cov_coef;  // [class][cov] parameter indices; empty for base
};

// ModelSpec resolved against a dataset schema: slot table, term table,
// nest table, allocation table and the parameter layout with start values.
class CompiledModel {
public:
  ModelSpec spec;
  Schema schema;
  int n_alts = 0;
  int n_classes = 1;
  int n_slots = 0;
  int n_dims = 0;  // random base dimensions

  std::vector<CoefSlot> slots;
  std::vector<CompiledTermSource> terms;
  std::vector<CompiledNest> nests;  // empty for a plain MNL kernel
  std::vector<int> nest_of_alt;
  CompiledAllocation alloc;
  ParameterVector start;

  Family family() const;
  bool has_nests() const { return !nests.empty(); }
  int slot_index(std::string_view coef) const;  // -1 if absent

  // Coefficient values for class `cls`; xi holds one base draw per dimension
  // (may be empty for models without random heterogeneity).
  void resolve_coefs(const ParameterVector& p, int cls, std::span<const double> xi,
                     std::span<double> beta) const;

  // Per-nest lambda values for class `cls` (1 for singletons).
  std::vector<double> lambdas(const ParameterVector& p, int cls) const;
};

CompiledModel compile_model(const ModelSpec& spec, const Schema& schema);

// pi_ns over classes for one individual's covariates (softmax, class 1 base).
std::vector<double> class_allocation_probs(const CompiledModel& cm, const ParameterVector& p,
                                           std::span<const double> covariates);

// Per-observation design rows flattened as m[t*(J*C) + j*C + c].
struct BoundIndividual {
  int n = 0;
  int T = 0;
  std::vector<double> m;
  std::vector<std::uint8_t> avail;
  std::vector<int> chosen;
};

struct BoundData {
  const CompiledModel* model = nullptr;
  const ChoiceDataset* data = nullptr;
  std::vector<BoundIndividual> ind;
  std::size_t n_obs = 0;
};

BoundData bind_data(const CompiledModel& cm, const ChoiceDataset& ds);
BoundIndividual bind_individual(const CompiledModel& cm, const Individual& ind, int n);

// Kernel probabilities for observation t of a bound individual at coefficient
// values beta; lambda comes from class `cls`. Unavailable alternatives get 0.
std::vector<double> kernel_probs(const CompiledModel& cm, const ParameterVector& p, int cls,
                                 std::span<const double> beta, const BoundIndividual& bi, int t);

}  // namespace ck

#endif
