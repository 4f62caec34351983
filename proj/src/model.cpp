#include "ck/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/kernels.hpp"
#include "ck/stats.hpp"

namespace ck {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_string())
    throw ConfigError(ctx + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

ModelSpec parse_model_spec(const json& j) {
  ModelSpec spec;
  if (!j.is_object()) throw ConfigError("model spec: expected a JSON object");
  if (j.contains("name")) spec.name = j["name"].get<std::string>();
  if (j.contains("kernel")) spec.kernel = j["kernel"].get<std::string>();
  if (spec.kernel != "mnl" && spec.kernel != "nl")
    throw ConfigError("model spec: kernel must be 'mnl' or 'nl'");
  if (j.contains("alternatives"))
    spec.alternatives = j["alternatives"].get<std::vector<std::string>>();

  if (j.contains("classes")) {
    const auto& c = j["classes"];
    spec.classes.count = c.value("count", 1);
    if (c.contains("allocation_covariates"))
      spec.classes.allocation_covariates =
          c["allocation_covariates"].get<std::vector<std::string>>();
  }

  if (!j.contains("coefficients") || !j["coefficients"].is_array())
    throw ConfigError("model spec: 'coefficients' array is required");
  for (const auto& cj : j["coefficients"]) {
    Coefficient c;
    c.name = require_string(cj, "name", "coefficient");
    if (cj.contains("mixing")) c.mixing = mixing_kind_from_string(cj["mixing"].get<std::string>());
    c.shared_base = cj.value("shared_base", std::string{});
    c.shared_spread = cj.value("shared_spread", std::string{});
    c.generic = cj.value("generic", false);
    if (cj.contains("fixed")) {
      c.pinned = true;
      c.pinned_value = cj["fixed"].get<double>();
    }
    spec.coefficients.push_back(std::move(c));
  }

  if (!j.contains("utilities") || !j["utilities"].is_object())
    throw ConfigError("model spec: 'utilities' object is required");
  for (const auto& [alt, terms] : j["utilities"].items()) {
    if (!terms.is_array())
      throw ConfigError("model spec: utilities." + alt + " must be an array");
    for (const auto& tj : terms) {
      UtilityTerm t;
      t.alt = alt;
      t.coef = require_string(tj, "coef", "utilities." + alt);
      t.attribute = tj.value("attribute", std::string{});
      t.covariate = tj.value("covariate", std::string{});
      if (!t.attribute.empty() && !t.covariate.empty())
        throw ConfigError("model spec: term for '" + t.coef +
                          "' sets both attribute and covariate");
      spec.terms.push_back(std::move(t));
    }
  }

  if (j.contains("nests")) {
    for (const auto& nj : j["nests"]) {
      NestSpec n;
      n.name = require_string(nj, "name", "nest");
      n.members = nj.at("alternatives").get<std::vector<std::string>>();
      n.generic_lambda = nj.value("generic_lambda", false);
      spec.nests.push_back(std::move(n));
    }
  }
  return spec;
}

ModelSpec load_model_spec(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("model spec '" + path + "': " + e.what());
  }
  return parse_model_spec(j);
}

nlohmann::json model_spec_json(const ModelSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["kernel"] = spec.kernel;
  j["alternatives"] = spec.alternatives;
  if (spec.classes.count > 1) {
    j["classes"] = {{"count", spec.classes.count}};
    if (!spec.classes.allocation_covariates.empty())
      j["classes"]["allocation_covariates"] = spec.classes.allocation_covariates;
  }
  json coefs = json::array();
  for (const auto& c : spec.coefficients) {
    json cj;
    cj["name"] = c.name;
    if (c.mixing != MixingKind::Fixed) cj["mixing"] = to_string(c.mixing);
    if (!c.shared_base.empty()) cj["shared_base"] = c.shared_base;
    if (!c.shared_spread.empty()) cj["shared_spread"] = c.shared_spread;
    if (c.generic) cj["generic"] = true;
    if (c.pinned) cj["fixed"] = c.pinned_value;
    coefs.push_back(cj);
  }
  j["coefficients"] = coefs;
  json utils = json::object();
  for (const auto& t : spec.terms) {
    json tj;
    tj["coef"] = t.coef;
    if (!t.attribute.empty()) tj["attribute"] = t.attribute;
    if (!t.covariate.empty()) tj["covariate"] = t.covariate;
    utils[t.alt].push_back(tj);
  }
  j["utilities"] = utils;
  if (!spec.nests.empty()) {
    json nests = json::array();
    for (const auto& n : spec.nests) {
      json nj;
      nj["name"] = n.name;
      nj["alternatives"] = n.members;
      if (n.generic_lambda) nj["generic_lambda"] = true;
      nests.push_back(nj);
    }
    j["nests"] = nests;
  }
  return j;
}

Family CompiledModel::family() const {
  if (n_classes > 1) return Family::LatentClass;
  for (const auto& s : slots)
    if (s.kind != MixingKind::Fixed) return Family::Mixed;
  return Family::Plain;
}

int CompiledModel::slot_index(std::string_view coef) const {
  for (int i = 0; i < n_slots; ++i)
    if (slots[i].name == coef) return i;
  return -1;
}

void CompiledModel::resolve_coefs(const ParameterVector& p, int cls, std::span<const double> xi,
                                  std::span<double> beta) const {
  for (int c = 0; c < n_slots; ++c) {
    const CoefSlot& s = slots[c];
    if (s.kind == MixingKind::Fixed) {
      beta[c] = p.value(s.loc[cls]);
    } else {
      beta[c] = transform_draw(s.mixing_at(p, cls), xi[s.xi_dim]);
    }
  }
}

std::vector<double> CompiledModel::lambdas(const ParameterVector& p, int cls) const {
  std::vector<double> out(nests.size(), 1.0);
  for (std::size_t g = 0; g < nests.size(); ++g) {
    const int pi = nests[g].lambda_param.empty() ? -1 : nests[g].lambda_param[cls];
    if (pi >= 0) out[g] = p.value(pi);
  }
  return out;
}

CompiledModel compile_model(const ModelSpec& spec, const Schema& schema) {
  CompiledModel cm;
  cm.spec = spec;
  cm.schema = schema;
  cm.n_alts = static_cast<int>(schema.alternatives.size());
  cm.n_classes = spec.classes.count;
  if (cm.n_classes < 1) throw ConfigError("model '" + spec.name + "': classes.count must be >= 1");
  const int S = cm.n_classes;

  if (!spec.alternatives.empty() && spec.alternatives != schema.alternatives)
    throw ConfigError("model '" + spec.name + "': alternatives do not match the dataset schema");

  // --- coefficient table ---
  std::set<std::string> names;
  for (const auto& c : spec.coefficients) {
    if (!names.insert(c.name).second)
      throw ConfigError("model '" + spec.name + "': duplicate coefficient '" + c.name + "'");
    if (c.pinned && c.mixing != MixingKind::Fixed)
      throw ConfigError("model '" + spec.name + "': pinned coefficient '" + c.name +
                        "' must have fixed mixing");
    if (S > 1 && c.mixing != MixingKind::Fixed)
      throw ConfigError("model '" + spec.name +
                        "': latent-class models take fixed coefficients only ('" + c.name +
                        "' is continuously mixed)");
  }

  std::set<std::string> used;
  for (const auto& t : spec.terms) used.insert(t.coef);
  for (const auto& c : spec.coefficients)
    if (!used.count(c.name))
      throw ConfigError("model '" + spec.name + "': coefficient '" + c.name +
                        "' never appears in a utility");

  // base-draw dimensions, grouped by shared_base
  std::vector<std::string> dim_names;
  auto dim_of = [&](const Coefficient& c) {
    const std::string key = c.shared_base.empty() ? c.name : c.shared_base;
    for (std::size_t i = 0; i < dim_names.size(); ++i)
      if (dim_names[i] == key) return static_cast<int>(i);
    dim_names.push_back(key);
    return static_cast<int>(dim_names.size()) - 1;
  };

  // spread parameters, shared via shared_spread groups
  std::vector<std::tuple<std::string, int, MixingKind>> spread_params;
  auto spread_param_of = [&](const Coefficient& c) -> int {
    const std::string group = c.shared_spread.empty() ? c.name : c.shared_spread;
    for (const auto& [g, idx, kind] : spread_params)
      if (g == group) {
        const bool both_lu = kind != MixingKind::Normal && c.mixing != MixingKind::Normal;
        if (kind != c.mixing && !both_lu)
          throw ConfigError("model '" + spec.name + "': spread group '" + group +
                            "' mixes normal and log-uniform coefficients");
        return idx;
      }
    const char* suffix = c.mixing == MixingKind::Normal ? ".sigma" : ".b";
    const double start = c.mixing == MixingKind::Normal ? 0.5 : 0.1;
    const int idx = cm.start.add(group + suffix, start);
    spread_params.emplace_back(group, idx, c.mixing);
    return idx;
  };

  for (const auto& c : spec.coefficients) {
    CoefSlot slot;
    slot.name = c.name;
    slot.kind = c.mixing;
    slot.loc.resize(S);
    slot.spread.assign(S, -1);
    const bool per_class = S > 1 && !c.generic;
    switch (c.mixing) {
      case MixingKind::Fixed: {
        if (per_class) {
          for (int s = 0; s < S; ++s) {
            // deterministic label-symmetry breaking: +-0.1 * class index
            const double perturb = c.pinned ? 0.0 : 0.1 * (s + 1) * ((s % 2 == 0) ? 1.0 : -1.0);
            slot.loc[s] = cm.start.add(c.name + ".c" + std::to_string(s + 1),
                                       c.pinned ? c.pinned_value : perturb, c.pinned);
          }
        } else {
          const int idx = cm.start.add(c.name, c.pinned ? c.pinned_value : 0.0, c.pinned);
          std::fill(slot.loc.begin(), slot.loc.end(), idx);
        }
        break;
      }
      case MixingKind::Normal: {
        const int loc = cm.start.add(c.name + ".mu", 0.0);
        const int spr = spread_param_of(c);
        std::fill(slot.loc.begin(), slot.loc.end(), loc);
        std::fill(slot.spread.begin(), slot.spread.end(), spr);
        slot.xi_dim = dim_of(c);
        break;
      }
      case MixingKind::NegLogUniform:
      case MixingKind::PosLogUniform: {
        const int loc = cm.start.add(c.name + ".a", -3.0);
        const int spr = spread_param_of(c);
        std::fill(slot.loc.begin(), slot.loc.end(), loc);
        std::fill(slot.spread.begin(), slot.spread.end(), spr);
        slot.xi_dim = dim_of(c);
        break;
      }
    }
    cm.slots.push_back(std::move(slot));
  }
  cm.n_slots = static_cast<int>(cm.slots.size());
  cm.n_dims = static_cast<int>(dim_names.size());

  // --- utility terms ---
  std::vector<bool> has_constant(cm.n_alts, false);
  for (const auto& t : spec.terms) {
    CompiledTermSource ct;
    ct.alt = schema.alt_index(t.alt);
    if (ct.alt < 0)
      throw ConfigError("model '" + spec.name + "': unknown alternative '" + t.alt + "'");
    ct.slot = cm.slot_index(t.coef);
    if (ct.slot < 0)
      throw ConfigError("model '" + spec.name + "': term references undeclared coefficient '" +
                        t.coef + "'");
    if (!t.attribute.empty()) {
      ct.kind = 1;
      ct.column = schema.attr_index(t.attribute);
      if (ct.column < 0)
        throw ConfigError("model '" + spec.name + "': unknown attribute '" + t.attribute + "'");
    } else if (!t.covariate.empty()) {
      ct.kind = 2;
      ct.column = schema.cov_index(t.covariate);
      if (ct.column < 0)
        throw ConfigError("model '" + spec.name + "': unknown covariate '" + t.covariate + "'");
    } else {
      ct.kind = 0;
      has_constant[ct.alt] = true;
    }
    cm.terms.push_back(ct);
  }
  if (std::all_of(has_constant.begin(), has_constant.end(), [](bool b) { return b; }))
    throw ConfigError("model '" + spec.name +
                      "': every alternative carries a constant; omit one as the zero base");

  // --- nests ---
  if (spec.kernel == "mnl" && !spec.nests.empty())
    throw ConfigError("model '" + spec.name + "': nests require kernel 'nl'");
  if (spec.kernel == "nl") {
    cm.nest_of_alt.assign(cm.n_alts, -1);
    for (const auto& n : spec.nests) {
      CompiledNest cn;
      cn.name = n.name;
      if (n.members.size() < 2)
        throw ConfigError("model '" + spec.name + "': nest '" + n.name +
                          "' needs at least two alternatives");
      for (const auto& a : n.members) {
        const int ai = schema.alt_index(a);
        if (ai < 0)
          throw ConfigError("model '" + spec.name + "': nest '" + n.name +
                            "' references unknown alternative '" + a + "'");
        if (cm.nest_of_alt[ai] >= 0)
          throw ConfigError("model '" + spec.name + "': alternative '" + a +
                            "' appears in more than one nest");
        cm.nest_of_alt[ai] = static_cast<int>(cm.nests.size());
        cn.members.push_back(ai);
      }
      cn.lambda_param.resize(S);
      if (S > 1 && !n.generic_lambda) {
        for (int s = 0; s < S; ++s)
          cn.lambda_param[s] = cm.start.add("lambda." + n.name + ".c" + std::to_string(s + 1), 1.0);
      } else {
        const int idx = cm.start.add("lambda." + n.name, 1.0);
        std::fill(cn.lambda_param.begin(), cn.lambda_param.end(), idx);
      }
      cm.nests.push_back(std::move(cn));
    }
    for (int a = 0; a < cm.n_alts; ++a) {
      if (cm.nest_of_alt[a] >= 0) continue;
      CompiledNest cn;
      cn.name = schema.alternatives[a];
      cn.members = {a};
      cn.lambda_param.assign(S, -1);
      cm.nest_of_alt[a] = static_cast<int>(cm.nests.size());
      cm.nests.push_back(std::move(cn));
    }
  }

  // --- class allocation ---
  if (S > 1) {
    cm.alloc.intercept.assign(S, -1);
    cm.alloc.cov_coef.resize(S);
    for (const auto& cov : spec.classes.allocation_covariates) {
      const int ci = schema.cov_index(cov);
      if (ci < 0)
        throw ConfigError("model '" + spec.name + "': unknown allocation covariate '" + cov + "'");
      cm.alloc.cov_columns.push_back(ci);
    }
    for (int s = 1; s < S; ++s) {
      cm.alloc.intercept[s] = cm.start.add("alloc.c" + std::to_string(s + 1), 0.0);
      for (const auto& cov : spec.classes.allocation_covariates)
        cm.alloc.cov_coef[s].push_back(
            cm.start.add("alloc.c" + std::to_string(s + 1) + "." + cov, 0.0));
    }
  }

  return cm;
}

std::vector<double> class_allocation_probs(const CompiledModel& cm, const ParameterVector& p,
                                           std::span<const double> covariates) {
  const int S = cm.n_classes;
  std::vector<double> v(S, 0.0);
  for (int s = 1; s < S; ++s) {
    double u = p.value(cm.alloc.intercept[s]);
    for (std::size_t c = 0; c < cm.alloc.cov_columns.size(); ++c)
      u += p.value(cm.alloc.cov_coef[s][c]) * covariates[cm.alloc.cov_columns[c]];
    v[s] = u;
  }
  const double lse = log_sum_exp(v);
  for (auto& x : v) x = std::exp(x - lse);
  return v;
}

BoundIndividual bind_individual(const CompiledModel& cm, const Individual& ind, int n) {
  const int J = cm.n_alts;
  const int C = cm.n_slots;
  const int A = static_cast<int>(cm.schema.attributes.size());
  BoundIndividual b;
  b.n = n;
  b.T = static_cast<int>(ind.obs.size());
  b.m.assign(static_cast<std::size_t>(b.T) * J * C, 0.0);
  b.avail.resize(static_cast<std::size_t>(b.T) * J);
  b.chosen.resize(b.T);
  for (int t = 0; t < b.T; ++t) {
    const Observation& o = ind.obs[t];
    b.chosen[t] = o.chosen;
    for (int j = 0; j < J; ++j) b.avail[t * J + j] = o.avail[j];
    double* mt = b.m.data() + static_cast<std::size_t>(t) * J * C;
    for (const auto& term : cm.terms) {
      double mult = 1.0;
      if (term.kind == 1) mult = o.attrs[term.alt * A + term.column];
      else if (term.kind == 2) mult = ind.covariates[term.column];
      mt[term.alt * C + term.slot] += mult;
    }
  }
  return b;
}

std::vector<double> kernel_probs(const CompiledModel& cm, const ParameterVector& p, int cls,
                                 std::span<const double> beta, const BoundIndividual& bi, int t) {
  const int J = cm.n_alts;
  const int C = cm.n_slots;
  std::vector<double> v(J, 0.0);
  const double* mt = bi.m.data() + static_cast<std::size_t>(t) * J * C;
  for (int j = 0; j < J; ++j) {
    const double* row = mt + static_cast<std::size_t>(j) * C;
    double u = 0.0;
    for (int c = 0; c < C; ++c) u += row[c] * beta[c];
    v[j] = u;
  }
  const std::span<const std::uint8_t> avail{bi.avail.data() + static_cast<std::size_t>(t) * J,
                                            static_cast<std::size_t>(J)};
  if (!cm.has_nests()) return mnl_probs(v, avail);
  std::vector<NestView> views;
  views.reserve(cm.nests.size());
  const auto lam = cm.lambdas(p, cls);
  for (std::size_t g = 0; g < cm.nests.size(); ++g)
    views.push_back({cm.nests[g].members, lam[g]});
  std::vector<double> logp(J);
  nl_log_probs(v, avail, views, logp);
  std::vector<double> out(J);
  for (int j = 0; j < J; ++j) out[j] = std::exp(logp[j]);
  return out;
}

BoundData bind_data(const CompiledModel& cm, const ChoiceDataset& ds) {
  if (!(ds.schema == cm.schema))
    throw ConfigError("bind_data: dataset schema differs from the model's schema");
  BoundData bd;
  bd.model = &cm;
  bd.data = &ds;
  bd.ind.reserve(ds.individuals.size());
  for (std::size_t i = 0; i < ds.individuals.size(); ++i)
    bd.ind.push_back(bind_individual(cm, ds.individuals[i], static_cast<int>(i)));
  bd.n_obs = ds.n_obs();
  return bd;
}

}  // namespace ck
