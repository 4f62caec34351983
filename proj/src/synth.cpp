#include "ck/synth.hpp"

#include <cmath>
#include <filesystem>

#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/rng.hpp"

namespace ck {

namespace {
constexpr std::uint64_t kCovStream = 0x434f56ULL;   // covariates
constexpr std::uint64_t kBetaStream = 0x42455441ULL;
constexpr std::uint64_t kClassStream = 0x434c53ULL;
constexpr std::uint64_t kAttrStream = 0x41545452ULL;
constexpr std::uint64_t kChoiceStream = 0x43484f49ULL;
}  // namespace

DgpSpec parse_dgp_spec(const nlohmann::json& j, const std::string& base_dir) {
  DgpSpec dgp;
  if (j.contains("model_file")) {
    std::filesystem::path p = j["model_file"].get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    dgp.model = load_model_spec(p.string());
  } else if (j.contains("model")) {
    dgp.model = parse_model_spec(j["model"]);
  } else {
    throw ConfigError("dgp spec: needs 'model' (inline) or 'model_file'");
  }
  if (dgp.model.alternatives.empty())
    throw ConfigError("dgp spec: the model must list its alternatives");
  if (!j.contains("true_parameters"))
    throw ConfigError("dgp spec: 'true_parameters' is required");
  for (const auto& [name, v] : j["true_parameters"].items())
    dgp.true_params[name] = v.get<double>();
  dgp.individuals = j.value("individuals", 100);
  dgp.tasks = j.value("tasks", 2);
  dgp.seed = j.value("seed", 0ULL);
  if (j.contains("attributes"))
    for (const auto& [name, g] : j["attributes"].items())
      dgp.attributes[name] = {g.value("min", 0.0), g.value("max", 1.0)};
  if (j.contains("covariates"))
    for (const auto& [name, g] : j["covariates"].items())
      dgp.covariates[name] = {g.value("rate", 0.5)};
  if (dgp.individuals < 1 || dgp.tasks < 1)
    throw ConfigError("dgp spec: individuals and tasks must be >= 1");
  return dgp;
}

DgpSpec load_dgp_spec(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("dgp spec '" + path + "': " + e.what());
  }
  return parse_dgp_spec(j, std::filesystem::path(path).parent_path().string());
}

Schema dgp_schema(const DgpSpec& dgp) {
  Schema s;
  s.alternatives = dgp.model.alternatives;
  for (const auto& [name, gen] : dgp.attributes) s.attributes.push_back(name);
  for (const auto& [name, gen] : dgp.covariates) s.covariates.push_back(name);
  return s;
}

SimulatedData simulate_dataset(const DgpSpec& dgp) {
  const Schema schema = dgp_schema(dgp);
  const CompiledModel cm = compile_model(dgp.model, schema);

  ParameterVector truth = cm.start;
  for (const auto& [name, v] : dgp.true_params) {
    const int i = truth.index_of(name);
    if (i < 0) throw ConfigError("dgp true parameter '" + name + "' unknown to the model");
    if (truth.fixed(i) && truth.value(i) != v)
      throw ConfigError("dgp true parameter '" + name + "' is pinned by the model");
    truth.set_value(i, v);
  }
  for (int i : truth.free_indices())
    if (!dgp.true_params.count(truth.name(i)))
      throw ConfigError("dgp spec: no true value given for parameter '" + truth.name(i) + "'");

  const int J = cm.n_alts;
  const int A = static_cast<int>(schema.attributes.size());
  const int S = cm.n_classes;

  SimulatedData sim;
  sim.schema = schema;
  sim.true_values = truth;
  sim.data.schema = schema;
  sim.true_beta.resize(dgp.individuals);
  sim.true_class.assign(dgp.individuals, -1);

  for (int n = 0; n < dgp.individuals; ++n) {
    Individual ind;
    ind.id = "id" + std::to_string(n + 1);

    // covariates
    ind.covariates.resize(schema.covariates.size());
    {
      Rng rng(mix_key(dgp.seed, kCovStream, static_cast<std::uint64_t>(n)));
      std::size_t c = 0;
      for (const auto& [name, gen] : dgp.covariates)
        ind.covariates[c++] = rng.bernoulli(gen.rate) ? 1.0 : 0.0;
    }

    // the individual's location on the heterogeneity distribution
    int cls = 0;
    if (S > 1) {
      Rng rng(mix_key(dgp.seed, kClassStream, static_cast<std::uint64_t>(n)));
      const auto pi = class_allocation_probs(cm, truth, ind.covariates);
      cls = rng.categorical(pi);
      sim.true_class[n] = cls;
    }
    std::vector<double> xi(cm.n_dims);
    for (int d = 0; d < cm.n_dims; ++d) {
      Rng rng(mix_key(dgp.seed, kBetaStream, static_cast<std::uint64_t>(n),
                      static_cast<std::uint64_t>(d)));
      xi[d] = rng.uniform01();
    }
    std::vector<double> beta(cm.n_slots);
    cm.resolve_coefs(truth, cls, xi, beta);
    sim.true_beta[n] = beta;

    for (int t = 0; t < dgp.tasks; ++t) {
      Observation o;
      o.task = t + 1;
      o.avail.assign(J, 1);
      o.attrs.resize(static_cast<std::size_t>(J) * A);
      Rng arng(mix_key(dgp.seed, kAttrStream, static_cast<std::uint64_t>(n),
                       static_cast<std::uint64_t>(t)));
      int a = 0;
      for (const auto& [name, gen] : dgp.attributes) {
        for (int jv = 0; jv < J; ++jv) o.attrs[static_cast<std::size_t>(jv) * A + a] =
            arng.uniform(gen.min, gen.max);
        ++a;
      }
      o.chosen = 0;  // placeholder until probabilities are known

      Individual tmp;
      tmp.id = ind.id;
      tmp.covariates = ind.covariates;
      tmp.obs.push_back(o);
      const auto bi = bind_individual(cm, tmp, n);
      const auto probs = kernel_probs(cm, truth, cls, beta, bi, 0);
      Rng crng(mix_key(dgp.seed, kChoiceStream, static_cast<std::uint64_t>(n),
                       static_cast<std::uint64_t>(t)));
      o.chosen = crng.categorical(probs);
      ind.obs.push_back(std::move(o));
    }
    sim.data.individuals.push_back(std::move(ind));
  }
  sim.data.validate();
  return sim;
}

std::vector<double> oracle_choice_probs(const CompiledModel& cm, const SimulatedData& sim,
                                        int individual, const BoundIndividual& bi, int t) {
  const int cls = sim.true_class[individual] >= 0 ? sim.true_class[individual] : 0;
  return kernel_probs(cm, sim.true_values, cls, sim.true_beta[individual], bi, t);
}

void write_truth(const SimulatedData& sim, const CompiledModel& cm, const std::string& path) {
  std::string out = "indiv_id,class";
  for (const auto& slot : cm.slots) out += ",beta_" + slot.name;
  out += "\n";
  for (std::size_t n = 0; n < sim.data.individuals.size(); ++n) {
    out += sim.data.individuals[n].id;
    out += "," + (sim.true_class[n] >= 0 ? std::to_string(sim.true_class[n] + 1) : std::string{});
    for (double b : sim.true_beta[n]) out += "," + fmt_double(b);
    out += "\n";
  }
  write_text_file(path, out);
}

}  // namespace ck
