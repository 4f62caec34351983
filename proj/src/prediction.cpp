#include "ck/prediction.hpp"

#include <algorithm>
#include <cmath>

#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/kernels.hpp"
#include "ck/likelihood.hpp"
#include "ck/parallel.hpp"
#include "ck/rng.hpp"
#include "ck/stats.hpp"

namespace ck {

std::string to_string(PredCase c) {
  switch (c) {
    case PredCase::Case1: return "case1";
    case PredCase::Case2: return "case2";
    case PredCase::Case3: return "case3";
  }
  return "?";
}

std::string to_string(Conditioning c) {
  return c == Conditioning::Posterior ? "posterior" : "none";
}

PredCase pred_case_from_string(std::string_view s) {
  if (s == "case1" || s == "1") return PredCase::Case1;
  if (s == "case2" || s == "2") return PredCase::Case2;
  if (s == "case3" || s == "3") return PredCase::Case3;
  throw ConfigError("unknown prediction case '" + std::string(s) + "'");
}

Conditioning conditioning_from_string(std::string_view s) {
  if (s == "none") return Conditioning::None;
  if (s == "posterior") return Conditioning::Posterior;
  throw ConfigError("unknown conditioning '" + std::string(s) + "'");
}

std::uint64_t population_draw_key() { return 0x504f505f44524157ULL; }

std::uint64_t id_draw_key(std::string_view indiv_id) {
  return fnv1a(indiv_id) | 0x8000000000000000ULL;
}

namespace {



std::vector<double> resolve_beta(const CompiledModel& cm, const ParameterVector& p, int cls,
                                 std::span<const double> xi) {
  std::vector<double> beta(cm.n_slots);
  cm.resolve_coefs(p, cls, xi, beta);
  return beta;
}

// xi for draw r from a block laid out as xi_block[d * draws + r].
std::vector<double> xi_at(std::span<const double> xi_block, int dims, int draws, int r) {
  std::vector<double> xi(dims);
  for (int d = 0; d < dims; ++d) xi[d] = xi_block[static_cast<std::size_t>(d) * draws + r];
  return xi;
}

std::vector<double> history_seq_lls(const CompiledModel& cm, const ParameterVector& p,
                                    const BoundIndividual& history,
                                    std::span<const double> xi_block, int draws) {
  std::vector<double> seq(draws);
  for (int r = 0; r < draws; ++r)
    seq[r] = sequence_loglik(cm, history, p, 0, xi_at(xi_block, cm.n_dims, draws, r));
  return seq;
}

}  // namespace

std::vector<double> predict_plain(const CompiledModel& cm, const ParameterVector& p,
                                  const BoundIndividual& bi, int t) {
  const auto beta = resolve_beta(cm, p, 0, {});
  return kernel_probs(cm, p, 0, beta, bi, t);
}

std::vector<double> predict_mixed_unconditional(const CompiledModel& cm,
                                                const ParameterVector& p,
                                                const BoundIndividual& bi, int t,
                                                std::span<const double> xi_block, int draws) {
  std::vector<double> acc(cm.n_alts, 0.0);
  for (int r = 0; r < draws; ++r) {
    const auto beta = resolve_beta(cm, p, 0, xi_at(xi_block, cm.n_dims, draws, r));
    const auto pr = kernel_probs(cm, p, 0, beta, bi, t);
    for (int j = 0; j < cm.n_alts; ++j) acc[j] += pr[j];
  }
  for (auto& x : acc) x /= static_cast<double>(draws);
  return acc;
}

std::vector<double> posterior_draw_weights(const CompiledModel& cm, const ParameterVector& p,
                                           const BoundIndividual& history,
                                           std::span<const double> xi_block, int draws) {
  if (history.T < 1) throw ConfigError("posterior_draw_weights: empty history");
  auto seq = history_seq_lls(cm, p, history, xi_block, draws);
  const double lse = log_sum_exp(seq);
  if (!std::isfinite(lse))
    throw NumericError("posterior_draw_weights: history likelihood underflows for all draws");
  for (auto& s : seq) s = std::exp(s - lse);
  return seq;
}

std::vector<double> predict_mixed_conditional(const CompiledModel& cm, const ParameterVector& p,
                                              const BoundIndividual& target, int t,
                                              const BoundIndividual& history,
                                              std::span<const double> xi_block, int draws) {
  const auto w = posterior_draw_weights(cm, p, history, xi_block, draws);
  std::vector<double> acc(cm.n_alts, 0.0);
  for (int r = 0; r < draws; ++r) {
    const auto beta = resolve_beta(cm, p, 0, xi_at(xi_block, cm.n_dims, draws, r));
    const auto pr = kernel_probs(cm, p, 0, beta, target, t);
    for (int j = 0; j < cm.n_alts; ++j) acc[j] += w[r] * pr[j];
  }
  return acc;
}

std::vector<double> predict_lc_unconditional(const CompiledModel& cm, const ParameterVector& p,
                                             const BoundIndividual& bi, int t,
                                             std::span<const double> covariates) {
  const auto pi = class_allocation_probs(cm, p, covariates);
  std::vector<double> acc(cm.n_alts, 0.0);
  for (int s = 0; s < cm.n_classes; ++s) {
    const auto beta = resolve_beta(cm, p, s, {});
    const auto pr = kernel_probs(cm, p, s, beta, bi, t);
    for (int j = 0; j < cm.n_alts; ++j) acc[j] += pi[s] * pr[j];
  }
  return acc;
}

std::vector<double> posterior_class_probs(const CompiledModel& cm, const ParameterVector& p,
                                          const BoundIndividual& history,
                                          std::span<const double> covariates) {
  if (history.T < 1) throw ConfigError("posterior_class_probs: empty history");
  const auto pi = class_allocation_probs(cm, p, covariates);
  std::vector<double> a(cm.n_classes);
  for (int s = 0; s < cm.n_classes; ++s) {
    const double seq = sequence_loglik(cm, history, p, s, {});
    a[s] = (pi[s] > 0.0 ? std::log(pi[s]) : -std::numeric_limits<double>::infinity()) + seq;
  }
  const double lse = log_sum_exp(a);
  if (!std::isfinite(lse))
    throw NumericError("posterior_class_probs: history likelihood underflows for all classes");
  for (auto& x : a) x = std::isfinite(x) ? std::exp(x - lse) : 0.0;
  return a;
}

std::vector<double> predict_lc_conditional(const CompiledModel& cm, const ParameterVector& p,
                                           const BoundIndividual& target, int t,
                                           const BoundIndividual& history,
                                           std::span<const double> covariates) {
  const auto pi_post = posterior_class_probs(cm, p, history, covariates);
  std::vector<double> acc(cm.n_alts, 0.0);
  for (int s = 0; s < cm.n_classes; ++s) {
    const auto beta = resolve_beta(cm, p, s, {});
    const auto pr = kernel_probs(cm, p, s, beta, target, t);
    for (int j = 0; j < cm.n_alts; ++j) acc[j] += pi_post[s] * pr[j];
  }
  return acc;
}

PredictionTable predict_table(const CompiledModel& cm, const ParameterVector& p,
                              const SplitDataset& split, PredCase pcase, Conditioning cond,
                              const PredictOptions& opt) {
  const Family fam = cm.family();
  if (cond == Conditioning::Posterior && pcase != PredCase::Case3) {
    if (pcase == PredCase::Case2)
      throw ConfigError(
          "posterior conditioning is unavailable for case 2: held-out individuals have no "
          "estimation history");
    throw ConfigError(
        "posterior conditioning is unavailable for case 1: the target observation is part of "
        "its own history");
  }

  const ChoiceDataset& targets = pcase == PredCase::Case1   ? split.estimation
                                 : pcase == PredCase::Case2 ? split.new_individuals
                                                            : split.last_choices;

  PredictionTable pt;
  pt.model = cm.spec.name;
  pt.pcase = pcase;
  pt.conditioning = cond;
  pt.draws = fam == Family::Mixed ? opt.draws : 0;
  pt.seed = opt.seed;
  pt.alternatives = cm.schema.alternatives;

  // per-individual row offsets so that parallel workers write disjoint slots
  std::vector<std::size_t> row_offset(targets.individuals.size() + 1, 0);
  for (std::size_t i = 0; i < targets.individuals.size(); ++i)
    row_offset[i + 1] = row_offset[i] + targets.individuals[i].obs.size();
  pt.rows.resize(row_offset.back());

  // population draw block shared by every unconditional mixture row
  std::vector<double> pop_block;
  if (fam == Family::Mixed)
    pop_block = DrawMatrix::block(opt.seed, population_draw_key(), cm.n_dims, opt.draws);

  // case-3 conditionals: history = the individual's estimation observations,
  // draws keyed exactly as in estimation (the individual's estimation index)
  const bool posterior = cond == Conditioning::Posterior;

  parallel_for(opt.threads, targets.individuals.size(), [&](std::size_t i) {
    const Individual& ind = targets.individuals[i];
    const auto bi = bind_individual(cm, ind, static_cast<int>(i));

    BoundIndividual history;
    std::vector<double> hist_block;
    if (posterior && fam != Family::Plain) {
      const int est_idx = split.estimation.find_individual(ind.id);
      if (est_idx < 0)
        throw ConfigError("no estimation history for individual '" + ind.id + "'");
      history = bind_individual(cm, split.estimation.individuals[est_idx], est_idx);
      if (fam == Family::Mixed)
        hist_block = DrawMatrix::block(opt.seed, static_cast<std::uint64_t>(est_idx), cm.n_dims,
                                       opt.draws);
    }

    for (int t = 0; t < bi.T; ++t) {
      std::vector<double> probs;
      switch (fam) {
        case Family::Plain:
          probs = predict_plain(cm, p, bi, t);
          break;
        case Family::Mixed:
          probs = posterior
                      ? predict_mixed_conditional(cm, p, bi, t, history, hist_block, opt.draws)
                      : predict_mixed_unconditional(cm, p, bi, t, pop_block, opt.draws);
          break;
        case Family::LatentClass:
          probs = posterior
                      ? predict_lc_conditional(cm, p, bi, t, history, ind.covariates)
                      : predict_lc_unconditional(cm, p, bi, t, ind.covariates);
          break;
      }
      pt.rows[row_offset[i] + t] = {ind.id, ind.obs[t].task, std::move(probs),
                                    ind.obs[t].chosen};
    }
  });
  return pt;
}

void write_prediction_table(const PredictionTable& pt, const std::string& csv_path) {
  std::string out = "indiv_id,task,case,conditioning";
  for (const auto& alt : pt.alternatives) out += ",p_" + alt;
  out += ",chosen\n";
  for (const auto& row : pt.rows) {
    out += row.indiv_id + "," + std::to_string(row.task) + "," + to_string(pt.pcase) + "," +
           to_string(pt.conditioning);
    for (double p : row.probs) out += "," + fmt_double(p);
    out += "," + (row.chosen >= 0 ? pt.alternatives[row.chosen] : std::string{}) + "\n";
  }
  write_text_file(csv_path, out);
}

nlohmann::json prediction_meta_json(const PredictionTable& pt) {
  nlohmann::json j;
  j["model"] = pt.model;
  j["case"] = to_string(pt.pcase);
  j["conditioning"] = to_string(pt.conditioning);
  j["draws"] = pt.draws;
  j["seed"] = pt.seed;
  j["alternatives"] = pt.alternatives;
  return j;
}

PredictionTable read_prediction_table(const std::string& csv_path, const std::string& meta_path) {
  PredictionTable pt;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("prediction meta '" + meta_path + "': " + e.what());
  }
  pt.model = meta.at("model").get<std::string>();
  pt.pcase = pred_case_from_string(meta.at("case").get<std::string>());
  pt.conditioning = conditioning_from_string(meta.at("conditioning").get<std::string>());
  pt.draws = meta.at("draws").get<int>();
  pt.seed = meta.at("seed").get<std::uint64_t>();
  pt.alternatives = meta.at("alternatives").get<std::vector<std::string>>();

  const std::string text = read_text_file(csv_path);
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line{text.data() + pos, nl - pos};
    pos = nl + 1;
    if (line.empty() || line == "\r") continue;
    const auto tok = split_csv_line(line);
    if (header) {
      header = false;
      continue;
    }
    if (tok.size() != 5 + pt.alternatives.size())
      throw ConfigError("prediction table '" + csv_path + "': bad field count");
    PredictionRow row;
    row.indiv_id = tok[0];
    row.task = static_cast<int>(parse_long(tok[1], "task"));
    row.probs.resize(pt.alternatives.size());
    for (std::size_t j = 0; j < pt.alternatives.size(); ++j)
      row.probs[j] = parse_double(tok[4 + j], "probability");
    const auto& chosen = tok[4 + pt.alternatives.size()];
    row.chosen = -1;
    for (std::size_t j = 0; j < pt.alternatives.size(); ++j)
      if (pt.alternatives[j] == chosen) row.chosen = static_cast<int>(j);
    pt.rows.push_back(std::move(row));
  }
  return pt;
}

}  // namespace ck
