#ifndef CK_PREDICTION_HPP
#define CK_PREDICTION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ck/data.hpp"
#include "ck/mixing.hpp"
#include "ck/model.hpp"
#include "ck/params.hpp"

#include "json.hpp"

namespace ck {

enum class PredCase { Case1 = 1, Case2 = 2, Case3 = 3 };
enum class Conditioning { None, Posterior };

std::string to_string(PredCase c);
std::string to_string(Conditioning c);
PredCase pred_case_from_string(std::string_view s);
Conditioning conditioning_from_string(std::string_view s);

struct PredictionRow {
  std::string indiv_id;
  int task = 0;
  std::vector<double> probs;
  int chosen = -1;
};

struct PredictionTable {
  std::string model;
  PredCase pcase = PredCase::Case1;
  Conditioning conditioning = Conditioning::None;
  int draws = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> alternatives;
  std::vector<PredictionRow> rows;
};

struct PredictOptions {
  int draws = 500;
  std::uint64_t seed = 1;
  int threads = 1;
};

// --- single-observation operations ---

// Kernel probabilities at the point estimates (models without mixing).
std::vector<double> predict_plain(const CompiledModel& cm, const ParameterVector& p,
                                  const BoundIndividual& bi, int t);

// (1/R) sum_r P_j(beta_r) over a base-draw block xi[d*R + r].
std::vector<double> predict_mixed_unconditional(const CompiledModel& cm,
                                                const ParameterVector& p,
                                                const BoundIndividual& bi, int t,
                                                std::span<const double> xi_block, int draws);

// w_r proportional to the history sequence likelihood L_n(beta_r), log-space.
std::vector<double> posterior_draw_weights(const CompiledModel& cm, const ParameterVector& p,
                                           const BoundIndividual& history,
                                           std::span<const double> xi_block, int draws);

// sum_r w_r P_j(beta_r): numerator and denominator share the draw block.
std::vector<double> predict_mixed_conditional(const CompiledModel& cm, const ParameterVector& p,
                                              const BoundIndividual& target, int t,
                                              const BoundIndividual& history,
                                              std::span<const double> xi_block, int draws);

// sum_s pi_ns P_j(beta_s).
std::vector<double> predict_lc_unconditional(const CompiledModel& cm, const ParameterVector& p,
                                             const BoundIndividual& bi, int t,
                                             std::span<const double> covariates);

// Posterior class shares pi~_ns = pi_ns L_n(beta_s) / sum, log-space.
std::vector<double> posterior_class_probs(const CompiledModel& cm, const ParameterVector& p,
                                          const BoundIndividual& history,
                                          std::span<const double> covariates);

std::vector<double> predict_lc_conditional(const CompiledModel& cm, const ParameterVector& p,
                                           const BoundIndividual& target, int t,
                                           const BoundIndividual& history,
                                           std::span<const double> covariates);

// --- table-level driver over a split ---
// Case 1 predicts the estimation sample, case 2 the held-out individuals,
// case 3 each estimation individual's final choice. Posterior conditioning is
// only defined for case 3 (the estimation observations form the history);
// case 2 never has a history and a case-1 target lies inside its own history.
PredictionTable predict_table(const CompiledModel& cm, const ParameterVector& p,
                              const SplitDataset& split, PredCase pcase, Conditioning cond,
                              const PredictOptions& opt);

// Draw-block stream keys: estimation individuals reuse their estimation index;
// unconditional prediction uses one shared population stream; explicit
// histories for non-estimation individuals (footnote-style use) key by id hash.
std::uint64_t population_draw_key();
std::uint64_t id_draw_key(std::string_view indiv_id);

void write_prediction_table(const PredictionTable& pt, const std::string& csv_path);
nlohmann::json prediction_meta_json(const PredictionTable& pt);
PredictionTable read_prediction_table(const std::string& csv_path, const std::string& meta_path);

}  // namespace ck

#endif
