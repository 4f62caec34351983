#ifndef CK_LIKELIHOOD_HPP
#define CK_LIKELIHOOD_HPP

#include <vector>

#include "ck/mixing.hpp"
#include "ck/model.hpp"
#include "ck/params.hpp"

namespace ck {

struct LlResult {
  double ll = 0.0;
  long floored_obs = 0;  // chosen-probability floor hits (see kFloorLogProb)
  std::vector<double> per_individual;
};

// ln of the 1e-300 probability floor applied to chosen alternatives.
inline constexpr double kFloorLogProb = -690.77552789821368;

// Models without random heterogeneity: LL = sum_n sum_t ln P.
LlResult ll_plain(const BoundData& bd, const ParameterVector& p, int threads = 1);

// Panel simulated likelihood: LL = sum_n ln[(1/R) sum_r prod_t P(beta_r)],
// with per-draw sequence products kept in log space.
LlResult ll_mixed(const BoundData& bd, const ParameterVector& p, const DrawMatrix& draws,
                  int threads = 1);

// Latent class: LL = sum_n ln sum_s pi_ns exp(sum_t ln P(beta_s)).
LlResult ll_lc(const BoundData& bd, const ParameterVector& p, int threads = 1);

// Dispatch on the model family; draws may be null for plain/LC models.
LlResult log_likelihood(const BoundData& bd, const ParameterVector& p, const DrawMatrix* draws,
                        int threads = 1);

// LL plus analytic per-individual score contributions d lnL_n / d theta_free,
// stored row-major as scores[n * n_free + k].
struct ScoreResult {
  double ll = 0.0;
  long floored_obs = 0;
  std::vector<double> scores;
};
ScoreResult ll_scores(const BoundData& bd, const ParameterVector& p, const DrawMatrix* draws,
                      int threads = 1);

// Sequence log-likelihood of one bound individual at class `cls` and base
// draws xi (empty for fixed-coefficient models). Used by the posterior
// prediction machinery.
double sequence_loglik(const CompiledModel& cm, const BoundIndividual& bi,
                       const ParameterVector& p, int cls, std::span<const double> xi);

}  // namespace ck

#endif
