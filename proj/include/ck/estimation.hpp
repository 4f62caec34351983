#ifndef CK_ESTIMATION_HPP
#define CK_ESTIMATION_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ck/data.hpp"
#include "ck/likelihood.hpp"
#include "ck/model.hpp"

#include "json.hpp"

namespace ck {

struct EstimationOptions {
  int draws = 500;
  std::uint64_t seed = 1;
  double tol = 1e-6;  // gradient inf-norm threshold, scaled by sqrt(n_obs)
  int max_iter = 500;
  int threads = 1;
  std::map<std::string, double> start;  // per-parameter start overrides
  std::optional<double> null_ll;        // default: equal share among available
  bool fd_gradient = false;             // drive the optimizer with finite differences
};

struct FitStats {
  int k = 0;
  long n_obs = 0;
  double bic = 0.0;
  double adj_rho2 = 0.0;
  double null_ll = 0.0;
};

struct EstimationResult {
  std::string model;
  ParameterVector params;
  double ll = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  FitStats fit;
  // over free parameters, in free-index order
  Eigen::MatrixXd cov_classical;
  Eigen::MatrixXd cov_robust;
  int draws = 0;
  std::uint64_t seed = 0;
  long floored_obs = 0;
  std::vector<std::string> notes;

  double se_classical(int free_pos) const { return std::sqrt(cov_classical(free_pos, free_pos)); }
  double se_robust(int free_pos) const { return std::sqrt(cov_robust(free_pos, free_pos)); }
};

// Equal-probability-among-available null log-likelihood.
double null_loglik(const ChoiceDataset& ds);

// BFGS ascent on the (simulated) log-likelihood. Draws are generated once
// from (seed, individual index, dimension) and held fixed across iterations.
EstimationResult maximize_ll(const CompiledModel& cm, const ChoiceDataset& ds,
                             const EstimationOptions& opt);

// Central finite differences with step 1e-5 * max(1, |theta|) per free
// parameter; the independent check against the analytic scores.
std::vector<double> fd_gradient(const BoundData& bd, const ParameterVector& p,
                                const DrawMatrix* draws, int threads = 1);

// Analytic gradient (summed per-individual scores), free-parameter order.
std::vector<double> analytic_gradient(const BoundData& bd, const ParameterVector& p,
                                      const DrawMatrix* draws, int threads = 1);

// Classical (-H)^-1 and sandwich (-H)^-1 B (-H)^-1 covariance at result.params;
// fills result.cov_* and appends notes on pseudo-inverse fallbacks.
void covariance(const BoundData& bd, const DrawMatrix* draws, EstimationResult& result,
                int threads = 1);

// The sandwich assembly itself: classical * B * classical.
Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& classical, const Eigen::MatrixXd& b);

FitStats fit_stats(double ll, int k, long n_obs, double null_ll);

struct LrTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};
LrTest lr_test(const EstimationResult& restricted, const EstimationResult& general);

nlohmann::json result_json(const EstimationResult& r);
EstimationResult result_from_json(const nlohmann::json& j, const CompiledModel& cm);
std::string result_table(const EstimationResult& r);

}  // namespace ck

#endif
