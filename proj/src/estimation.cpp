#include "ck/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/stats.hpp"

namespace ck {

namespace {

double ll_value(const BoundData& bd, const ParameterVector& p, const DrawMatrix* draws,
                int threads, long* floored = nullptr) {
  const LlResult r = log_likelihood(bd, p, draws, threads);
  if (floored) *floored = r.floored_obs;
  return r.ll;
}

// Mean class-allocation probabilities over the estimation individuals.
std::vector<double> mean_class_shares(const BoundData& bd, const ParameterVector& p) {
  const CompiledModel& cm = *bd.model;
  std::vector<double> mean(cm.n_classes, 0.0);
  for (const auto& bi : bd.ind) {
    const auto pi = class_allocation_probs(cm, p, bd.data->individuals[bi.n].covariates);
    for (int s = 0; s < cm.n_classes; ++s) mean[s] += pi[s];
  }
  for (auto& v : mean) v /= static_cast<double>(bd.ind.size());
  return mean;
}

// Re-sorts latent classes by descending mean allocation probability. A pure
// relabeling: utility copies and lambdas permute, allocation coefficients are
// re-based on the new class 1.
void relabel_classes(const CompiledModel& cm, const BoundData& bd, ParameterVector& p,
                     std::vector<std::string>& notes) {
  const int S = cm.n_classes;
  if (S < 2) return;
  for (const auto& slot : cm.slots)
    for (int s = 0; s < S; ++s)
      if (p.fixed(slot.loc[s]) && slot.loc[s] != slot.loc[0]) {
        notes.push_back("class relabeling skipped: pinned class-specific coefficient");
        return;
      }

  const auto mean = mean_class_shares(bd, p);
  std::vector<int> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean[a] > mean[b]; });
  if (std::is_sorted(order.begin(), order.end())) return;

  ParameterVector old = p;
  for (const auto& slot : cm.slots) {
    if (slot.loc[0] == slot.loc[S - 1]) continue;  // generic
    for (int s = 0; s < S; ++s) p.set_value(slot.loc[s], old.value(slot.loc[order[s]]));
  }
  for (const auto& nest : cm.nests) {
    if (nest.lambda_param.empty() || nest.lambda_param[0] < 0) continue;
    if (nest.lambda_param[0] == nest.lambda_param[S - 1]) continue;
    for (int s = 0; s < S; ++s)
      p.set_value(nest.lambda_param[s], old.value(nest.lambda_param[order[s]]));
  }
  // allocation utilities: new linear index = old(perm(s)) - old(perm(1))
  auto old_u = [&](int s, int comp) -> double {
    if (s == 0) return 0.0;
    return comp < 0 ? old.value(cm.alloc.intercept[s])
                    : old.value(cm.alloc.cov_coef[s][comp]);
  };
  for (int s = 1; s < S; ++s) {
    p.set_value(cm.alloc.intercept[s], old_u(order[s], -1) - old_u(order[0], -1));
    for (std::size_t c = 0; c < cm.alloc.cov_columns.size(); ++c)
      p.set_value(cm.alloc.cov_coef[s][c],
                  old_u(order[s], static_cast<int>(c)) - old_u(order[0], static_cast<int>(c)));
  }
  notes.push_back("classes relabeled by descending mean allocation probability");
}

// Spread parameters identify only their magnitude: a normal sigma flips sign
// freely, and -exp(a + b xi) with b < 0 equals -exp((a+b) + |b| xi'). Reports
// use the canonical b, sigma >= 0 form.
bool canonicalize_spreads(const CompiledModel& cm, ParameterVector& p) {
  bool flipped = false;
  std::vector<std::uint8_t> done(p.n(), 0);
  for (const auto& slot : cm.slots) {
    if (slot.kind == MixingKind::Fixed) continue;
    const int spr = slot.spread[0];
    if (spr < 0 || done[spr]) continue;
    done[spr] = 1;
    const double b = p.value(spr);
    if (b >= 0.0) continue;
    p.set_value(spr, -b);
    flipped = true;
    if (slot.kind == MixingKind::Normal) continue;
    // shift every bound parameter that shares this spread
    for (const auto& other : cm.slots)
      if (other.spread[0] == spr) p.set_value(other.loc[0], p.value(other.loc[0]) + b);
  }
  return flipped;
}

}  // namespace

double null_loglik(const ChoiceDataset& ds) {
  double ll = 0.0;
  for (const auto& ind : ds.individuals)
    for (const auto& o : ind.obs) {
      const auto n_avail = std::count(o.avail.begin(), o.avail.end(), std::uint8_t{1});
      ll -= std::log(static_cast<double>(n_avail));
    }
  return ll;
}

std::vector<double> analytic_gradient(const BoundData& bd, const ParameterVector& p,
                                      const DrawMatrix* draws, int threads) {
  const ScoreResult sr = ll_scores(bd, p, draws, threads);
  const int k = p.n_free();
  std::vector<double> g(k, 0.0);
  for (std::size_t n = 0; n < bd.ind.size(); ++n)
    for (int i = 0; i < k; ++i) g[i] += sr.scores[n * k + i];
  return g;
}

std::vector<double> fd_gradient(const BoundData& bd, const ParameterVector& p,
                                const DrawMatrix* draws, int threads) {
  ParameterVector work = p;
  const auto theta = p.free_values();
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::fabs(theta[i]));
    auto probe = theta;
    probe[i] = theta[i] + h;
    work.set_free_values(probe);
    const double up = ll_value(bd, work, draws, threads);
    probe[i] = theta[i] - h;
    work.set_free_values(probe);
    const double dn = ll_value(bd, work, draws, threads);
    if (!std::isfinite(up) || !std::isfinite(dn))
      throw NumericError("fd_gradient: non-finite log-likelihood at perturbation of '" +
                         p.name(p.free_indices()[i]) + "'");
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

FitStats fit_stats(double ll, int k, long n_obs, double null_ll) {
  if (null_ll >= 0.0) throw ConfigError("fit_stats: null log-likelihood must be negative");
  FitStats f;
  f.k = k;
  f.n_obs = n_obs;
  f.null_ll = null_ll;
  f.bic = k * std::log(static_cast<double>(n_obs)) - 2.0 * ll;
  f.adj_rho2 = 1.0 - (ll - k) / null_ll;
  return f;
}

LrTest lr_test(const EstimationResult& restricted, const EstimationResult& general) {
  LrTest t;
  t.statistic = 2.0 * (general.ll - restricted.ll);
  t.df = general.fit.k - restricted.fit.k;
  if (t.df <= 0) throw ConfigError("lr_test: general model must have more free parameters");
  if (t.statistic < 0.0)
    throw ConfigError("lr_test: negative statistic; models not nested or not converged");
  t.p_value = chi2_sf(t.statistic, t.df);
  return t;
}

EstimationResult maximize_ll(const CompiledModel& cm, const ChoiceDataset& ds,
                             const EstimationOptions& opt) {
  const BoundData bd = bind_data(cm, ds);
  const Family fam = cm.family();

  std::optional<DrawMatrix> draws;
  if (fam == Family::Mixed)
    draws.emplace(bd.ind.size(), cm.n_dims, opt.draws, opt.seed);
  const DrawMatrix* dptr = draws ? &*draws : nullptr;

  ParameterVector params = cm.start;
  for (const auto& [name, value] : opt.start) {
    const int i = params.index_of(name);
    if (i < 0) throw ConfigError("start override for unknown parameter '" + name + "'");
    if (params.fixed(i))
      throw ConfigError("start override for fixed parameter '" + name + "'");
    params.set_value(i, value);
  }

  EstimationResult res;
  res.model = cm.spec.name;
  res.draws = fam == Family::Mixed ? opt.draws : 0;
  res.seed = opt.seed;

  const int k = params.n_free();
  const long n_obs = static_cast<long>(bd.n_obs);
  const double gtol = opt.tol * std::sqrt(static_cast<double>(n_obs));

  auto eval_f = [&](const Eigen::VectorXd& x, ParameterVector& pv) {
    pv.set_free_values({x.data(), static_cast<std::size_t>(x.size())});
    return ll_value(bd, pv, dptr, opt.threads);
  };
  auto eval_g = [&](ParameterVector& pv) {
    const auto g = opt.fd_gradient ? fd_gradient(bd, pv, dptr, opt.threads)
                                   : analytic_gradient(bd, pv, dptr, opt.threads);
    return Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()))
        .eval();
  };

  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(params.free_values().data(), k);
  double f = eval_f(x, params);
  if (!std::isfinite(f))
    throw NumericError("maximize_ll: log-likelihood not finite at start values");
  Eigen::VectorXd g = eval_g(params);

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(k, k);  // inverse-Hessian approximation
  bool first_update = true;
  int iter = 0;
  bool converged = g.lpNorm<Eigen::Infinity>() < gtol || k == 0;

  while (!converged && iter < opt.max_iter) {
    ++iter;
    Eigen::VectorXd d = H * g;  // ascent direction
    if (d.dot(g) <= 0.0) {      // curvature lost; restart
      H.setIdentity();
      d = g;
    }
    double alpha = 1.0;
    const double slope = d.dot(g);
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool ok = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = x + alpha * d;
      f_new = eval_f(x_new, params);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * alpha * slope) {
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) {
      res.notes.push_back("line search failed at iteration " + std::to_string(iter));
      params.set_free_values({x.data(), static_cast<std::size_t>(x.size())});
      break;
    }
    Eigen::VectorXd g_new = eval_g(params);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;  // gradient of LL, so y = g_new - g
    const double sy = -s.dot(y);          // s.(grad f_new - grad f) with f = -LL
    if (first_update && sy > 0.0) {
      H *= sy / y.dot(y);
      first_update = false;
    }
    if (sy > 1e-10 * s.norm() * y.norm()) {
      // BFGS update of the inverse Hessian of f = -LL
      const Eigen::VectorXd yf = -y;
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      H = (I - rho * s * yf.transpose()) * H * (I - rho * yf * s.transpose()) +
          rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    g = g_new;
    converged = g.lpNorm<Eigen::Infinity>() < gtol;
  }

  params.set_free_values({x.data(), static_cast<std::size_t>(x.size())});
  res.iterations = iter;
  if (!converged && iter >= opt.max_iter)
    res.notes.push_back("iteration cap reached without convergence");
  res.converged = converged;

  if (canonicalize_spreads(cm, params))
    res.notes.push_back("spread sign normalized after convergence");
  relabel_classes(cm, bd, params, res.notes);
  res.params = params;

  long floored = 0;
  res.ll = ll_value(bd, params, dptr, opt.threads, &floored);
  res.floored_obs = floored;
  if (floored > 0)
    res.notes.push_back(std::to_string(floored) + " observation(s) hit the probability floor");
  res.grad_inf_norm =
      Eigen::Map<const Eigen::VectorXd>(analytic_gradient(bd, params, dptr, opt.threads).data(), k)
          .lpNorm<Eigen::Infinity>();

  const double nll = opt.null_ll ? *opt.null_ll : null_loglik(ds);
  res.fit = fit_stats(res.ll, k, n_obs, nll);

  covariance(bd, dptr, res, opt.threads);

  for (const auto& nest : cm.nests) {
    for (int s = 0; s < cm.n_classes; ++s) {
      const int pi = nest.lambda_param.empty() ? -1 : nest.lambda_param[s];
      if (pi < 0) continue;
      const double lam = params.value(pi);
      if (lam <= 0.0 || lam > 1.0) {
        res.notes.push_back("nesting parameter '" + params.name(pi) + "' = " + fmt_double(lam) +
                            " outside (0,1]");
      }
    }
  }
  return res;
}

void covariance(const BoundData& bd, const DrawMatrix* draws, EstimationResult& result,
                int threads) {
  ParameterVector p = result.params;
  const auto theta = p.free_values();
  const int k = static_cast<int>(theta.size());
  Eigen::MatrixXd hess(k, k);

  // numerical Hessian of LL: central differences of the analytic gradient
  for (int i = 0; i < k; ++i) {
    const double h = 1e-5 * std::max(1.0, std::fabs(theta[i]));
    auto probe = theta;
    probe[i] = theta[i] + h;
    p.set_free_values(probe);
    const auto gp = analytic_gradient(bd, p, draws, threads);
    probe[i] = theta[i] - h;
    p.set_free_values(probe);
    const auto gm = analytic_gradient(bd, p, draws, threads);
    for (int j = 0; j < k; ++j) hess(j, i) = (gp[j] - gm[j]) / (2.0 * h);
  }
  hess = 0.5 * (hess + hess.transpose()).eval();

  const Eigen::MatrixXd neg_h = -hess;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
  Eigen::MatrixXd classical;
  bool pseudo = false;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    classical = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  } else {
    pseudo = true;
    classical = neg_h.completeOrthogonalDecomposition().pseudoInverse();
  }
  if (pseudo)
    result.notes.push_back("singular Hessian: classical covariance uses a pseudo-inverse");

  // sandwich with B = sum_n g_n g_n'
  p.set_free_values(theta);
  const ScoreResult sr = ll_scores(bd, p, draws, threads);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t n = 0; n < bd.ind.size(); ++n) {
    const Eigen::Map<const Eigen::VectorXd> gn(sr.scores.data() + n * k, k);
    b.noalias() += gn * gn.transpose();
  }
  result.cov_classical = classical;
  result.cov_robust = sandwich_covariance(classical, b);
}

Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& classical, const Eigen::MatrixXd& b) {
  return classical * b * classical;
}

nlohmann::json result_json(const EstimationResult& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["ll"] = r.ll;
  j["gradient_inf_norm"] = r.grad_inf_norm;
  j["fit"] = {{"k", r.fit.k},
              {"n_obs", r.fit.n_obs},
              {"bic", r.fit.bic},
              {"adj_rho2", r.fit.adj_rho2},
              {"null_ll", r.fit.null_ll}};
  j["draws"] = r.draws;
  j["seed"] = r.seed;
  j["floored_obs"] = r.floored_obs;
  j["notes"] = r.notes;

  nlohmann::json params = nlohmann::json::array();
  const auto& free = r.params.free_indices();
  std::vector<int> free_pos(r.params.n(), -1);
  for (std::size_t i = 0; i < free.size(); ++i) free_pos[free[i]] = static_cast<int>(i);
  for (int i = 0; i < r.params.n(); ++i) {
    nlohmann::json pj;
    pj["name"] = r.params.name(i);
    pj["estimate"] = r.params.value(i);
    pj["fixed"] = r.params.fixed(i);
    if (free_pos[i] >= 0 && r.cov_classical.rows() > 0) {
      const double se = r.se_classical(free_pos[i]);
      const double rse = r.se_robust(free_pos[i]);
      pj["std_error"] = se;
      pj["rob_std_error"] = rse;
      pj["t_stat"] = se > 0 ? r.params.value(i) / se : 0.0;
      pj["rob_t_stat"] = rse > 0 ? r.params.value(i) / rse : 0.0;
    }
    params.push_back(pj);
  }
  j["parameters"] = params;

  auto dump_matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      rows.push_back(row);
    }
    return rows;
  };
  j["covariance"] = {{"classical", dump_matrix(r.cov_classical)},
                     {"robust", dump_matrix(r.cov_robust)}};
  return j;
}

EstimationResult result_from_json(const nlohmann::json& j, const CompiledModel& cm) {
  EstimationResult r;
  r.model = j.at("model").get<std::string>();
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<int>();
  r.ll = j.at("ll").get<double>();
  r.grad_inf_norm = j.at("gradient_inf_norm").get<double>();
  r.fit.k = j.at("fit").at("k").get<int>();
  r.fit.n_obs = j.at("fit").at("n_obs").get<long>();
  r.fit.bic = j.at("fit").at("bic").get<double>();
  r.fit.adj_rho2 = j.at("fit").at("adj_rho2").get<double>();
  r.fit.null_ll = j.at("fit").at("null_ll").get<double>();
  r.draws = j.at("draws").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.params = cm.start;
  for (const auto& pj : j.at("parameters")) {
    const std::string name = pj.at("name").get<std::string>();
    const int i = r.params.index_of(name);
    if (i < 0)
      throw ConfigError("estimates file parameter '" + name + "' unknown to model '" +
                        cm.spec.name + "'");
    r.params.set_value(i, pj.at("estimate").get<double>());
  }
  const int k = r.params.n_free();
  r.cov_classical = Eigen::MatrixXd::Zero(k, k);
  r.cov_robust = Eigen::MatrixXd::Zero(k, k);
  if (j.contains("covariance")) {
    const auto& cj = j["covariance"];
    for (int i = 0; i < k; ++i)
      for (int c = 0; c < k; ++c) {
        r.cov_classical(i, c) = cj.at("classical").at(i).at(c).get<double>();
        r.cov_robust(i, c) = cj.at("robust").at(i).at(c).get<double>();
      }
  }
  return r;
}

std::string result_table(const EstimationResult& r) {
  std::ostringstream out;
  out << "Model: " << r.model << "\n";
  out << "LL: " << fmt_double(r.ll) << "   BIC: " << fmt_double(r.fit.bic)
      << "   adj rho2: " << fmt_double(r.fit.adj_rho2) << "\n";
  out << "free parameters: " << r.fit.k << "   observations: " << r.fit.n_obs
      << "   converged: " << (r.converged ? "yes" : "no") << " (" << r.iterations
      << " iterations)\n\n";
  out << "  parameter                        est.      rob. t-ratio\n";
  const auto& free = r.params.free_indices();
  std::vector<int> free_pos(r.params.n(), -1);
  for (std::size_t i = 0; i < free.size(); ++i) free_pos[free[i]] = static_cast<int>(i);
  char buf[96];
  for (int i = 0; i < r.params.n(); ++i) {
    if (free_pos[i] < 0) {
      std::snprintf(buf, sizeof(buf), "  %-28s %10.4f          (fixed)\n",
                    r.params.name(i).c_str(), r.params.value(i));
    } else {
      const double rse = r.se_robust(free_pos[i]);
      std::snprintf(buf, sizeof(buf), "  %-28s %10.4f   %10.2f\n", r.params.name(i).c_str(),
                    r.params.value(i), rse > 0 ? r.params.value(i) / rse : 0.0);
    }
    out << buf;
  }
  for (const auto& n : r.notes) out << "note: " << n << "\n";
  return out.str();
}

}  // namespace ck
