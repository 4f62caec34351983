#include "ck/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ck/error.hpp"
#include "ck/kernels.hpp"
#include "ck/parallel.hpp"
#include "ck/stats.hpp"

namespace ck {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Workspace {
  std::vector<double> v, logp, dv, dlam;
  std::vector<double> beta, jl, js, xi;
  std::vector<double> seq, s_slot, s_lam, jl_r, js_r;

  void size_for(const CompiledModel& cm, int draws) {
    v.resize(cm.n_alts);
    logp.resize(cm.n_alts);
    dv.resize(cm.n_alts);
    dlam.resize(cm.nests.size());
    beta.resize(cm.n_slots);
    jl.resize(cm.n_slots);
    js.resize(cm.n_slots);
    xi.resize(cm.n_dims);
    if (draws > 0) {
      seq.resize(draws);
      s_slot.resize(static_cast<std::size_t>(draws) * cm.n_slots);
      s_lam.resize(static_cast<std::size_t>(draws) * cm.nests.size());
      jl_r.resize(static_cast<std::size_t>(draws) * cm.n_slots);
      js_r.resize(static_cast<std::size_t>(draws) * cm.n_slots);
    }
  }
};

std::vector<NestView> nest_views(const CompiledModel& cm, const ParameterVector& p, int cls) {
  std::vector<NestView> views;
  views.reserve(cm.nests.size());
  const auto lam = cm.lambdas(p, cls);
  for (std::size_t g = 0; g < cm.nests.size(); ++g)
    views.push_back({cm.nests[g].members, lam[g]});
  return views;
}

// Coefficient values plus d beta/d loc (jl) and d beta/d spread (js).
void resolve_with_jac(const CompiledModel& cm, const ParameterVector& p, int cls,
                      const double* xi, double* beta, double* jl, double* js) {
  for (int c = 0; c < cm.n_slots; ++c) {
    const CoefSlot& s = cm.slots[c];
    switch (s.kind) {
      case MixingKind::Fixed:
        beta[c] = p.value(s.loc[cls]);
        jl[c] = 1.0;
        js[c] = 0.0;
        break;
      case MixingKind::Normal: {
        const double z = norm_ppf(xi[s.xi_dim]);
        beta[c] = p.value(s.loc[cls]) + p.value(s.spread[cls]) * z;
        jl[c] = 1.0;
        js[c] = z;
        break;
      }
      case MixingKind::NegLogUniform:
      case MixingKind::PosLogUniform: {
        const double x = xi[s.xi_dim];
        double e = std::exp(p.value(s.loc[cls]) + p.value(s.spread[cls]) * x);
        if (s.kind == MixingKind::NegLogUniform) e = -e;
        beta[c] = e;
        jl[c] = e;
        js[c] = e * x;
        break;
      }
    }
  }
}

// Sequence log-likelihood of one individual at fixed coefficient values.
// When slot_score is nonnull, accumulates dS/dbeta_c there (and the lambda
// score into lam_score for nested kernels); both are zeroed first.
double seq_ll_one(const CompiledModel& cm, const BoundIndividual& bi, const double* beta,
                  std::span<const NestView> nests, double* slot_score, double* lam_score,
                  Workspace& ws, long& floored) {
  const int J = cm.n_alts;
  const int C = cm.n_slots;
  double total = 0.0;
  if (slot_score) std::fill_n(slot_score, C, 0.0);
  if (lam_score) std::fill_n(lam_score, nests.size(), 0.0);

  for (int t = 0; t < bi.T; ++t) {
    const double* mt = bi.m.data() + static_cast<std::size_t>(t) * J * C;
    const std::uint8_t* av = bi.avail.data() + static_cast<std::size_t>(t) * J;
    const int chosen = bi.chosen[t];
    for (int j = 0; j < J; ++j) {
      const double* row = mt + static_cast<std::size_t>(j) * C;
      double u = 0.0;
      for (int c = 0; c < C; ++c) u += row[c] * beta[c];
      ws.v[j] = u;
    }

    double lnp;
    if (nests.empty()) {
      double vmax = kNegInf;
      for (int j = 0; j < J; ++j)
        if (av[j] && ws.v[j] > vmax) vmax = ws.v[j];
      double sum = 0.0;
      for (int j = 0; j < J; ++j)
        if (av[j]) sum += std::exp(ws.v[j] - vmax);
      const double lse = vmax + std::log(sum);
      lnp = ws.v[chosen] - lse;
      if (slot_score) {
        for (int j = 0; j < J; ++j)
          ws.dv[j] = av[j] ? (j == chosen ? 1.0 : 0.0) - std::exp(ws.v[j] - lse) : 0.0;
      }
    } else {
      nl_log_probs(ws.v, {av, static_cast<std::size_t>(J)}, nests, ws.logp);
      lnp = ws.logp[chosen];
      if (slot_score) {
        nl_log_prob_grad(ws.v, {av, static_cast<std::size_t>(J)}, nests, chosen, ws.dv, ws.dlam);
        for (std::size_t g = 0; g < nests.size(); ++g) lam_score[g] += ws.dlam[g];
      }
    }

    if (lnp < kFloorLogProb) {
      lnp = kFloorLogProb;
      ++floored;
    }
    total += lnp;

    if (slot_score) {
      for (int j = 0; j < J; ++j) {
        const double d = ws.dv[j];
        if (d == 0.0) continue;
        const double* row = mt + static_cast<std::size_t>(j) * C;
        for (int c = 0; c < C; ++c) slot_score[c] += d * row[c];
      }
    }
  }
  return total;
}

std::vector<int> param_free_positions(const ParameterVector& p) {
  std::vector<int> pos(p.n(), -1);
  const auto& free = p.free_indices();
  for (std::size_t k = 0; k < free.size(); ++k) pos[free[k]] = static_cast<int>(k);
  return pos;
}

// g += w * (slot scores chained through the mixing jacobians)
void chain_add(const CompiledModel& cm, int cls, const double* s_slot, const double* jl,
               const double* js, const double* s_lam, double w, const std::vector<int>& pf,
               double* g) {
  for (int c = 0; c < cm.n_slots; ++c) {
    const CoefSlot& s = cm.slots[c];
    const int floc = pf[s.loc[cls]];
    if (floc >= 0) g[floc] += w * s_slot[c] * jl[c];
    if (s.spread[cls] >= 0) {
      const int fspr = pf[s.spread[cls]];
      if (fspr >= 0) g[fspr] += w * s_slot[c] * js[c];
    }
  }
  if (s_lam) {
    for (std::size_t gi = 0; gi < cm.nests.size(); ++gi) {
      const int pi = cm.nests[gi].lambda_param.empty() ? -1 : cm.nests[gi].lambda_param[cls];
      if (pi >= 0 && pf[pi] >= 0) g[pf[pi]] += w * s_lam[gi];
    }
  }
}

void check_finite(double ll, const BoundData& bd, std::size_t n) {
  if (std::isnan(ll) || ll == kNegInf)
    throw NumericError("likelihood underflow for individual '" +
                       bd.data->individuals[bd.ind[n].n].id + "'");
}

struct EvalAccum {
  std::vector<double> per_ind;
  std::vector<long> floored;
  std::vector<double> scores;  // N x n_free when wanted
};

// Shared driver: evaluates per-individual log-likelihoods (and scores when
// want_scores) for any family, then reduces in index order.
void evaluate(const BoundData& bd, const ParameterVector& p, const DrawMatrix* draws,
              int threads, bool want_scores, EvalAccum& acc) {
  const CompiledModel& cm = *bd.model;
  const Family fam = cm.family();
  const std::size_t N = bd.ind.size();
  const int kfree = p.n_free();
  const int C = cm.n_slots;
  const std::size_t G = cm.nests.size();

  if (fam == Family::Mixed) {
    if (!draws) throw ConfigError("mixed model requires a draw matrix");
    if (draws->dims() != cm.n_dims)
      throw ConfigError("draw matrix dimension mismatch: model needs " +
                        std::to_string(cm.n_dims));
    if (draws->individuals() < N) throw ConfigError("draw matrix covers too few individuals");
  }

  acc.per_ind.assign(N, 0.0);
  acc.floored.assign(N, 0);
  if (want_scores) acc.scores.assign(N * static_cast<std::size_t>(kfree), 0.0);
  const auto pf = param_free_positions(p);

  const int S = cm.n_classes;
  const int R = fam == Family::Mixed ? draws->draws() : 0;

  // class-level work shared across individuals
  std::vector<std::vector<double>> beta_s(S), jl_s(S), js_s(S);
  std::vector<std::vector<NestView>> nests_s(S);
  if (fam != Family::Mixed) {
    for (int s = 0; s < S; ++s) {
      beta_s[s].resize(C);
      jl_s[s].resize(C);
      js_s[s].resize(C);
      resolve_with_jac(cm, p, s, nullptr, beta_s[s].data(), jl_s[s].data(), js_s[s].data());
      nests_s[s] = nest_views(cm, p, s);
    }
  }
  std::vector<NestView> nests0 = cm.has_nests() ? nest_views(cm, p, 0) : std::vector<NestView>{};

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(N, 1))));
  std::vector<Workspace> ws_pool(workers);
  for (auto& w : ws_pool) w.size_for(cm, std::max(R, S));

  parallel_ranges(threads, N, [&](int worker, std::size_t ibegin, std::size_t iend) {
    Workspace& ws = ws_pool[worker];
    for (std::size_t i = ibegin; i < iend; ++i) {
      const BoundIndividual& bi = bd.ind[i];
      long fl = 0;
      double* grow = want_scores ? acc.scores.data() + i * kfree : nullptr;

      switch (fam) {
        case Family::Plain: {
          const double lnl =
              seq_ll_one(cm, bi, beta_s[0].data(), nests_s[0],
                         want_scores ? ws.s_slot.data() : nullptr,
                         want_scores && !nests_s[0].empty() ? ws.s_lam.data() : nullptr, ws, fl);
          acc.per_ind[i] = lnl;
          if (want_scores)
            chain_add(cm, 0, ws.s_slot.data(), jl_s[0].data(), js_s[0].data(),
                      nests_s[0].empty() ? nullptr : ws.s_lam.data(), 1.0, pf, grow);
          break;
        }
        case Family::Mixed: {
          for (int r = 0; r < R; ++r) {
            for (int d = 0; d < cm.n_dims; ++d) ws.xi[d] = draws->xi(i, d, r);
            double* jlr = ws.jl_r.data() + static_cast<std::size_t>(r) * C;
            double* jsr = ws.js_r.data() + static_cast<std::size_t>(r) * C;
            resolve_with_jac(cm, p, 0, ws.xi.data(), ws.beta.data(), jlr, jsr);
            double* ss = want_scores ? ws.s_slot.data() + static_cast<std::size_t>(r) * C : nullptr;
            double* sl = want_scores && !nests0.empty()
                             ? ws.s_lam.data() + static_cast<std::size_t>(r) * G
                             : nullptr;
            ws.seq[r] = seq_ll_one(cm, bi, ws.beta.data(), nests0, ss, sl, ws, fl);
          }
          const double lse = log_sum_exp({ws.seq.data(), static_cast<std::size_t>(R)});
          acc.per_ind[i] = lse - std::log(static_cast<double>(R));
          if (want_scores) {
            for (int r = 0; r < R; ++r) {
              const double w = std::exp(ws.seq[r] - lse);
              chain_add(cm, 0, ws.s_slot.data() + static_cast<std::size_t>(r) * C,
                        ws.jl_r.data() + static_cast<std::size_t>(r) * C,
                        ws.js_r.data() + static_cast<std::size_t>(r) * C,
                        nests0.empty() ? nullptr : ws.s_lam.data() + static_cast<std::size_t>(r) * G,
                        w, pf, grow);
            }
          }
          break;
        }
        case Family::LatentClass: {
          const auto& covs = bd.data->individuals[bi.n].covariates;
          const auto pi = class_allocation_probs(cm, p, covs);
          // a_s = ln pi_s + S_ns, accumulated draw-style in ws.seq[0..S)
          for (int s = 0; s < S; ++s) {
            double* ss = want_scores ? ws.s_slot.data() + static_cast<std::size_t>(s) * C : nullptr;
            double* sl = want_scores && !nests_s[s].empty()
                             ? ws.s_lam.data() + static_cast<std::size_t>(s) * G
                             : nullptr;
            const double sll = seq_ll_one(cm, bi, beta_s[s].data(), nests_s[s], ss, sl, ws, fl);
            ws.seq[s] = (pi[s] > 0.0 ? std::log(pi[s]) : kNegInf) + sll;
          }
          const double lse = log_sum_exp({ws.seq.data(), static_cast<std::size_t>(S)});
          acc.per_ind[i] = lse;
          if (want_scores) {
            for (int s = 0; s < S; ++s) {
              const double w = ws.seq[s] == kNegInf ? 0.0 : std::exp(ws.seq[s] - lse);
              chain_add(cm, s, ws.s_slot.data() + static_cast<std::size_t>(s) * C, jl_s[s].data(),
                        js_s[s].data(),
                        nests_s[s].empty() ? nullptr
                                           : ws.s_lam.data() + static_cast<std::size_t>(s) * G,
                        w, pf, grow);
              // allocation model score: (w_s - pi_s) through the softmax
              if (s >= 1) {
                const double dz = w - pi[s];
                const int fi = pf[cm.alloc.intercept[s]];
                if (fi >= 0) grow[fi] += dz;
                for (std::size_t c = 0; c < cm.alloc.cov_columns.size(); ++c) {
                  const int fc = pf[cm.alloc.cov_coef[s][c]];
                  if (fc >= 0) grow[fc] += dz * covs[cm.alloc.cov_columns[c]];
                }
              }
            }
          }
          break;
        }
      }
      acc.floored[i] = fl;
      check_finite(acc.per_ind[i], bd, i);
    }
  });
}

LlResult reduce_ll(EvalAccum& acc) {
  LlResult out;
  out.per_individual = std::move(acc.per_ind);
  for (double v : out.per_individual) out.ll += v;
  for (long f : acc.floored) out.floored_obs += f;
  return out;
}

}  // namespace

LlResult ll_plain(const BoundData& bd, const ParameterVector& p, int threads) {
  if (bd.model->family() != Family::Plain)
    throw ConfigError("ll_plain: model has random heterogeneity");
  EvalAccum acc;
  evaluate(bd, p, nullptr, threads, false, acc);
  return reduce_ll(acc);
}

LlResult ll_mixed(const BoundData& bd, const ParameterVector& p, const DrawMatrix& draws,
                  int threads) {
  if (bd.model->family() != Family::Mixed)
    throw ConfigError("ll_mixed: model has no continuous mixing");
  EvalAccum acc;
  evaluate(bd, p, &draws, threads, false, acc);
  return reduce_ll(acc);
}

LlResult ll_lc(const BoundData& bd, const ParameterVector& p, int threads) {
  if (bd.model->family() != Family::LatentClass)
    throw ConfigError("ll_lc: model has no classes");
  EvalAccum acc;
  evaluate(bd, p, nullptr, threads, false, acc);
  return reduce_ll(acc);
}

LlResult log_likelihood(const BoundData& bd, const ParameterVector& p, const DrawMatrix* draws,
                        int threads) {
  EvalAccum acc;
  evaluate(bd, p, draws, threads, false, acc);
  return reduce_ll(acc);
}

ScoreResult ll_scores(const BoundData& bd, const ParameterVector& p, const DrawMatrix* draws,
                      int threads) {
  EvalAccum acc;
  evaluate(bd, p, draws, threads, true, acc);
  ScoreResult out;
  for (double v : acc.per_ind) out.ll += v;
  for (long f : acc.floored) out.floored_obs += f;
  out.scores = std::move(acc.scores);
  return out;
}

double sequence_loglik(const CompiledModel& cm, const BoundIndividual& bi,
                       const ParameterVector& p, int cls, std::span<const double> xi) {
  Workspace ws;
  ws.size_for(cm, 0);
  std::vector<double> beta(cm.n_slots), jl(cm.n_slots), js(cm.n_slots);
  resolve_with_jac(cm, p, cls, xi.empty() ? nullptr : xi.data(), beta.data(), jl.data(),
                   js.data());
  const auto nests = nest_views(cm, p, cls);
  long fl = 0;
  return seq_ll_one(cm, bi, beta.data(), nests, nullptr, nullptr, ws, fl);
}

}  // namespace ck
