#include "ck/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ck/error.hpp"

namespace ck {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void mnl_log_probs(std::span<const double> v, std::span<const std::uint8_t> avail,
                   std::span<double> logp) {
  double vmax = kNegInf;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (avail[j] && v[j] > vmax) vmax = v[j];
  if (vmax == kNegInf) throw NumericError("mnl_log_probs: no available alternative");
  double sum = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (avail[j]) sum += std::exp(v[j] - vmax);
  const double lse = vmax + std::log(sum);
  for (std::size_t j = 0; j < v.size(); ++j) logp[j] = avail[j] ? v[j] - lse : kNegInf;
}

std::vector<double> mnl_probs(std::span<const double> v, std::span<const std::uint8_t> avail) {
  std::vector<double> p(v.size());
  mnl_log_probs(v, avail, p);
  for (auto& x : p) x = std::exp(x);
  return p;
}

std::vector<double> mnl_probs(std::span<const double> v) {
  const std::vector<std::uint8_t> avail(v.size(), 1);
  return mnl_probs(v, avail);
}

void nl_log_probs(std::span<const double> v, std::span<const std::uint8_t> avail,
                  std::span<const NestView> nests, std::span<double> logp) {
  for (auto& x : logp) x = kNegInf;
  // inclusive values I_g and top-level utilities lambda_g * I_g
  double top_max = kNegInf;
  std::vector<double> inc(nests.size(), kNegInf);
  std::vector<double> top(nests.size(), kNegInf);
  for (std::size_t g = 0; g < nests.size(); ++g) {
    const NestView& nest = nests[g];
    if (!(nest.lambda > 0.0)) throw NumericError("nl_log_probs: lambda must be positive");
    double emax = kNegInf;
    for (int j : nest.members)
      if (avail[j]) emax = std::max(emax, v[j] / nest.lambda);
    if (emax == kNegInf) continue;  // nest empty after availability filtering
    double s = 0.0;
    for (int j : nest.members)
      if (avail[j]) s += std::exp(v[j] / nest.lambda - emax);
    inc[g] = emax + std::log(s);
    top[g] = nest.lambda * inc[g];
    top_max = std::max(top_max, top[g]);
  }
  if (top_max == kNegInf) throw NumericError("nl_log_probs: no available alternative");
  double tsum = 0.0;
  for (double u : top)
    if (u != kNegInf) tsum += std::exp(u - top_max);
  const double top_lse = top_max + std::log(tsum);
  for (std::size_t g = 0; g < nests.size(); ++g) {
    if (inc[g] == kNegInf) continue;
    const NestView& nest = nests[g];
    const double ln_pg = top[g] - top_lse;
    for (int j : nest.members)
      if (avail[j]) logp[j] = ln_pg + v[j] / nest.lambda - inc[g];
  }
}

std::vector<double> nl_probs(std::span<const double> v, std::span<const std::uint8_t> avail,
                             const NestPartition& nests) {
  if (nests.groups.size() != nests.lambda.size())
    throw ConfigError("nl_probs: one lambda per group required");
  std::vector<std::uint8_t> seen(v.size(), 0);
  for (const auto& g : nests.groups)
    for (int j : g) {
      if (j < 0 || j >= static_cast<int>(v.size()) || seen[j])
        throw ConfigError("nl_probs: groups must partition the alternatives");
      seen[j] = 1;
    }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw ConfigError("nl_probs: groups must cover every alternative");
  std::vector<NestView> views(nests.groups.size());
  for (std::size_t g = 0; g < nests.groups.size(); ++g)
    views[g] = {nests.groups[g], nests.lambda[g]};
  std::vector<double> p(v.size());
  nl_log_probs(v, avail, views, p);
  for (auto& x : p) x = std::exp(x);
  return p;
}

void nl_log_prob_grad(std::span<const double> v, std::span<const std::uint8_t> avail,
                      std::span<const NestView> nests, int chosen, std::span<double> dv,
                      std::span<double> dlambda) {
  const std::size_t J = v.size();
  std::fill(dv.begin(), dv.end(), 0.0);
  std::fill(dlambda.begin(), dlambda.end(), 0.0);

  std::vector<double> inc(nests.size(), kNegInf);
  std::vector<double> top(nests.size(), kNegInf);
  std::vector<double> pcond(J, 0.0);
  double top_max = kNegInf;
  int g_chosen = -1;
  for (std::size_t g = 0; g < nests.size(); ++g) {
    const NestView& nest = nests[g];
    double emax = kNegInf;
    for (int j : nest.members) {
      if (avail[j]) emax = std::max(emax, v[j] / nest.lambda);
      if (j == chosen) g_chosen = static_cast<int>(g);
    }
    if (emax == kNegInf) continue;
    double s = 0.0;
    for (int j : nest.members)
      if (avail[j]) s += std::exp(v[j] / nest.lambda - emax);
    inc[g] = emax + std::log(s);
    top[g] = nest.lambda * inc[g];
    top_max = std::max(top_max, top[g]);
    for (int j : nest.members)
      if (avail[j]) pcond[j] = std::exp(v[j] / nest.lambda - inc[g]);
  }
  if (g_chosen < 0 || inc[g_chosen] == kNegInf)
    throw NumericError("nl_log_prob_grad: chosen alternative not in any nonempty nest");

  double tsum = 0.0;
  for (double u : top)
    if (u != kNegInf) tsum += std::exp(u - top_max);
  std::vector<double> ptop(nests.size(), 0.0);
  for (std::size_t g = 0; g < nests.size(); ++g)
    if (top[g] != kNegInf) ptop[g] = std::exp(top[g] - top_max) / tsum;

  const double lam_c = nests[g_chosen].lambda;
  for (std::size_t g = 0; g < nests.size(); ++g) {
    if (inc[g] == kNegInf) continue;
    const NestView& nest = nests[g];
    const bool own = static_cast<int>(g) == g_chosen;
    for (int j : nest.members) {
      if (!avail[j]) continue;
      double d = (own ? 1.0 : 0.0) * pcond[j] - ptop[g] * pcond[j];
      if (own) d -= pcond[j] / lam_c;
      if (j == chosen) d += 1.0 / lam_c;
      dv[j] = d;
    }
    // lambda derivative only meaningful for non-singleton nests
    if (nest.members.size() > 1) {
      double vbar = 0.0;
      for (int j : nest.members)
        if (avail[j]) vbar += pcond[j] * v[j];
      const double a = inc[g] - vbar / nest.lambda;
      double d = ((own ? 1.0 : 0.0) - ptop[g]) * a;
      if (own) d += (vbar - v[chosen]) / (nest.lambda * nest.lambda);
      dlambda[g] = d;
    }
  }
}

}  // namespace ck
