#ifndef CK_STATS_HPP
#define CK_STATS_HPP

#include <span>

namespace ck {

// Inverse standard normal CDF (Wichura's AS 241 rational approximation,
// accurate to well below 1e-9 over (0,1)). Throws NumericError outside (0,1).
double norm_ppf(double p);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi2_sf(double x, double df);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// log(sum(exp(v))) with max shift; -inf for an empty span.
double log_sum_exp(std::span<const double> v);

}  // namespace ck

#endif
