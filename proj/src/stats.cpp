#include "ck/stats.hpp"

#include <cmath>
#include <limits>

#include "ck/error.hpp"

namespace ck {

namespace {

double poly(const double* c, int n, double r) {
  double v = c[n - 1];
  for (int i = n - 2; i >= 0; --i) v = v * r + c[i];
  return v;
}

// AS 241 PPND16 coefficients.
const double kA[8] = {3.3871328727963666080e0,  1.3314166789178437745e2,
                      1.9715909503065514427e3,  1.3731693765509461125e4,
                      4.5921953931549871457e4,  6.7265770927008700853e4,
                      3.3430575583588128105e4,  2.5090809287301226727e3};
const double kB[8] = {1.0,                      4.2313330701600911252e1,
                      6.8718700749205790830e2,  5.3941960214247511077e3,
                      2.1213794301586595867e4,  3.9307895800092710610e4,
                      2.8729085735721942674e4,  5.2264952788528545610e3};
const double kC[8] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                      5.76949722146069140550e0, 3.64784832476320460504e0,
                      1.27045825245236838258e0, 2.41780725177450611770e-1,
                      2.27238449892691845833e-2, 7.74545014278341407640e-4};
const double kD[8] = {1.0,                      2.05319162663775882187e0,
                      1.67638483018380384940e0, 6.89767334985100004550e-1,
                      1.48103976427480074590e-1, 1.51986665636164571966e-2,
                      5.47593808499534494600e-4, 1.05075007164441684324e-9};
const double kE[8] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                      1.78482653991729133580e0, 2.96560571828504891230e-1,
                      2.65321895265761230930e-2, 1.24266094738807843860e-3,
                      2.71155556874348757815e-5, 2.01033439929228813265e-7};
const double kF[8] = {1.0,                      5.99832206555887937690e-1,
                      1.36929880922735805310e-1, 1.48753612908506148525e-2,
                      7.86869131145613259100e-4, 1.84631831751005468180e-5,
                      1.42151175831644588870e-7, 2.04426310338993978564e-15};

}  // namespace

double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericError("norm_ppf: p must lie strictly inside (0,1)");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(kA, 8, r) / poly(kB, 8, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double v;
  if (r <= 5.0) {
    r -= 1.6;
    v = poly(kC, 8, r) / poly(kD, 8, r);
  } else {
    r -= 5.0;
    v = poly(kE, 8, r) / poly(kF, 8, r);
  }
  return q < 0.0 ? -v : v;
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw NumericError("gamma_q: invalid arguments");
  if (x == 0.0) return 1.0;
  const double eps = std::numeric_limits<double>::epsilon();
  const double fpmin = std::numeric_limits<double>::min() / eps;
  const double lnpre = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // series expansion for P(a,x)
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * eps) break;
    }
    return 1.0 - sum * std::exp(lnpre);
  }
  // continued fraction for Q(a,x), modified Lentz
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return std::exp(lnpre) * h;
}

double chi2_sf(double x, double df) {
  if (df <= 0.0) throw NumericError("chi2_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  double m = v[0];
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace ck
