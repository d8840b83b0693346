#include "stats.hpp"

#include <cmath>
#include <limits>

#include "error.hpp"

namespace ivy {

namespace {

// Continued fraction for I_x(a,b), modified Lentz iteration. Converges
// quickly for x < (a+1)/(a+b+2); the symmetry below handles the rest.
double beta_cf(double a, double b, double x) {
  const double tiny = 1e-30;
  const double eps = 1e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  fail_numeric("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) fail_numeric("incomplete beta needs a,b > 0");
  if (!(x >= 0.0 && x <= 1.0)) fail_numeric("incomplete beta needs x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double front = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) fail_numeric("t distribution needs df > 0");
  if (t == 0.0) return 0.5;
  double x = df / (df + t * t);
  double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile_two_sided(double level, double df) {
  if (!(level > 0.0 && level < 1.0))
    fail_numeric("quantile level must be inside (0,1)");
  // P(|T| <= q) = 2*cdf(q) - 1, monotone in q; bisect on it.
  double target = 0.5 * (1.0 + level);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, df) < target) {
    hi *= 2.0;
    if (hi > 1e12) fail_numeric("t quantile bracket overflow");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

void moments(const std::vector<double>& xs, double& mean, double& var) {
  double n = double(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;  // sample variance
}

}  // namespace

MeanCi mean_ci95(const std::vector<double>& xs) {
  MeanCi out;
  out.n = int(xs.size());
  if (xs.empty()) return out;
  double var = 0.0;
  moments(xs, out.mean, var);
  if (out.n >= 2 && var > 0.0) {
    double q = student_t_quantile_two_sided(0.95, double(out.n - 1));
    out.ci_half = q * std::sqrt(var / double(out.n));
  }
  return out;
}

WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    fail_numeric("welch test needs at least two samples per side");
  double ma, va, mb, vb;
  moments(a, ma, va);
  moments(b, mb, vb);
  double se2 = va / double(a.size()) + vb / double(b.size());
  WelchResult out;
  if (se2 <= 0.0) {
    out.t = ma == mb ? 0.0 : (ma > mb ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity());
    out.df = double(a.size() + b.size() - 2);
    out.p = ma == mb ? 1.0 : 0.0;
    return out;
  }
  out.t = (ma - mb) / std::sqrt(se2);
  double na = double(a.size()), nb = double(b.size());
  double num = se2 * se2;
  double den = (va / na) * (va / na) / (na - 1.0) +
               (vb / nb) * (vb / nb) / (nb - 1.0);
  out.df = num / den;
  out.p = 2.0 * student_t_cdf(-std::fabs(out.t), out.df);
  return out;
}

}  // namespace ivy
