#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "bbs/errors.hpp"
#include "bbs/tba.hpp"

namespace bbs::ldf {

using tba::is_inf;
using tba::kInf;

namespace detail {

// Moments of the stationary carrier-load distribution P(k) ~ w^k, k = 0..l.
// ln(sum w^k) is the free-energy piece of the SCGF; mean and variance are its
// first two log-derivatives in ln(w). Normalizing by the largest term keeps
// every branch finite for any w > 0.
struct LoadStats {
  double log_sum;  // ln sum_{k=0}^{l} w^k
  double mean;     // sum k w^k / sum w^k
  double var;      // second central moment
};

inline LoadStats load_stats(double w, int l) {
  if (!(w > 0.0)) throw DomainError("load_stats: fugacity must be positive");
  const double lw = std::log(w);
  // Offset by the largest exponent so the sums stay in range.
  const double emax = lw > 0.0 ? l * lw : 0.0;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (int k = 0; k <= l; ++k) {
    const double t = std::exp(k * lw - emax);
    s0 += t;
    s1 += k * t;
    s2 += static_cast<double>(k) * k * t;
  }
  const double mean = s1 / s0;
  return {emax + std::log(s0), mean, s2 / s0 - mean * mean};
}

}  // namespace detail

// One point of the scaled cumulant generating function F(lambda) of the
// transferred-ball count, with its analytic derivative F' = j^{(l)}(z e^λ).
struct ScgfPoint {
  double lambda = 0.0;
  double value = 0.0;
  double derivative = 0.0;
};

inline ScgfPoint scgf(double z, int l, double lambda) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("scgf: requires 0 < z < 1");
  const double w = z * std::exp(lambda);
  if (is_inf(l)) {
    if (w >= 1.0)
      throw DivergentQuantity("scgf: z e^lambda >= 1 at infinite capacity (phase boundary)");
    return {lambda, std::log((1.0 - z) / (1.0 - w)), w / (1.0 - w)};
  }
  if (l < 1) throw DomainError("scgf: capacity must be >= 1");
  const auto shifted = detail::load_stats(w, l);
  const auto base = detail::load_stats(z, l);
  return {lambda, shifted.log_sum - base.log_sum, shifted.mean};
}

// Second derivative F''(lambda): the variance of the carrier-load
// distribution at the shifted fugacity. Equals c2 at lambda = 0.
inline double scgf_second_derivative(double z, int l, double lambda) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("scgf: requires 0 < z < 1");
  const double w = z * std::exp(lambda);
  if (is_inf(l)) {
    if (w >= 1.0) throw DivergentQuantity("scgf: z e^lambda >= 1 at infinite capacity");
    return w / ((1.0 - w) * (1.0 - w));
  }
  return detail::load_stats(w, l).var;
}

// Rate-function point G(j) = j lambda*(j) - F(lambda*(j)), F'(lambda*) = j.
struct RatePoint {
  double j = 0.0;
  double value = 0.0;
  double multiplier = 0.0;  // lambda*(j)
};

inline RatePoint rate(double z, int l, double j) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("rate: requires 0 < z < 1");
  if (is_inf(l)) {
    if (!(j > 0.0)) throw DomainError("rate: current must be positive at infinite capacity");
    const double g = -std::log(1.0 - z) - j * std::log(z) -
                     (1.0 + j) * std::log1p(j) + j * std::log(j);
    return {j, g, std::log(j / ((1.0 + j) * z))};
  }
  if (l < 1) throw DomainError("rate: capacity must be >= 1");
  if (!(j > 0.0 && j < static_cast<double>(l)))
    throw DomainError("rate: current must lie in (0, l)");

  // F' is strictly increasing (F convex), so grow a bracket from 0 and bisect.
  double lo = -1.0, hi = 1.0;
  int guard = 0;
  while (scgf(z, l, lo).derivative > j) {
    lo *= 2.0;
    if (++guard > 200) throw RootNotBracketed("rate: bracket growth failed (low side)");
  }
  guard = 0;
  while (scgf(z, l, hi).derivative < j) {
    hi *= 2.0;
    if (++guard > 200) throw RootNotBracketed("rate: bracket growth failed (high side)");
  }
  const double jtol = 1e-13 * std::max(1.0, std::abs(j));
  double lambda = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fp = scgf(z, l, lambda).derivative;
    if (fp > j)
      hi = lambda;
    else
      lo = lambda;
    if (std::abs(fp - j) < jtol) break;
    lambda = 0.5 * (lo + hi);
  }
  // Newton polish with the analytic second derivative.
  for (int it = 0; it < 4; ++it) {
    const double fp = scgf(z, l, lambda).derivative;
    const double fpp = scgf_second_derivative(z, l, lambda);
    if (fpp <= 0.0) break;
    const double next = lambda - (fp - j) / fpp;
    if (next > lo && next < hi) lambda = next;
  }
  const auto pt = scgf(z, l, lambda);
  return {j, j * lambda - pt.value, lambda};
}

// Shifted two-temperature parameters (alpha, zeta) of the tilted ensemble:
// zeta = z e^lambda and alpha solves
//   (alpha^{1/2} - alpha^{-1/2})/(zeta^{1/2} - zeta^{-1/2}) = e^{(beta1 - mu)/2}
// through the positive root of the quadratic in alpha^{1/2}.
struct ShiftedParams {
  double alpha = 0.0;
  double zeta = 0.0;
};

inline ShiftedParams alpha_of(double lambda, double mu, double a, double z) {
  tba::validate_az(a, z);
  const double zeta = z * std::exp(lambda);
  if (!(zeta > 0.0)) throw DomainError("alpha_of: zeta must be positive");
  // e^{beta1/2} expressed through (a, z); both differences are negative.
  const double k = (std::sqrt(a) - 1.0 / std::sqrt(a)) /
                   (std::sqrt(z) - 1.0 / std::sqrt(z)) * std::exp(-0.5 * mu);
  const double c = (std::sqrt(zeta) - 1.0 / std::sqrt(zeta)) * k;
  const double root = 0.5 * (c + std::sqrt(c * c + 4.0));
  const double alpha = root * root;
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw DomainError("alpha_of: no positive solution for these parameters");
  return {alpha, zeta};
}

namespace detail {

// Ball and soliton currents continued to arbitrary positive (alpha, zeta), as
// needed by the tilted-ensemble derivatives of F(lambda, mu). For zeta > 1 the
// formulas are rescaled by zeta^{-l} so nothing overflows; the zeta = 1 point
// itself is a removable 0/0 that callers must avoid.
inline double ball_current_at(double alpha, double zeta, int l) {
  if (is_inf(l)) return alpha * (1.0 + zeta) / ((1.0 + alpha) * (1.0 - zeta));
  const double lz = std::log(zeta);
  if (lz == 0.0) return l * alpha / (1.0 + alpha);
  if (lz < 0.0) {
    const double zl = std::exp(l * lz);
    const double one_minus_zl = -std::expm1(l * lz);
    const double om = -std::expm1(std::log(alpha) + l * lz);  // 1 - alpha zeta^l
    return alpha * (1.0 + zeta) * one_minus_zl /
               ((1.0 + alpha) * -std::expm1(lz) * om) -
           l * alpha * zl / om;
  }
  const double q = std::exp(-l * lz);  // zeta^{-l} in (0, 1)
  return alpha * (1.0 + zeta) * (q - 1.0) / ((1.0 + alpha) * (1.0 - zeta) * (q - alpha)) -
         l * alpha / (q - alpha);
}

inline double soliton_current_at(double alpha, double zeta, int l) {
  if (is_inf(l)) return alpha / (1.0 + alpha);
  const double lz = std::log(zeta);
  if (lz <= 0.0) {
    const double one_minus_zl = -std::expm1(l * lz);
    const double om = -std::expm1(std::log(alpha) + l * lz);
    return alpha * one_minus_zl / ((1.0 + alpha) * om);
  }
  const double q = std::exp(-l * lz);
  return alpha * (q - 1.0) / ((1.0 + alpha) * (q - alpha));
}

}  // namespace detail

// Joint SCGF F(lambda, mu) of transferred balls (lambda) and solitons (mu) in
// the two-temperature state, with its partial derivatives (the currents in
// the tilted ensemble).
struct Scgf2tPoint {
  double lambda = 0.0, mu = 0.0;
  double value = 0.0;
  double d_lambda = 0.0, d_mu = 0.0;
};

inline Scgf2tPoint scgf_2t(double a, double z, int l, double lambda, double mu) {
  const auto [alpha, zeta] = alpha_of(lambda, mu, a, z);
  double value;
  if (is_inf(l)) {
    if (zeta >= 1.0)
      throw DivergentQuantity("scgf_2t: z e^lambda >= 1 at infinite capacity");
    value = std::log((1.0 - a) / (1.0 - alpha));
  } else {
    if (l < 1) throw DomainError("scgf_2t: capacity must be >= 1");
    if (zeta == 1.0)
      throw DomainError("scgf_2t: zeta = 1 boundary point (evaluate nearby instead)");
    // alpha and zeta sit on the same side of 1, so both logs stay real; the
    // zeta > 1 branch is rescaled by zeta^{-l} to avoid overflow.
    double log_num;
    if (zeta < 1.0) {
      log_num = std::log(-std::expm1(std::log(alpha) + l * std::log(zeta))) -
                std::log1p(-alpha);
    } else {
      const double q = std::exp(-l * std::log(zeta));
      log_num = l * std::log(zeta) + std::log((alpha - q) / (alpha - 1.0));
    }
    const double log_den =
        std::log(-std::expm1(std::log(a) + l * std::log(z))) - std::log1p(-a);
    value = log_num - log_den;
  }
  return {lambda, mu, value, detail::ball_current_at(alpha, zeta, l),
          detail::soliton_current_at(alpha, zeta, l)};
}

// Joint large-deviation rate function at infinite capacity, evaluated from the
// closed form. j_ball is the ball current, j_sol the soliton current; the
// admissible wedge is 0 < j_sol < min(1, j_ball). The (1-2 j_sol) factors are
// grouped so the expression stays finite through j_sol = 1/2.
inline double rate_2t_inf(double a, double z, double j_ball, double j_sol) {
  tba::validate_az(a, z);
  if (!(j_sol > 0.0 && j_sol < 1.0 && j_ball > j_sol))
    throw DomainError("rate_2t_inf: requires 0 < j_sol < min(1, j_ball)");
  const double lambda_star = std::log((j_ball - j_sol) / (z * (j_ball + j_sol)));
  const double mu_star_reduced =
      std::log(4.0 * (1.0 - j_sol) * j_sol * j_sol * j_sol * (a + 1.0 / a - 2.0) /
               ((j_ball * j_ball - j_sol * j_sol) * (z + 1.0 / z - 2.0)));
  const double one_minus_2j = 1.0 - 2.0 * j_sol;
  const double grouped =
      one_minus_2j == 0.0 ? 0.0 : one_minus_2j * std::log(std::abs(one_minus_2j));
  return j_ball * lambda_star + j_sol * mu_star_reduced + grouped -
         std::log((1.0 - a) * (1.0 - j_sol));
}

}  // namespace bbs::ldf
