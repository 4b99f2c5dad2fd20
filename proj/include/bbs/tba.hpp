#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bbs/errors.hpp"

namespace bbs::tba {

// Marker for the infinite capacity/charge index. std::min works on it
// directly, which matches how the formulas use min(i, l).
inline constexpr int kInf = std::numeric_limits<int>::max();

inline bool is_inf(int k) { return k == kInf; }

inline void validate_az(double a, double z) {
  if (!(a > 0.0 && a < 1.0 && z > 0.0 && z < 1.0))
    throw DomainError("TBA parameters require 0 < a < 1 and 0 < z < 1 (i.i.d.: a = z)");
}

namespace detail {

// Factor cache for a two-parameter (a, z) state; the i.i.d. state is a = z.
// 1 - a z^k is evaluated through expm1 so the densities stay accurate near
// half filling, where a z^k approaches 1.
struct AzState {
  double a, z, la, lz;

  AzState(double a_, double z_) : a(a_), z(z_), la(std::log(a_)), lz(std::log(z_)) {
    validate_az(a_, z_);
  }

  double az_pow(int k) const { return std::exp(la + k * lz); }  // a z^k
  double one_minus_az(int k) const { return -std::expm1(la + k * lz); }
  double one_plus_az(int k) const { return 1.0 + az_pow(k); }

  double sigma(int k) const {  // hole density; sigma_0 = 1
    if (k == 0) return 1.0;
    return (1.0 - a) * one_plus_az(k) / ((1.0 + a) * one_minus_az(k));
  }

  double sigma_inf() const { return (1.0 - a) / (1.0 + a); }

  double rho(int k) const {  // density of size-k solitons
    const double num = az_pow(k - 1) * (1.0 - a) * (1.0 - z) * (1.0 - z) * one_plus_az(k);
    const double den =
        (1.0 + a) * one_minus_az(k - 1) * one_minus_az(k) * one_minus_az(k + 1);
    return num / den;
  }
};

// Extensible arrays over the soliton-size index, shared by the adaptive sums.
// Velocities use the hole-density representation
//   v^{(l)}_i = sigma_l * sum_{k=1}^{min(i,l)} 1/(sigma_{k-1} sigma_k),
// a positive-term sum that stays stable all the way to half filling.
class Series {
 public:
  Series(double a, double z) : s_(a, z) {}

  const AzState& state() const { return s_; }

  double sigma(int k) {
    if (k == 0) return 1.0;
    ensure(k);
    return sigma_[static_cast<std::size_t>(k) - 1];
  }

  double rho(int k) {
    ensure(k);
    return rho_[static_cast<std::size_t>(k) - 1];
  }

  // sum_{k=1..i} 1/(sigma_{k-1} sigma_k)
  double S(int i) {
    ensure(i);
    return prefix_[static_cast<std::size_t>(i) - 1];
  }

  double v_bare(int i) { return s_.sigma_inf() * S(i); }  // v_i = v^{(inf)}_i

  double v(int l, int i) {
    if (is_inf(l)) return v_bare(i);
    return sigma(l) * S(std::min(i, l));
  }

  double w(int i) {  // W_i = rho_i sigma_i (rho_i + sigma_i) v_i^2
    const double r = rho(i), s = sigma(i), vb = v_bare(i);
    return r * s * (r + s) * vb * vb;
  }

 private:
  void ensure(int k) {
    while (static_cast<int>(sigma_.size()) < k) {
      const int i = static_cast<int>(sigma_.size()) + 1;
      sigma_.push_back(s_.sigma(i));
      rho_.push_back(s_.rho(i));
      const double prev = (i == 1) ? 0.0 : prefix_.back();
      const double s_im1 = (i == 1) ? 1.0 : sigma_[static_cast<std::size_t>(i) - 2];
      prefix_.push_back(prev + 1.0 / (s_im1 * sigma_.back()));
    }
  }

  AzState s_;
  std::vector<double> sigma_, rho_, prefix_;
};

}  // namespace detail

// Truncated soliton-density profile of an (a, z) state; y_k = rho_k / sigma_k
// are the normal-mode variables e^{-eps_k}.
struct TbaProfile {
  double a = 0.0, z = 0.0;
  int K = 0;
  std::vector<double> rho, sigma, y;  // index 0 holds k = 1

  double rho_at(int k) const { return rho.at(static_cast<std::size_t>(k) - 1); }
  double sigma_at(int k) const { return sigma.at(static_cast<std::size_t>(k) - 1); }
  double y_at(int k) const { return y.at(static_cast<std::size_t>(k) - 1); }

  // Auxiliary: truncated fermionic free energy -sum_k ln(1 + e^{-eps_k}).
  double free_energy() const {
    double f = 0.0;
    for (double yk : y) f -= std::log1p(yk);
    return f;
  }

  // Auxiliary: mode occupancy n_k = (1 + e^{eps_k})^{-1} = y_k / (1 + y_k).
  double mode_occupancy(int k) const {
    const double yk = y_at(k);
    return yk / (1.0 + yk);
  }
};

inline TbaProfile profile(double a, double z, int K) {
  if (K < 1) throw DomainError("profile: truncation must be >= 1");
  detail::AzState s(a, z);
  TbaProfile p;
  p.a = a;
  p.z = z;
  p.K = K;
  p.rho.reserve(static_cast<std::size_t>(K));
  p.sigma.reserve(static_cast<std::size_t>(K));
  p.y.reserve(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    p.rho.push_back(s.rho(k));
    p.sigma.push_back(s.sigma(k));
    p.y.push_back(p.rho.back() / p.sigma.back());
  }
  return p;
}

// Effective velocities v^{(l)}_k under the T_l dynamics (l may be kInf).
struct VelocityTable {
  int capacity = 1;  // l, or kInf
  std::vector<double> v;

  double at(int k) const { return v.at(static_cast<std::size_t>(k) - 1); }
};

// Hole-density route: v^{(l)}_i = sum_{k<=min(l,i)} sigma_l/(sigma_{k-1} sigma_k).
inline VelocityTable velocities(const TbaProfile& p, int l) {
  if (!is_inf(l) && (l < 1 || l > p.K))
    throw DomainError("velocities: finite capacity must lie in [1, K]");
  VelocityTable t;
  t.capacity = l;
  t.v.resize(static_cast<std::size_t>(p.K));
  const double sig_l = is_inf(l) ? (1.0 - p.a) / (1.0 + p.a) : p.sigma_at(l);
  double partial = 0.0;
  double prev_sigma = 1.0;
  for (int k = 1; k <= p.K; ++k) {
    const double sk = p.sigma_at(k);
    if (is_inf(l) || k <= l) partial += 1.0 / (prev_sigma * sk);
    prev_sigma = sk;
    t.v[static_cast<std::size_t>(k) - 1] = sig_l * partial;
  }
  return t;
}

// Closed-form route for the same velocities:
//   v_k = (1+a)k/(1-a) - 2a(1+z)(1-z^k)/((1-a)(1-z)(1+a z^k)),
//   v^{(l)}_k = (1+a z^l)/(1-a z^l) * v_{min(k,l)}.
inline double velocity_closed(double a, double z, int l, int k) {
  detail::AzState s(a, z);
  const int kk = is_inf(l) ? k : std::min(k, l);
  const double one_minus_zk = -std::expm1(kk * s.lz);
  const double vb = (1.0 + a) * kk / (1.0 - a) -
                    2.0 * a * (1.0 + z) * one_minus_zk /
                        ((1.0 - a) * (1.0 - z) * s.one_plus_az(kk));
  if (is_inf(l)) return vb;
  return s.one_plus_az(l) / s.one_minus_az(l) * vb;
}

// Collision-rate equation residual v^{(l)}_i - kappa^{(l)}_i
//   - sum_k 2 min(i,k) (v^{(l)}_i - v^{(l)}_k) rho_k, truncated at K.
inline double velocity_equation_residual(const TbaProfile& p, const VelocityTable& t,
                                         int i) {
  const double vi = t.at(i);
  const double kappa = is_inf(t.capacity) ? i : std::min(i, t.capacity);
  double sum = 0.0;
  for (int k = 1; k <= p.K; ++k)
    sum += 2.0 * std::min(i, k) * (vi - t.at(k)) * p.rho_at(k);
  return vi - kappa - sum;
}

// Mean generalized current eta^{(l)}_j = sum_k min(j,k) rho_k v^{(l)}_k,
// closed form; j = kInf gives the ball current, j = 1 the soliton current.
inline double eta_mean(double a, double z, int j, int l) {
  detail::AzState s(a, z);
  if (j < 1 || l < 1) throw DomainError("eta_mean: indices must be >= 1");
  const double zj = is_inf(j) ? 0.0 : std::exp(j * s.lz);
  const double zl = is_inf(l) ? 0.0 : std::exp(l * s.lz);
  const double om_j = is_inf(j) ? 1.0 : s.one_minus_az(j);
  const double om_l = is_inf(l) ? 1.0 : s.one_minus_az(l);
  const int mn = std::min(j, l);
  const int mx = std::max(j, l);
  const double one_minus_zmin = is_inf(mn) ? 1.0 : -std::expm1(mn * s.lz);
  const double one_plus_azmax = is_inf(mx) ? 1.0 : s.one_plus_az(mx);
  const double first =
      a * (1.0 + z) * one_minus_zmin * one_plus_azmax / ((1.0 + a) * (1.0 - z) * om_j * om_l);
  double second = 0.0;
  if (!is_inf(mn)) second = mn * a * (zj + zl) / (om_j * om_l);
  return first - second;
}

struct MeanCurrents {
  double ball = 0.0;     // j^{(l)}_inf
  double soliton = 0.0;  // j^{(l)}_1
};

inline MeanCurrents mean_currents(double a, double z, int l) {
  return {eta_mean(a, z, kInf, l), eta_mean(a, z, 1, l)};
}

// i.i.d. mean ball current, direct closed form j = z/(1-z) - (l+1)z^{l+1}/(1-z^{l+1}).
inline double ball_current_iid(double z, int l) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("ball_current_iid: requires 0 < z < 1");
  if (is_inf(l)) return z / (1.0 - z);
  const double lz = std::log(z);
  const double zl1 = std::exp((l + 1) * lz);
  const double om = -std::expm1((l + 1) * lz);
  return z / (1.0 - z) - (l + 1) * zl1 / om;
}

// i.i.d. second cumulant, direct closed form
//   c2 = z/(1-z)^2 - (l+1)^2 z^{l+1}/(1-z^{l+1})^2.
inline double c2_iid(double z, int l) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("c2_iid: requires 0 < z < 1");
  const double lead = z / ((1.0 - z) * (1.0 - z));
  if (is_inf(l)) return lead;
  const double lz = std::log(z);
  const double zl1 = std::exp((l + 1) * lz);
  const double om = -std::expm1((l + 1) * lz);
  return lead - static_cast<double>(l + 1) * (l + 1) * zl1 / (om * om);
}

// Two-temperature second cumulant of the transferred-ball count (equals the
// i.i.d. form at a = z).
inline double c2_analytic(double a, double z, int l) {
  detail::AzState s(a, z);
  const double zl = is_inf(l) ? 0.0 : std::exp(l * s.lz);
  const double om_l = is_inf(l) ? 1.0 : s.one_minus_az(l);
  const double one_minus_zl = is_inf(l) ? 1.0 : -std::expm1(l * s.lz);
  const double ap1 = 1.0 + a;
  const double t1 = a * (1.0 - a) * (1.0 + z) * (1.0 + z) * one_minus_zl *
                    (1.0 + a * a * zl) /
                    (ap1 * ap1 * ap1 * (1.0 - z) * (1.0 - z) * om_l * om_l);
  const double t2 =
      2.0 * a * z * one_minus_zl / (ap1 * (1.0 - z) * (1.0 - z) * om_l);
  double t3 = 0.0;
  if (!is_inf(l)) {
    t3 = a * l * zl / (om_l * om_l) *
         (l + 2.0 * (1.0 - a) * (1.0 + z) / (ap1 * (1.0 - z)));
  }
  return t1 + t2 - t3;
}

// D^{(1)} = sum_i W_i = a(1-a)(1+z)/((1+a)^3 (1-z)); reduces to z/(1+z)^2 = p(1-p)
// in the i.i.d. case.
inline double drude1(double a, double z) {
  validate_az(a, z);
  const double ap1 = 1.0 + a;
  return a * (1.0 - a) * (1.0 + z) / (ap1 * ap1 * ap1 * (1.0 - z));
}

// Closed partial sum sum_{i<l} W_i (two-temperature A_l polynomial). Exact in
// real arithmetic; used as a cross-check of the direct summation, which is the
// numerically robust route near half filling.
inline double partial_w_sum_closed(double a, double z, int l) {
  detail::AzState s(a, z);
  if (l < 1) throw DomainError("partial_w_sum_closed: capacity must be >= 1");
  auto g = [&](double zz) {
    const double b = 1.0 - l * (1.0 - zz);
    return (zz + b * b) / (1.0 + zz);
  };
  auto h = [&](double zz) {
    return (1.0 + l) * (1.0 + l) + static_cast<double>(l) * l * zz +
           (1.0 - 2.0 * l + zz) * (3.0 + zz + 2.0 * l * zz) / (1.0 + zz);
  };
  const double zi = 1.0 / z;
  auto zp = [&](int k) { return std::pow(z, k); };
  const double A = 1.0 + 2.0 * a * (1.0 + a * a) * zp(2 * l - 1) +
                   std::pow(a, 4) * zp(4 * l - 2) +
                   a * a * zp(2 * l - 2) * (1.0 + 8.0 * z + z * z) -
                   a * zp(l - 1) * (2.0 + a * a * a * zp(2 * l - 1)) * g(z) -
                   zp(l) * (1.0 + 2.0 * a * a * a * zp(2 * l - 1)) * g(zi) -
                   a * a * zp(l - 1) * h(z) - a * a * zp(3 * l - 1) * h(zi);
  const double ap1 = 1.0 + a;
  const double om_lm1 = s.one_minus_az(l - 1);
  const double om_l = s.one_minus_az(l);
  return a * (1.0 - a) * (1.0 + z) * A /
         (ap1 * ap1 * ap1 * (1.0 - z) * om_lm1 * om_lm1 * om_l * om_l);
}

// Tail sum_{i>=r} rho_i sigma_i (rho_i + sigma_i), closed form.
inline double tail_sum(double a, double z, int r) {
  detail::AzState s(a, z);
  if (r < 1) throw DomainError("tail_sum: index must be >= 1");
  const double oma = 1.0 - a;
  const double ap1 = 1.0 + a;
  const double zr1 = std::exp((r - 1) * s.lz);
  const double om_rm1 = s.one_minus_az(r - 1);
  const double om_r = s.one_minus_az(r);
  return a * oma * oma * oma * (1.0 - z) * zr1 * (1.0 + a * a * std::exp((2 * r - 1) * s.lz)) /
         (ap1 * ap1 * ap1 * om_rm1 * om_rm1 * om_r * om_r);
}

namespace detail {

inline constexpr int kMaxAdaptiveTerms = 4'000'000;

// Adaptive sum of rho_k sigma_k (rho_k + sigma_k) * prod_c v^{(c)}_k over k,
// used whenever no exact finite reduction applies. Terms decay geometrically
// in z (up to polynomial factors), so a relative-tail stop is rigorous.
template <class TermFactor>
double adaptive_sum(Series& ser, TermFactor&& factor) {
  double sum = 0.0;
  int small_streak = 0;
  for (int k = 1; k <= kMaxAdaptiveTerms; ++k) {
    const double r = ser.rho(k), s = ser.sigma(k);
    const double term = r * s * (r + s) * factor(k);
    sum += term;
    if (std::abs(term) <= 1e-16 * std::abs(sum)) {
      if (++small_streak >= 3) return sum;
    } else {
      small_streak = 0;
    }
  }
  throw DivergentQuantity("adaptive TBA sum did not converge (state too close to half filling)");
}

}  // namespace detail

// Drude weight D^{(l)} = sum_i W_i (v^{(l)}_i)^2 via the exact finite
// reduction D^{(l)} = sum_{i<l} W_i (v^{(l)}_i)^2 + (v^{(l)}_l)^2 (D^{(1)} -
// sum_{i<l} W_i); l = kInf falls back to the adaptive series.
inline double drude_analytic(double a, double z, int l) {
  validate_az(a, z);
  detail::Series ser(a, z);
  if (is_inf(l)) {
    return detail::adaptive_sum(ser, [&](int k) {
      const double v = ser.v_bare(k);
      return v * v * v * v;
    });
  }
  if (l < 1) throw DomainError("drude_analytic: capacity must be >= 1");
  double head = 0.0, wsum = 0.0;
  for (int i = 1; i < l; ++i) {
    const double wi = ser.w(i);
    const double vli = ser.v(l, i);
    head += wi * vli * vli;
    wsum += wi;
  }
  const double vll = ser.v(l, l);
  return head + vll * vll * (drude1(a, z) - wsum);
}

// Second cumulant through the TBA sum c2 = sum_i W_i v^{(l)}_i, reduced to a
// finite sum the same way. Cross-checks c2_analytic.
inline double c2_tba_sum(double a, double z, int l) {
  validate_az(a, z);
  detail::Series ser(a, z);
  if (is_inf(l)) {
    return detail::adaptive_sum(ser, [&](int k) {
      const double v = ser.v_bare(k);
      return v * v * v;
    });
  }
  double head = 0.0, wsum = 0.0;
  for (int i = 1; i < l; ++i) {
    const double wi = ser.w(i);
    head += wi * ser.v(l, i);
    wsum += wi;
  }
  return head + ser.v(l, l) * (drude1(a, z) - wsum);
}

// Four-index correlation C^{l,m}_{i,j} = sum_k rho_k sigma_k (rho_k+sigma_k)
// v^{(i)}_k v^{(j)}_k v^{(l)}_k v^{(m)}_k, completely symmetric in the four
// indices. All-finite index sets use the exact tail (tail_sum); infinite
// indices are summed adaptively.
inline double four_index_correlation(double a, double z, int i, int j, int l, int m) {
  validate_az(a, z);
  for (int c : {i, j, l, m})
    if (c < 1) throw DomainError("four_index_correlation: indices must be >= 1");
  detail::Series ser(a, z);
  const bool all_finite = !is_inf(i) && !is_inf(j) && !is_inf(l) && !is_inf(m);
  if (all_finite) {
    const int r = std::max(std::max(i, j), std::max(l, m));
    double head = 0.0;
    for (int k = 1; k < r; ++k) {
      const double rk = ser.rho(k), sk = ser.sigma(k);
      head += rk * sk * (rk + sk) * ser.v(i, k) * ser.v(j, k) * ser.v(l, k) * ser.v(m, k);
    }
    return head +
           tail_sum(a, z, r) * ser.v(i, i) * ser.v(j, j) * ser.v(l, l) * ser.v(m, m);
  }
  return detail::adaptive_sum(
      ser, [&](int k) { return ser.v(i, k) * ser.v(j, k) * ser.v(l, k) * ser.v(m, k); });
}

// Predicted pseudoenergy fluctuation (1 + e^{eps_i}) / sigma_i; off-diagonal
// covariances are predicted to vanish.
inline double pseudoenergy_cov_prediction(const TbaProfile& p, int i) {
  if (i < 1 || i > p.K) throw DomainError("pseudoenergy_cov_prediction: index out of range");
  return (1.0 + p.sigma_at(i) / p.rho_at(i)) / p.sigma_at(i);
}

inline double fugacity_from_density(double p) {
  if (!(p >= 0.0 && p < 0.5)) throw DomainError("density must lie in [0, 1/2)");
  return p / (1.0 - p);
}

inline double density_from_fugacity(double z) {
  if (!(z >= 0.0 && z < 1.0)) throw DomainError("fugacity must lie in [0, 1)");
  return z / (1.0 + z);
}

}  // namespace bbs::tba
