#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "bbs/errors.hpp"

namespace bbs::tm {

// Deformed carrier vertex matrix L^z(y), size (l+1) x (l+1), row = entering
// load. Row rules: <0|L = <0| + z<1|; <n|L = y^n <n-1| + z y^n <n+1| for
// 0 < n < l; <l|L = y^l <l-1| + z y^l <l|. At y = 1 every row sums to 1+z and
// the left Perron vector is (1, z, ..., z^l).
inline Eigen::MatrixXd build_carrier_matrix(int l, double z, double y) {
  if (l < 1 || !(z > 0.0) || !(y > 0.0))
    throw DomainError("build_carrier_matrix: requires l >= 1, z > 0, y > 0");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(l + 1, l + 1);
  m(0, 0) = 1.0;
  m(0, 1) = z;
  for (int n = 1; n < l; ++n) {
    const double yn = std::pow(y, n);
    m(n, n - 1) = yn;
    m(n, n + 1) = z * yn;
  }
  const double yl = std::pow(y, l);
  m(l, l - 1) = yl;
  m(l, l) = z * yl;
  return m;
}

namespace detail {

// Row patterns: m(n, c) = y^{r(n)} (P(n, c) + z Pz(n, c)) with r(0) = 0,
// r(n) = n, so every y- and z-derivative is available analytically.
inline void patterns(int l, Eigen::MatrixXd& P, Eigen::MatrixXd& Pz) {
  P = Eigen::MatrixXd::Zero(l + 1, l + 1);
  Pz = Eigen::MatrixXd::Zero(l + 1, l + 1);
  P(0, 0) = 1.0;
  Pz(0, 1) = 1.0;
  for (int n = 1; n < l; ++n) {
    P(n, n - 1) = 1.0;
    Pz(n, n + 1) = 1.0;
  }
  P(l, l - 1) = 1.0;
  Pz(l, l) = 1.0;
}

struct LogDerivatives {
  double lambda;  // leading eigenvalue
  double ly;      // (y d/dy) ln lambda
  double lyy;     // (y d/dy)^2 ln lambda
  double lz;      // d ln lambda / dz
  double lyz;     // d/dz of (y d/dy) ln lambda
};

// First and second derivatives of the Perron eigenvalue at y = 1 via the
// standard resolvent sums over the full (l+1)-dimensional eigensystem.
inline LogDerivatives leading_log_derivatives(int l, double z) {
  using Cplx = std::complex<double>;
  using MatC = Eigen::MatrixXcd;
  using VecC = Eigen::VectorXcd;

  Eigen::MatrixXd P, Pz;
  patterns(l, P, Pz);
  const int n = l + 1;
  Eigen::VectorXd rofn(n);
  for (int r = 0; r < n; ++r) rofn(r) = r;

  // B and its partial derivatives at y = 1.
  Eigen::MatrixXd B = P + z * Pz;
  Eigen::MatrixXd By = rofn.asDiagonal() * B;                     // dB/dy
  Eigen::MatrixXd Byy(n, n);                                      // d2B/dy2
  for (int r = 0; r < n; ++r) Byy.row(r) = r * (r - 1.0) * B.row(r);
  Eigen::MatrixXd Bz = Pz;                                        // dB/dz
  Eigen::MatrixXd Byz = rofn.asDiagonal() * Pz;                   // d2B/dydz

  Eigen::EigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success)
    throw SingularSystem("transfer matrix: eigendecomposition failed");
  const VecC evals = es.eigenvalues();
  const MatC V = es.eigenvectors();
  const MatC W = V.inverse();  // rows are left eigenvectors, biorthonormal

  int lead = 0;
  for (int k = 1; k < n; ++k)
    if (evals(k).real() > evals(lead).real()) lead = k;
  const Cplx lam = evals(lead);
  if (!(lam.real() > 0.0) || std::abs(lam.imag()) > 1e-10 * lam.real())
    throw DegenerateLeadingEigenvalue("transfer matrix: leading eigenvalue not Perron-like");
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k)
    if (k != lead) gap = std::min(gap, std::abs(lam - evals(k)));
  if (gap < 1e-12 * std::max(1.0, std::abs(lam)))
    throw DegenerateLeadingEigenvalue("transfer matrix: Perron gap below 1e-12");

  const VecC psi = V.col(lead);
  const Eigen::RowVectorXcd phi = W.row(lead);  // phi * psi = 1

  const MatC ByC = By.cast<Cplx>(), ByyC = Byy.cast<Cplx>(), BzC = Bz.cast<Cplx>(),
             ByzC = Byz.cast<Cplx>();

  auto first = [&](const MatC& D) { return (phi * D * psi)(0, 0); };

  // Reduced resolvent applied between two directions:
  //   phi Du S Dv psi with S = sum_{k != lead} psi_k phi_k / (lam - lam_k).
  auto resolvent_term = [&](const MatC& Du, const MatC& Dv) {
    const VecC right = Dv * psi;
    const Eigen::RowVectorXcd left = phi * Du;
    Cplx sum = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == lead) continue;
      sum += (left * V.col(k))(0, 0) * (W.row(k) * right)(0, 0) / (lam - evals(k));
    }
    return sum;
  };

  const Cplx ly1 = first(ByC);
  const Cplx lz1 = first(BzC);
  const Cplx lyy2 = first(ByyC) + 2.0 * resolvent_term(ByC, ByC);
  const Cplx lyz2 = first(ByzC) + resolvent_term(ByC, BzC) + resolvent_term(BzC, ByC);

  LogDerivatives d;
  d.lambda = lam.real();
  const double L = d.lambda;
  d.ly = ly1.real() / L;
  // (y d/dy)^2 ln lambda at y=1 = ly + lyy/lambda - ly^2.
  d.lyy = d.ly + lyy2.real() / L - d.ly * d.ly;
  d.lz = lz1.real() / L;
  d.lyz = lyz2.real() / L - ly1.real() * lz1.real() / (L * L);
  return d;
}

}  // namespace detail

// Mean ball current from the stationary carrier distribution: the average
// number of balls in the carrier, sum_k k z^k / sum_k z^k over k = 0..l.
inline double stationary_current(int l, double z) {
  if (l < 1 || !(z > 0.0)) throw DomainError("stationary_current: requires l >= 1, z > 0");
  double s0 = 0.0, s1 = 0.0, t = 1.0;
  for (int k = 0; k <= l; ++k) {
    s0 += t;
    s1 += k * t;
    t *= z;
  }
  return s1 / s0;
}

// Equal-time integrated current variance f = (y d/dy)^2 ln lambda_max at y=1.
inline double equal_time_variance(int l, double z) {
  return detail::leading_log_derivatives(l, z).lyy;
}

// Second cumulant through the transfer matrix:
// c2 = (z d/dz)(y d/dy) ln lambda_max at y = 1.
inline double c2_via_tm(int l, double z) {
  return z * detail::leading_log_derivatives(l, z).lyz;
}

// Conjectured closed form for f, with g_j = 1 + z^j.
inline double conjectured_f(int l, double z) {
  if (l < 1 || !(z > 0.0 && z < 1.0))
    throw DomainError("conjectured_f: requires l >= 1 and 0 < z < 1");
  auto g = [&](int jj) { return 1.0 + std::pow(z, jj); };
  const double omz = 1.0 - z;
  const double oml = 1.0 - std::pow(z, l + 1);
  const double oml3 = oml * oml * oml;
  const double t1 = z * (1.0 + 6.0 * z + z * z) * (1.0 - std::pow(z, 3 * l + 3)) /
                    (omz * omz * omz * omz * oml3);
  const double t2 = 24.0 * std::pow(z, l + 5) * (1.0 - std::pow(z, l - 3)) /
                    (omz * omz * omz * omz * oml3);
  const double t3 = 3.0 * std::pow(z, l + 2) *
                    (g(l + 2) + 7.0 * z * g(l) + 8.0 * z * z * g(l - 2)) /
                    (omz * omz * omz * oml3);
  const double t4 = static_cast<double>(l + 1) * (l + 1) * std::pow(z, l + 1) *
                    (g(l + 2) + 2.0 * l * (1.0 + z) * g(l + 1) + 3.0 * z * g(l)) /
                    (omz * oml3);
  return t1 - t2 - t3 - t4;
}

}  // namespace bbs::tm
