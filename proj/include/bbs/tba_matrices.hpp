#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "bbs/errors.hpp"
#include "bbs/tba.hpp"

namespace bbs::tba {

// Dressing matrix G = (Id + M yhat)^{-1} on the K x K truncation,
// M_{ij} = 2 min(i,j), yhat = diag(y_k). GM is symmetric and
// (GM)_{il} = 2 sigma_i v^{(l)}_i.
inline Eigen::MatrixXd dressing_matrix(const TbaProfile& p) {
  const int K = p.K;
  Eigen::MatrixXd A(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      A(i, j) = (i == j ? 1.0 : 0.0) + 2.0 * std::min(i + 1, j + 1) * p.y[static_cast<std::size_t>(j)];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw SingularSystem("dressing_matrix: Id + M yhat is singular at this truncation");
  return lu.inverse();
}

inline Eigen::MatrixXd min_matrix(int K) {  // M_{ij} = 2 min(i,j)
  Eigen::MatrixXd M(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) M(i, j) = 2.0 * std::min(i + 1, j + 1);
  return M;
}

// Flux Jacobian A^{(l)j}_i = sum_{k=1}^{min(l,i)} d/dsigma_j (sigma_i sigma_l /
// (sigma_{k-1} sigma_k)) from an arbitrary positive hole-density vector
// (sigma[0] holds sigma_1; sigma_0 = 1 is implicit). The derivative of each
// term is its logarithmic derivative, which handles coinciding indices.
// Rows beyond l have support only on columns <= l and the diagonal, so the
// K x K truncation is exact.
inline Eigen::MatrixXd flux_jacobian_from_sigma(const std::vector<double>& sigma, int l,
                                                int K) {
  if (l < 1 || K < l) throw DomainError("flux_jacobian: requires 1 <= l <= K");
  if (static_cast<int>(sigma.size()) < K)
    throw DomainError("flux_jacobian: sigma vector shorter than truncation");
  auto sig = [&](int k) { return k == 0 ? 1.0 : sigma[static_cast<std::size_t>(k) - 1]; };
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K, K);
  for (int i = 1; i <= K; ++i) {
    const int kmax = std::min(l, i);
    for (int k = 1; k <= kmax; ++k) {
      const double term = sig(i) * sig(l) / (sig(k - 1) * sig(k));
      int cand[4] = {i, l, k - 1, k};
      std::sort(cand, cand + 4);
      for (int t = 0; t < 4; ++t) {
        if (t > 0 && cand[t] == cand[t - 1]) continue;  // each j once
        const int j = cand[t];
        if (j < 1 || j > K) continue;
        const double delta = (j == i ? 1.0 : 0.0) + (j == l ? 1.0 : 0.0) -
                             (j == k - 1 ? 1.0 : 0.0) - (j == k ? 1.0 : 0.0);
        if (delta != 0.0) A(i - 1, j - 1) += term * delta / sig(j);
      }
    }
  }
  return A;
}

inline Eigen::MatrixXd flux_jacobian(const TbaProfile& p, int l, int K) {
  if (K > p.K) throw DomainError("flux_jacobian: truncation exceeds profile");
  return flux_jacobian_from_sigma(p.sigma, l, K);
}

// Covariance-family matrix C^{(l,m)} with entries C^{l,m}_{i,j} (exact tails).
// Special cases: C = C^{(1,1)}, B^{(l)} = C^{(1,l)}, D^{(l)} = C^{(l,l)}.
// Symmetric in (i, j) by the complete four-index symmetry.
inline Eigen::MatrixXd correlation_matrix(double a, double z, int l, int m, int K) {
  if (K < std::max(l, m)) throw DomainError("correlation_matrix: requires K >= max(l, m)");
  Eigen::MatrixXd C(K, K);
  for (int i = 1; i <= K; ++i)
    for (int j = i; j <= K; ++j) {
      const double v = four_index_correlation(a, z, i, j, l, m);
      C(i - 1, j - 1) = v;
      C(j - 1, i - 1) = v;
    }
  return C;
}

}  // namespace bbs::tba
