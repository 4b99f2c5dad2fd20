#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "bbs/config.hpp"
#include "bbs/evolve.hpp"
#include "bbs/rng.hpp"
#include "bbs/tba.hpp"
#include "bbs/transfer_matrix.hpp"

using namespace bbs;
using Catch::Approx;

namespace {

void check_printed(double computed, double printed, int decimals) {
  const double tol = std::max(0.51 * std::pow(10.0, -decimals), 1e-6 * std::abs(printed));
  INFO("computed " << computed << " printed " << printed);
  CHECK(std::abs(computed - printed) < tol);
}

double leading_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  double best = -1e300;
  for (int k = 0; k < m.rows(); ++k) best = std::max(best, es.eigenvalues()(k).real());
  return best;
}

}  // namespace

TEST_CASE("carrier matrix entries") {
  const double z = 0.37, y = 1.21;
  auto m = tm::build_carrier_matrix(3, z, y);
  Eigen::MatrixXd ref(4, 4);
  ref << 1, z, 0, 0,
      y, 0, z * y, 0,
      0, y * y, 0, z * y * y,
      0, 0, y * y * y, z * y * y * y;
  CHECK((m - ref).cwiseAbs().maxCoeff() == 0.0);

  auto m1 = tm::build_carrier_matrix(1, z, 1.0);
  Eigen::MatrixXd ref1(2, 2);
  ref1 << 1, z, 1, z;
  CHECK((m1 - ref1).cwiseAbs().maxCoeff() == 0.0);

  // left Perron vector at y=1 is (1, z, ..., z^l) with eigenvalue 1+z
  for (int l : {2, 5}) {
    auto b = tm::build_carrier_matrix(l, z, 1.0);
    Eigen::RowVectorXd v(l + 1);
    for (int k = 0; k <= l; ++k) v(k) = std::pow(z, k);
    CHECK(((v * b) - (1.0 + z) * v).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("stationary current equals the closed-form ball current") {
  CHECK(tm::stationary_current(1, 0.25) == Approx(0.2).epsilon(1e-14));
  check_printed(tm::stationary_current(10, 0.3 / 0.7), 0.7490144, 7);
  SplitMix64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const double z = 0.05 + 0.9 * rng.next_double();
    const int l = 1 + static_cast<int>(rng.next_below(12));
    CHECK(tm::stationary_current(l, z) ==
          Approx(tba::ball_current_iid(z, l)).epsilon(1e-14));
  }
}

TEST_CASE("equal-time variance f: table values and conjectured closed form") {
  // l = 1: translations, f = p(1-p)
  for (double z : {0.25, 2.0 / 3.0}) {
    const double p = z / (1 + z);
    CHECK(tm::equal_time_variance(1, z) == Approx(p * (1 - p)).epsilon(1e-11));
  }
  check_printed(tm::equal_time_variance(2, 0.25), 0.672498, 6);
  check_printed(tm::equal_time_variance(5, 0.25), 1.857532, 6);
  check_printed(tm::equal_time_variance(10, 0.25), 2.023662, 6);
  check_printed(tm::equal_time_variance(2, 2.0 / 3.0), 1.790640, 6);
  check_printed(tm::equal_time_variance(5, 2.0 / 3.0), 26.04813, 5);
  check_printed(tm::equal_time_variance(10, 2.0 / 3.0), 134.2497390, 7);

  SplitMix64 rng(5);
  for (int l = 1; l <= 12; ++l) {
    const double z = 0.1 + 0.7 * rng.next_double();
    CHECK(tm::equal_time_variance(l, z) == Approx(tm::conjectured_f(l, z)).epsilon(1e-10));
  }

  // f >= D (Cauchy-Schwarz ordering)
  for (int rep = 0; rep < 12; ++rep) {
    const double z = 0.1 + 0.75 * rng.next_double();
    const int l = 1 + static_cast<int>(rng.next_below(10));
    CHECK(tm::equal_time_variance(l, z) >= tba::drude_analytic(z, z, l) - 1e-12);
  }
}

TEST_CASE("c2 via the transfer matrix matches the closed form") {
  check_printed(tm::c2_via_tm(4, 0.25), 0.41998, 5);
  check_printed(tm::c2_via_tm(4, 2.0 / 3.0), 1.63352, 5);
  CHECK(tm::c2_via_tm(1, 0.25) == Approx(0.25 / (1.25 * 1.25)).epsilon(1e-11));
  SplitMix64 rng(7);
  for (int rep = 0; rep < 15; ++rep) {
    const double z = 0.1 + 0.75 * rng.next_double();
    const int l = 1 + static_cast<int>(rng.next_below(12));
    CHECK(tm::c2_via_tm(l, z) == Approx(tba::c2_iid(z, l)).epsilon(1e-10));
  }
}

TEST_CASE("eigen-perturbation first derivatives vs central differences") {
  for (double z : {0.25, 0.6}) {
    for (int l : {2, 6}) {
      const auto d = tm::detail::leading_log_derivatives(l, z);
      CHECK(d.lambda == Approx(1.0 + z).epsilon(1e-12));
      const double h = 1e-6;
      // y-derivative of ln lambda_max at y = 1
      const double fd_y = (std::log(leading_eigenvalue(tm::build_carrier_matrix(l, z, 1 + h))) -
                           std::log(leading_eigenvalue(tm::build_carrier_matrix(l, z, 1 - h)))) /
                          (2 * h);
      CHECK(d.ly == Approx(fd_y).margin(1e-9));
      const double fd_z = (std::log(leading_eigenvalue(tm::build_carrier_matrix(l, z + h, 1.0))) -
                           std::log(leading_eigenvalue(tm::build_carrier_matrix(l, z - h, 1.0)))) /
                          (2 * h);
      CHECK(d.lz == Approx(fd_z).margin(1e-9));
    }
  }
}

TEST_CASE("Perron root is simple and positive across the sampled domain") {
  SplitMix64 rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    const int l = 1 + static_cast<int>(rng.next_below(10));
    const double z = 0.05 + 0.9 * rng.next_double();
    CHECK_NOTHROW(tm::detail::leading_log_derivatives(l, z));
  }
}

namespace {

// Sum of z^Q y^J over all ring configurations and all closed carrier loops,
// brute force. J is the total load on the horizontal bonds of the sweep.
double brute_force_partition(std::size_t L, int l, double z, double y) {
  double total = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << L); ++bits) {
    Configuration c(L);
    for (std::size_t x = 0; x < L; ++x)
      if ((bits >> x) & 1) c.set(x, true);
    const int q = static_cast<int>(c.ball_count());
    for (int u0 = 0; u0 <= l; ++u0) {
      const auto r = evolve_open(c, l, u0);
      if (r.trace.exit != u0) continue;
      long j = 0;
      for (int v : r.trace.loads) j += v;
      total += std::pow(z, q) * std::pow(y, static_cast<double>(j));
    }
  }
  return total;
}

double trace_power(const Eigen::MatrixXd& m, int L) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd base = m;
  int e = L;
  while (e > 0) {
    if (e & 1) acc = acc * base;
    base = base * base;
    e >>= 1;
  }
  return acc.trace();
}

}  // namespace

TEST_CASE("trace consistency with brute-force enumeration") {
  for (std::size_t L : {6u, 9u, 12u, 14u}) {
    for (int l = 1; l <= 3; ++l) {
      for (auto [z, y] : {std::pair{0.3, 1.0}, std::pair{0.45, 0.8}, std::pair{0.2, 1.3}}) {
        const double brute = brute_force_partition(L, l, z, y);
        const double trace = trace_power(tm::build_carrier_matrix(l, z, y), static_cast<int>(L));
        CHECK(trace == Approx(brute).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("finite-L log-derivative converges to f") {
  const double z = 0.25;
  const int l = 3;
  const double f = tm::equal_time_variance(l, z);
  auto f_at = [&](int L) {
    const double h = 1e-4;
    auto lnZ = [&](double y) {
      return std::log(trace_power(tm::build_carrier_matrix(l, z, y), L));
    };
    // (y d/dy)^2 ln Z = d^2/du^2 ln Z(e^u) at u=0
    return (lnZ(std::exp(h)) - 2 * lnZ(1.0) + lnZ(std::exp(-h))) / (h * h) / L;
  };
  double prev = std::abs(f_at(25) - f);
  for (int L : {50, 100, 200}) {
    const double err = std::abs(f_at(L) - f);
    CHECK(err < prev + 1e-9);
    prev = err;
  }
  CHECK(std::abs(f_at(400) - f) < 1e-4);
}
