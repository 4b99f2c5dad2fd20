#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bbs/rng.hpp"
#include "bbs/tba.hpp"

using namespace bbs;
using Catch::Approx;

namespace {

// Printed reference values carry a limited number of decimals; match to half
// an ulp of the print (or 1e-6 relative, whichever is looser).
void check_printed(double computed, double printed, int decimals) {
  const double tol = std::max(0.51 * std::pow(10.0, -decimals), 1e-6 * std::abs(printed));
  INFO("computed " << computed << " printed " << printed);
  CHECK(std::abs(computed - printed) < tol);
}

double rand_in(SplitMix64& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.next_double();
}

// i.i.d. soliton density straight from the single-parameter formula.
double rho_iid(double z, int k) {
  const double zk = std::pow(z, k);
  return zk * std::pow(1.0 - z, 3) * (1.0 + zk * z) /
         ((1.0 + z) * (1.0 - zk) * (1.0 - zk * z) * (1.0 - zk * z * z));
}

}  // namespace

TEST_CASE("profile densities: dilute limit, worked values, iid reduction") {
  {
    auto p = tba::profile(1e-6, 1e-6, 10);
    CHECK(p.sigma_at(1) == Approx(1.0).epsilon(1e-5));
    CHECK(p.rho_at(1) == Approx(1e-6).epsilon(1e-4));
  }
  {
    const double z = 2.0 / 3.0;  // p = 0.4
    auto p = tba::profile(z, z, 20);
    CHECK(p.sigma_at(1) == Approx(13.0 / 25.0).epsilon(1e-14));
    CHECK(p.rho_at(1) == Approx(78.0 / 475.0).epsilon(1e-13));
    CHECK(tba::pseudoenergy_cov_prediction(p, 1) == Approx(625.0 / 78.0).epsilon(1e-13));
  }
  {
    SplitMix64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      const double z = rand_in(rng, 0.05, 0.9);
      auto p = tba::profile(z, z, 5);
      for (int k = 1; k <= 5; ++k)
        CHECK(p.rho_at(k) == Approx(rho_iid(z, k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("hole-density consistency sigma_k = 1 - sum_j 2 min(k,j) rho_j") {
  auto p = tba::profile(0.4, 0.4, 60);
  for (int k = 1; k <= 6; ++k) {
    double s = 1.0;
    for (int j = 1; j <= p.K; ++j) s -= 2.0 * std::min(k, j) * p.rho_at(j);
    CHECK(p.sigma_at(k) == Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("velocities: bare limit, l = 1, closed form vs hole form") {
  {
    auto p = tba::profile(1e-7, 1e-7, 8);
    auto v = tba::velocities(p, tba::kInf);
    for (int k = 1; k <= 8; ++k) CHECK(v.at(k) == Approx(k).epsilon(1e-5));
  }
  {
    auto p = tba::profile(0.35, 0.52, 12);
    auto v1 = tba::velocities(p, 1);
    for (int k = 1; k <= 12; ++k) CHECK(v1.at(k) == Approx(1.0).epsilon(1e-13));
  }
  SplitMix64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const double a = rand_in(rng, 0.05, 0.95);
    const double z = rand_in(rng, 0.05, 0.95);
    auto p = tba::profile(a, z, 16);
    for (int l : {1, 3, 7, tba::kInf}) {
      auto v = tba::velocities(p, l);
      for (int k = 1; k <= 16; ++k)
        CHECK(v.at(k) == Approx(tba::velocity_closed(a, z, l, k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("velocities satisfy the collision-rate equation") {
  auto p = tba::profile(0.45, 0.45, 80);
  for (int l : {2, 5, tba::kInf}) {
    auto v = tba::velocities(p, l == tba::kInf ? tba::kInf : l);
    for (int i = 1; i <= 40; ++i)
      CHECK(tba::velocity_equation_residual(p, v, i) == Approx(0.0).margin(1e-10));
  }
}

TEST_CASE("mean currents: worked values and special cases") {
  const double z03 = 0.3 / 0.7;
  check_printed(tba::ball_current_iid(z03, 10), 0.7490144, 7);
  check_printed(tba::mean_currents(z03, z03, 10).ball, 0.7490144, 7);

  SplitMix64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const double z = rand_in(rng, 0.05, 0.9);
    // l = 1 is a translation: current = density
    CHECK(tba::mean_currents(z, z, 1).ball ==
          Approx(tba::density_from_fugacity(z)).epsilon(1e-12));
    // l = inf: j = z/(1-z)
    CHECK(tba::mean_currents(z, z, tba::kInf).ball ==
          Approx(z / (1.0 - z)).epsilon(1e-12));
    // two-temperature closed form reduces to the iid one at a = z
    for (int l : {2, 4, 9})
      CHECK(tba::mean_currents(z, z, l).ball ==
            Approx(tba::ball_current_iid(z, l)).epsilon(1e-12));
  }
}

TEST_CASE("eta means: symmetry and agreement with the defining sum") {
  SplitMix64 rng(17);
  for (int rep = 0; rep < 6; ++rep) {
    const double a = rand_in(rng, 0.1, 0.85);
    const double z = rand_in(rng, 0.1, 0.85);
    for (int j = 1; j <= 10; ++j)
      for (int l = 1; l <= 10; ++l)
        CHECK(tba::eta_mean(a, z, j, l) ==
              Approx(tba::eta_mean(a, z, l, j)).epsilon(1e-12));
    // independent oracle: truncated sum of min(j,k) rho_k v^{(l)}_k
    auto p = tba::profile(a, z, 220);
    for (int j : {1, 3, tba::kInf})
      for (int l : {2, 5, tba::kInf}) {
        auto v = tba::velocities(p, l);
        double s = 0.0;
        for (int k = 1; k <= p.K; ++k)
          s += std::min<double>(j == tba::kInf ? k : std::min(j, k), k) * p.rho_at(k) * v.at(k);
        CHECK(tba::eta_mean(a, z, j, l) == Approx(s).epsilon(1e-8));
      }
  }
}

TEST_CASE("second cumulant: Table 1 values and route agreement") {
  check_printed(tba::c2_iid(0.25, 4), 0.41998, 5);
  check_printed(tba::c2_iid(2.0 / 3.0, 4), 1.63352, 5);
  check_printed(tba::c2_iid(0.3 / 0.7, 10), 1.30166, 5);

  SplitMix64 rng(19);
  for (int rep = 0; rep < 12; ++rep) {
    const double z = rand_in(rng, 0.05, 0.9);
    const double a = rand_in(rng, 0.05, 0.9);
    const int l = 1 + static_cast<int>(rng.next_below(9));
    // iid reduction of the two-temperature form
    CHECK(tba::c2_analytic(z, z, l) == Approx(tba::c2_iid(z, l)).epsilon(1e-11));
    // TBA sum route
    CHECK(tba::c2_analytic(a, z, l) == Approx(tba::c2_tba_sum(a, z, l)).epsilon(1e-11));
    CHECK(tba::c2_analytic(a, z, tba::kInf) ==
          Approx(tba::c2_tba_sum(a, z, tba::kInf)).epsilon(1e-10));
  }

  // c2 = z dj/dz by Richardson finite differences
  for (double z : {0.2, 0.45, 0.6}) {
    for (int l : {1, 3, 10}) {
      const double h = 1e-5;
      auto j = [&](double zz) { return tba::ball_current_iid(zz, l); };
      const double d1 = (j(z + h) - j(z - h)) / (2 * h);
      const double d2 = (j(z + h / 2) - j(z - h / 2)) / h;
      const double deriv = (4.0 * d2 - d1) / 3.0;
      CHECK(tba::c2_iid(z, l) == Approx(z * deriv).epsilon(1e-9));
    }
  }
}

namespace {

// Printed Drude rational functions (test fixtures).
double drude2_printed(double z) {
  const double z2 = z * z, z3 = z2 * z, z4 = z3 * z;
  return z * (1 - z) * std::pow(1 - z2, 3) * (1 + 11 * z + 11 * z3 + z4) /
         (std::pow(1 - z3, 3) * (1 - z4));
}

double drude3_printed(double z) {
  auto zp = [&](int k) { return std::pow(z, k); };
  const double poly = 1 + 11 * z + 44 * zp(2) + 29 * zp(3) + 30 * zp(4) + 29 * zp(5) +
                      44 * zp(6) + 11 * zp(7) + zp(8);
  return z * (1 - z) * std::pow(1 - zp(2), 2) * (1 - zp(3)) /
         (std::pow(1 - zp(4), 3) * (1 - zp(6))) * poly;
}

double drude4_printed(double z) {
  auto zp = [&](int k) { return std::pow(z, k); };
  const double poly = 1 + 10 * z + 35 * zp(2) + 117 * zp(3) + 68 * zp(4) + 254 * zp(5) +
                      95 * zp(6) + 357 * zp(7) + 126 * zp(8) + 357 * zp(9) + 95 * zp(10) +
                      254 * zp(11) + 68 * zp(12) + 117 * zp(13) + 35 * zp(14) +
                      10 * zp(15) + zp(16);
  return z * std::pow(1 - zp(2), 4) * (1 - zp(3)) /
         (std::pow(1 - zp(5), 3) * (1 - zp(6)) * (1 - zp(8))) * poly;
}

double drude5_printed(double z) {
  auto zp = [&](int k) { return std::pow(z, k); };
  const double poly = 1 + 11 * z + 44 * zp(2) + 140 * zp(3) + 355 * zp(4) + 406 * zp(5) +
                      480 * zp(6) + 443 * zp(7) + 633 * zp(8) + 714 * zp(9) +
                      896 * zp(10) + 714 * zp(11) + 633 * zp(12) + 443 * zp(13) +
                      480 * zp(14) + 406 * zp(15) + 355 * zp(16) + 140 * zp(17) +
                      44 * zp(18) + 11 * zp(19) + zp(20);
  return z * (1 - z) * std::pow(1 - zp(2), 2) * (1 - zp(4)) * (1 - zp(5)) /
         (std::pow(1 - zp(6), 3) * (1 - zp(8)) * (1 - zp(10))) * poly;
}

}  // namespace

TEST_CASE("Drude weights: table values, rationals, limits") {
  check_printed(tba::drude_analytic(0.25, 0.25, 2), 0.6383506, 7);
  check_printed(tba::drude_analytic(0.25, 0.25, 5), 1.744263, 6);
  check_printed(tba::drude_analytic(0.25, 0.25, 10), 1.901627, 6);
  const double z4 = 2.0 / 3.0;
  check_printed(tba::drude_analytic(z4, z4, 2), 1.606536, 6);
  check_printed(tba::drude_analytic(z4, z4, 5), 22.570957, 6);
  check_printed(tba::drude_analytic(z4, z4, 10), 117.6194, 4);

  SplitMix64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const double z = rand_in(rng, 0.02, 0.93);
    CHECK(tba::drude_analytic(z, z, 2) == Approx(drude2_printed(z)).epsilon(1e-11));
    CHECK(tba::drude_analytic(z, z, 3) == Approx(drude3_printed(z)).epsilon(1e-11));
    CHECK(tba::drude_analytic(z, z, 4) == Approx(drude4_printed(z)).epsilon(1e-11));
    CHECK(tba::drude_analytic(z, z, 5) == Approx(drude5_printed(z)).epsilon(1e-11));
    // D^{(1)} = p(1-p) in the iid state
    const double p = tba::density_from_fugacity(z);
    CHECK(tba::drude1(z, z) == Approx(p * (1.0 - p)).epsilon(1e-13));
  }

  // half filling: D^{(l)} -> (l(l+2)/6)^2
  for (int l = 1; l <= 8; ++l) {
    const double z = 1.0 - 1e-9;
    const double limit = std::pow(l * (l + 2) / 6.0, 2);
    CHECK(tba::drude_analytic(z, z, l) == Approx(limit).epsilon(1e-7));
  }
}

TEST_CASE("partial W sums: closed polynomial vs direct summation") {
  SplitMix64 rng(29);
  for (int rep = 0; rep < 15; ++rep) {
    const double a = rand_in(rng, 0.05, 0.9);
    const double z = rand_in(rng, 0.05, 0.9);
    const int l = 1 + static_cast<int>(rng.next_below(10));
    auto p = tba::profile(a, z, std::max(2, l));
    auto v = tba::velocities(p, tba::kInf);
    double direct = 0.0;
    for (int i = 1; i < l; ++i) {
      const double r = p.rho_at(i), s = p.sigma_at(i);
      direct += r * s * (r + s) * v.at(i) * v.at(i);
    }
    CHECK(tba::partial_w_sum_closed(a, z, l) == Approx(direct).margin(1e-12).epsilon(1e-11));
  }
  // A_0 = A_1 = 0: the l = 1 partial sum is empty
  CHECK(tba::partial_w_sum_closed(0.3, 0.55, 1) == Approx(0.0).margin(1e-14));
}

TEST_CASE("tail sums: closed form vs direct summation") {
  SplitMix64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const double a = rand_in(rng, 0.05, 0.85);
    const double z = rand_in(rng, 0.05, 0.85);
    const int r0 = 1 + static_cast<int>(rng.next_below(8));
    auto p = tba::profile(a, z, 400);
    double direct = 0.0;
    for (int i = r0; i <= p.K; ++i) {
      const double r = p.rho_at(i), s = p.sigma_at(i);
      direct += r * s * (r + s);
    }
    CHECK(tba::tail_sum(a, z, r0) == Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("four-index correlations") {
  SplitMix64 rng(37);
  // special cases against independent closed forms
  for (int rep = 0; rep < 8; ++rep) {
    const double z = rand_in(rng, 0.1, 0.85);
    const double p = tba::density_from_fugacity(z);
    CHECK(tba::four_index_correlation(z, z, tba::kInf, tba::kInf, 1, 1) ==
          Approx(p * (1 - p)).epsilon(1e-11));
    const int l = 1 + static_cast<int>(rng.next_below(8));
    CHECK(tba::four_index_correlation(z, z, tba::kInf, tba::kInf, 1, l) ==
          Approx(tba::c2_iid(z, l)).epsilon(1e-11));
    CHECK(tba::four_index_correlation(z, z, tba::kInf, tba::kInf, l, l) ==
          Approx(tba::drude_analytic(z, z, l)).epsilon(1e-11));
  }
  // complete symmetry under all 24 permutations
  for (int rep = 0; rep < 5; ++rep) {
    const double a = rand_in(rng, 0.1, 0.8);
    const double z = rand_in(rng, 0.1, 0.8);
    int idx[4];
    for (int& v : idx) v = 1 + static_cast<int>(rng.next_below(7));
    if (rng.next_double() < 0.3) idx[0] = tba::kInf;
    const double ref = tba::four_index_correlation(a, z, idx[0], idx[1], idx[2], idx[3]);
    std::sort(idx, idx + 4);
    do {
      CHECK(tba::four_index_correlation(a, z, idx[0], idx[1], idx[2], idx[3]) ==
            Approx(ref).epsilon(1e-10));
    } while (std::next_permutation(idx, idx + 4));
  }
  // all-finite exact-tail route vs a long direct truncation
  for (int rep = 0; rep < 5; ++rep) {
    const double a = rand_in(rng, 0.1, 0.7);
    const double z = rand_in(rng, 0.1, 0.7);
    const int i = 1 + static_cast<int>(rng.next_below(5));
    const int j = 1 + static_cast<int>(rng.next_below(5));
    const int l = 1 + static_cast<int>(rng.next_below(5));
    const int m = 1 + static_cast<int>(rng.next_below(5));
    auto p = tba::profile(a, z, 300);
    std::vector<tba::VelocityTable> vt;
    for (int c : {i, j, l, m}) vt.push_back(tba::velocities(p, c));
    double direct = 0.0;
    for (int k = 1; k <= p.K; ++k) {
      const double r = p.rho_at(k), s = p.sigma_at(k);
      direct += r * s * (r + s) * vt[0].at(k) * vt[1].at(k) * vt[2].at(k) * vt[3].at(k);
    }
    CHECK(tba::four_index_correlation(a, z, i, j, l, m) == Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("pseudoenergy covariance predictions: Table 2 diagonal") {
  auto p = tba::profile(2.0 / 3.0, 2.0 / 3.0, 30);
  check_printed(tba::pseudoenergy_cov_prediction(p, 1), 8.01282, 5);
  check_printed(tba::pseudoenergy_cov_prediction(p, 2), 27.2183, 4);
  check_printed(tba::pseudoenergy_cov_prediction(p, 3), 65.5367, 4);
  check_printed(tba::pseudoenergy_cov_prediction(p, 4), 131.789, 3);
  check_printed(tba::pseudoenergy_cov_prediction(p, 5), 238.454, 3);
}

TEST_CASE("auxiliary free energy and mode occupancies") {
  auto p = tba::profile(0.4, 0.4, 40);
  double f = 0.0;
  for (int k = 1; k <= p.K; ++k) f -= std::log1p(p.y_at(k));
  CHECK(p.free_energy() == Approx(f).epsilon(1e-14));
  for (int k : {1, 3}) {
    const double y = p.y_at(k);
    CHECK(p.mode_occupancy(k) == Approx(1.0 / (1.0 + 1.0 / y)).epsilon(1e-13));
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(tba::profile(0.0, 0.5, 10), DomainError);
  CHECK_THROWS_AS(tba::profile(0.5, 1.0, 10), DomainError);
  CHECK_THROWS_AS(tba::c2_analytic(1.2, 0.5, 3), DomainError);
  CHECK_THROWS_AS(tba::fugacity_from_density(0.5), DomainError);
}
