#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bbs/accumulator.hpp"
#include "bbs/config.hpp"
#include "bbs/ensembles.hpp"
#include "bbs/errors.hpp"
#include "bbs/evolve.hpp"
#include "bbs/kernel.hpp"
#include "bbs/rng.hpp"
#include "bbs/tba.hpp"

namespace bbs::mc {

// Ensemble under measurement: i.i.d. product state or two-temperature GGE.
// The per-sample seed overrides the spec seed, derived from the plan's
// master seed and the sample index.
struct Ensemble {
  enum class Kind { Iid, Gge2t };
  Kind kind = Kind::Iid;
  IidSpec iid;
  Gge2tSpec gge;

  static Ensemble make_iid(std::size_t length, double density) {
    Ensemble e;
    e.kind = Kind::Iid;
    e.iid = IidSpec{length, density, 1};
    return e;
  }

  static Ensemble make_gge2t(const Gge2tSpec& spec) {
    Ensemble e;
    e.kind = Kind::Gge2t;
    e.gge = spec;
    return e;
  }

  std::size_t length() const { return kind == Kind::Iid ? iid.length : gge.length; }

  void validate() const {
    if (kind == Kind::Iid)
      iid.validate();
    else
      gge.validate();
  }

  // (a, z) of the underlying stationary state.
  std::pair<double, double> az() const {
    if (kind == Kind::Iid) {
      const double z = iid.fugacity();
      return {z, z};
    }
    return {gge.parameter_a(), gge.fugacity_z()};
  }

  Configuration sample(std::uint64_t sample_seed) const {
    if (kind == Kind::Iid) {
      IidSpec s = iid;
      s.seed = sample_seed;
      return sample_iid(s);
    }
    Gge2tSpec s = gge;
    s.seed = sample_seed;
    return sample_gge2t(s);
  }
};

struct MeasurementPlan {
  Ensemble ensemble;
  int capacity = 1;       // l: dynamics for transfer counts, observable label otherwise
  int dyn_capacity = 0;   // n: dynamics for generalized correlations (0 = same as capacity)
  long time = 1;          // t sweeps
  int idx_m = 0, idx_i = 0, idx_j = 0;  // observable labels where applicable
  std::uint64_t samples = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  int batches = 100;
  bool allow_wrap = false;

  int dynamics() const { return dyn_capacity > 0 ? dyn_capacity : capacity; }
};

// Fastest signal speed in the state, for the no-wrap bound: v^{(l)}_k is
// largest at k >= l.
inline double max_signal_speed(const Ensemble& e, int l) {
  auto [a, z] = e.az();
  if (!(z > 0.0)) return static_cast<double>(l);  // empty lattice: bare speed
  return tba::velocity_closed(a, z, l, l);
}

inline void check_no_wrap(const MeasurementPlan& plan) {
  plan.ensemble.validate();
  if (plan.time < 0) throw DomainError("plan: time must be >= 0");
  if (plan.samples < 1) throw DomainError("plan: sample count must be >= 1");
  if (plan.allow_wrap || plan.time == 0) return;
  const double vmax = max_signal_speed(plan.ensemble, plan.dynamics());
  const double bound = 2.0 * vmax * static_cast<double>(plan.time) * 1.2;
  if (static_cast<double>(plan.ensemble.length()) <= bound)
    throw DomainError(
        "plan: lattice too short for this horizon (signals wrap; L must exceed "
        "2 * v_max * t * 1.2 = " +
        std::to_string(bound) + "); set allow_wrap to override");
}

// Runs `nbatches` contiguous sample ranges across a small thread pool.
// Batch -> worker assignment never affects results: each batch owns its
// outputs and batches are merged in index order afterwards.
inline void run_batches(std::uint64_t samples, int nbatches, int workers,
                        const std::function<void(int, std::uint64_t, std::uint64_t)>& fn) {
  if (nbatches < 1) nbatches = 1;
  if (workers < 1) workers = 1;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int b = next.fetch_add(1);
      if (b >= nbatches) return;
      const std::uint64_t lo = samples * static_cast<std::uint64_t>(b) /
                               static_cast<std::uint64_t>(nbatches);
      const std::uint64_t hi = samples * (static_cast<std::uint64_t>(b) + 1) /
                               static_cast<std::uint64_t>(nbatches);
      fn(b, lo, hi);
    }
  };
  if (workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

struct CumulantResult {
  std::array<double, 4> value{};   // <N_t^k>_c / t
  std::array<double, 4> error{};   // jackknife
  Histogram histogram;             // of N_t
  std::uint64_t samples = 0;
  std::uint64_t excluded = 0;
  long time = 0;
};

namespace detail {

struct TransferBatch {
  std::uint64_t n = 0;  // for jackknife bookkeeping
  IntMoments moments;
  Histogram hist;
  std::uint64_t excluded = 0;

  void merge(const TransferBatch& o) {
    n += o.n;
    moments.merge(o.moments);
    hist.merge(o.hist);
    excluded += o.excluded;
  }
};

}  // namespace detail

// Transfer-count engine: per sample, t sweeps of T_l; N_t accumulates the
// fixed-point load crossing the origin bond each sweep.
inline CumulantResult measure_cumulants(const MeasurementPlan& plan) {
  check_no_wrap(plan);
  const SweepKernel kernel(plan.capacity);
  std::vector<detail::TransferBatch> batches(static_cast<std::size_t>(plan.batches));
  run_batches(plan.samples, plan.batches, plan.workers,
              [&](int b, std::uint64_t lo, std::uint64_t hi) {
                auto& acc = batches[static_cast<std::size_t>(b)];
                SweepScratch scratch;
                for (std::uint64_t s = lo; s < hi; ++s) {
                  Configuration c = plan.ensemble.sample(stream_seed(plan.seed, s));
                  try {
                    long long nt = 0;
                    for (long step = 0; step < plan.time; ++step)
                      nt += kernel.step(c, scratch).entry_load;
                    acc.moments.add(nt);
                    acc.hist.add(nt);
                    ++acc.n;
                  } catch (const CarrierNonConvergent&) {
                    ++acc.excluded;
                  }
                }
              });
  CumulantResult r;
  r.time = plan.time;
  detail::TransferBatch full;
  for (const auto& b : batches) full.merge(b);
  r.samples = full.n;
  r.excluded = full.excluded;
  r.histogram = full.hist;
  const double t = std::max<long>(plan.time, 1);
  for (int k = 0; k < 4; ++k) {
    auto [theta, err] = jackknife(batches, [&](const detail::TransferBatch& a) {
      return a.moments.cumulants()[static_cast<std::size_t>(k)] / t;
    });
    r.value[static_cast<std::size_t>(k)] = theta;
    r.error[static_cast<std::size_t>(k)] = err;
  }
  return r;
}

struct ScalarEstimate {
  double value = 0.0;
  double error = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t excluded = 0;
};

namespace detail {

struct CrossBatch {
  std::uint64_t n = 0;
  IntCross cross;
  std::uint64_t excluded = 0;

  void merge(const CrossBatch& o) {
    n += o.n;
    cross.merge(o.cross);
    excluded += o.excluded;
  }
};

inline long long field_total(const Configuration& c, int top, int bottom) {
  const CurrentField f = generalized_current_field(c, top, bottom);
  long long u = 0;
  for (int v : f.values) u += v;
  return u;
}

}  // namespace detail

// Time-averaged generalized current correlation
//   C^{m,l,n}_{i,j} ~ cov(sum_x eta^{(m)}_i(x, t), sum_x eta^{(l)}_j(x, 0)) / L,
// the covariance implementing translation averaging over the ring. Evolution
// between the two observables is T_n over t sweeps (n = 1 makes it an
// equal-time correlation; t is then irrelevant and skipped).
inline ScalarEstimate measure_generalized_correlation(const MeasurementPlan& plan) {
  if (plan.idx_m < 1 || plan.idx_i < 1 || plan.idx_j < 1 || plan.capacity < 1)
    throw DomainError("measure_generalized_correlation: observable labels must be >= 1");
  const int n_dyn = plan.dynamics();
  const bool translate_only = (n_dyn == 1);
  if (!translate_only) check_no_wrap(plan);
  else plan.ensemble.validate();
  const std::size_t L = plan.ensemble.length();
  const SweepKernel kernel(translate_only ? 1 : n_dyn);
  std::vector<detail::CrossBatch> batches(static_cast<std::size_t>(plan.batches));
  run_batches(plan.samples, plan.batches, plan.workers,
              [&](int b, std::uint64_t lo, std::uint64_t hi) {
                auto& acc = batches[static_cast<std::size_t>(b)];
                SweepScratch scratch;
                for (std::uint64_t s = lo; s < hi; ++s) {
                  Configuration c = plan.ensemble.sample(stream_seed(plan.seed, s));
                  try {
                    const long long v0 = detail::field_total(c, plan.capacity, plan.idx_j);
                    long long vt = v0;
                    if (!translate_only) {
                      for (long step = 0; step < plan.time; ++step) kernel.step(c, scratch);
                      vt = detail::field_total(c, plan.idx_m, plan.idx_i);
                    } else if (plan.idx_m != plan.capacity || plan.idx_i != plan.idx_j) {
                      vt = detail::field_total(c, plan.idx_m, plan.idx_i);
                    }
                    acc.cross.add(vt, v0);
                    ++acc.n;
                  } catch (const CarrierNonConvergent&) {
                    ++acc.excluded;
                  }
                }
              });
  detail::CrossBatch full;
  for (const auto& b : batches) full.merge(b);
  auto [theta, err] = jackknife(batches, [&](const detail::CrossBatch& a) {
    return a.cross.covariance() / static_cast<double>(L);
  });
  return {theta, err, full.n, full.excluded};
}

struct PseudoenergyCovResult {
  int i_max = 0;
  std::vector<double> value;  // i_max x i_max, row-major: L * cov(eps_i, eps_j)
  std::vector<double> error;
  std::vector<double> prediction;  // diagonal prediction, 0 off-diagonal
  std::uint64_t samples = 0;
  std::uint64_t excluded = 0;
};

namespace detail {

struct VecBatch {
  std::uint64_t n = 0;
  VecStats stats;
  std::uint64_t excluded = 0;

  void merge(const VecBatch& o) {
    n += o.n;
    if (stats.dim == 0) stats = VecStats(o.stats.dim);
    stats.merge(o.stats);
    excluded += o.excluded;
  }
};

}  // namespace detail

// Pseudoenergy covariance estimator L<deps_i deps_j>: per sample the energies
// E_1..E_{i_max+1} are computed on the sampled configuration (no evolution is
// needed; they are conserved). Samples missing a soliton species are excluded
// and counted.
inline PseudoenergyCovResult measure_pseudoenergy_covariance(const MeasurementPlan& plan,
                                                             int i_max) {
  plan.ensemble.validate();
  if (i_max < 1) throw DomainError("measure_pseudoenergy_covariance: i_max must be >= 1");
  const std::size_t L = plan.ensemble.length();
  std::vector<SweepKernel> kernels;
  kernels.reserve(static_cast<std::size_t>(i_max) + 1);
  for (int k = 1; k <= i_max + 1; ++k) kernels.emplace_back(k);
  std::vector<detail::VecBatch> batches(static_cast<std::size_t>(plan.batches));
  run_batches(plan.samples, plan.batches, plan.workers,
              [&](int b, std::uint64_t lo, std::uint64_t hi) {
                auto& acc = batches[static_cast<std::size_t>(b)];
                SweepScratch scratch;
                std::vector<double> flat;
                flat.reserve(static_cast<std::size_t>(hi - lo) * static_cast<std::size_t>(i_max));
                std::vector<long> E(static_cast<std::size_t>(i_max) + 1);
                for (std::uint64_t s = lo; s < hi; ++s) {
                  const Configuration c = plan.ensemble.sample(stream_seed(plan.seed, s));
                  bool ok = true;
                  try {
                    for (int k = 1; k <= i_max + 1; ++k)
                      E[static_cast<std::size_t>(k) - 1] =
                          kernels[static_cast<std::size_t>(k) - 1].energy(c, scratch);
                  } catch (const CarrierNonConvergent&) {
                    ok = false;
                  }
                  if (ok) {
                    for (int i = 1; i <= i_max && ok; ++i) {
                      const long num = 2 * E[static_cast<std::size_t>(i) - 1] -
                                       E[static_cast<std::size_t>(i)] -
                                       (i >= 2 ? E[static_cast<std::size_t>(i) - 2] : 0);
                      const long den = static_cast<long>(L) - 2 * E[static_cast<std::size_t>(i) - 1];
                      if (num <= 0 || den <= 0) ok = false;
                    }
                  }
                  if (!ok) {
                    ++acc.excluded;
                    continue;
                  }
                  for (int i = 1; i <= i_max; ++i) {
                    const long num = 2 * E[static_cast<std::size_t>(i) - 1] -
                                     E[static_cast<std::size_t>(i)] -
                                     (i >= 2 ? E[static_cast<std::size_t>(i) - 2] : 0);
                    const long den = static_cast<long>(L) - 2 * E[static_cast<std::size_t>(i) - 1];
                    flat.push_back(-std::log(static_cast<double>(num) / static_cast<double>(den)));
                  }
                  ++acc.n;
                }
                acc.stats = vec_stats_two_pass(flat, i_max);
              });
  detail::VecBatch full;
  for (const auto& b : batches) full.merge(b);
  if (full.n + full.excluded > 0 &&
      static_cast<double>(full.excluded) > 0.01 * static_cast<double>(full.n + full.excluded))
    throw ExcessExclusions(
        "measure_pseudoenergy_covariance: more than 1% of samples lack a soliton species "
        "(lattice too small for i_max)");

  PseudoenergyCovResult r;
  r.i_max = i_max;
  r.samples = full.n;
  r.excluded = full.excluded;
  r.value.assign(static_cast<std::size_t>(i_max) * static_cast<std::size_t>(i_max), 0.0);
  r.error.assign(r.value.size(), 0.0);
  const double Lf = static_cast<double>(L);
  for (int i = 0; i < i_max; ++i)
    for (int j = 0; j < i_max; ++j) {
      auto [theta, err] = jackknife(batches, [&](const detail::VecBatch& a) {
        return a.stats.dim == 0 ? 0.0 : Lf * a.stats.covariance(i, j);
      });
      r.value[static_cast<std::size_t>(i) * static_cast<std::size_t>(i_max) + static_cast<std::size_t>(j)] = theta;
      r.error[static_cast<std::size_t>(i) * static_cast<std::size_t>(i_max) + static_cast<std::size_t>(j)] = err;
    }
  return r;
}

enum class SumRuleWeight { AbsX, SquareX };

struct SumRuleResult {
  double lhs = 0.0, lhs_error = 0.0;
  double rhs = 0.0, rhs_error = 0.0;
  double discrepancy = 0.0, discrepancy_error = 0.0;
  double z_score = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t excluded = 0;
};

namespace detail {

struct SumRuleBatch {
  std::uint64_t n = 0;
  IntMoments lhs, rhs, diff;
  std::uint64_t excluded = 0;

  void merge(const SumRuleBatch& o) {
    n += o.n;
    lhs.merge(o.lhs);
    rhs.merge(o.rhs);
    diff.merge(o.diff);
    excluded += o.excluded;
  }
};

}  // namespace detail

// Sum-rule cross-check: per sample both sides are evaluated on the same
// trajectory, so the z-score of their difference tests the exact identity
//   sum_x f(x) <dn(x) dn(0)>^c = sum_x (2f - f(+1) - f(-1))(x) <I(x) I(0)>^c
// with dn(x) = n(x,t) - n(x,0) and I(x) the time-integrated current through
// bond x. On the ring, f is centered at displacement 0 and the connected
// subtractions cancel exactly (sum of the discrete Laplacian of f is zero and
// <dn> = 0 in a stationary state).
inline SumRuleResult sum_rule_check(const MeasurementPlan& plan, SumRuleWeight weight) {
  check_no_wrap(plan);
  const std::size_t L = plan.ensemble.length();
  const long Ls = static_cast<long>(L);
  std::vector<double> f(L), w(L);
  for (std::size_t d = 0; d < L; ++d) {
    const long sd = static_cast<long>(d) <= Ls / 2 ? static_cast<long>(d)
                                                   : static_cast<long>(d) - Ls;
    f[d] = weight == SumRuleWeight::AbsX ? static_cast<double>(std::abs(sd))
                                         : static_cast<double>(sd) * static_cast<double>(sd);
  }
  for (std::size_t d = 0; d < L; ++d)
    w[d] = 2.0 * f[d] - f[(d + 1) % L] - f[(d + L - 1) % L];

  std::vector<detail::SumRuleBatch> batches(static_cast<std::size_t>(plan.batches));
  run_batches(plan.samples, plan.batches, plan.workers,
              [&](int b, std::uint64_t lo, std::uint64_t hi) {
                auto& acc = batches[static_cast<std::size_t>(b)];
                std::vector<long long> I(L);
                std::vector<int> dn(L);
                Configuration scratch(L);
                std::vector<int> trace(L);
                for (std::uint64_t s = lo; s < hi; ++s) {
                  const Configuration c0 = plan.ensemble.sample(stream_seed(plan.seed, s));
                  Configuration c = c0;
                  std::fill(I.begin(), I.end(), 0);
                  bool ok = true;
                  try {
                    for (long step = 0; step < plan.time; ++step) {
                      // fixed-point pass with trace, reusing buffers
                      int u = 0;
                      int iter = 0;
                      for (;; ++iter) {
                        if (iter > plan.capacity + 1)
                          throw CarrierNonConvergent("sum_rule_check");
                        auto [exit, pk] =
                            bbs::detail::carrier_pass(c, scratch, plan.capacity, u, &trace);
                        (void)pk;
                        if (exit == u) break;
                        u = exit;
                      }
                      for (std::size_t x = 0; x < L; ++x) I[x] += trace[x];
                      c.words() = scratch.words();
                    }
                  } catch (const CarrierNonConvergent&) {
                    ok = false;
                  }
                  if (!ok) {
                    ++acc.excluded;
                    continue;
                  }
                  for (std::size_t x = 0; x < L; ++x)
                    dn[x] = static_cast<int>(c.get(x)) - static_cast<int>(c0.get(x));
                  // quadratic forms, exact integers
                  long long lhs_num = 0, rhs_num = 0;
                  for (std::size_t d = 0; d < L; ++d) {
                    if (f[d] == 0.0 && w[d] == 0.0) continue;
                    long long cdn = 0, ci = 0;
                    for (std::size_t y = 0; y < L; ++y) {
                      const std::size_t yd = y + d < L ? y + d : y + d - L;
                      cdn += static_cast<long long>(dn[y]) * dn[yd];
                      ci += I[y] * I[yd];
                    }
                    lhs_num += static_cast<long long>(f[d]) * cdn;
                    rhs_num += static_cast<long long>(w[d]) * ci;
                  }
                  acc.lhs.add(lhs_num);
                  acc.rhs.add(rhs_num);
                  acc.diff.add(lhs_num - rhs_num);
                  ++acc.n;
                }
              });
  detail::SumRuleBatch full;
  for (const auto& b : batches) full.merge(b);
  SumRuleResult r;
  r.samples = full.n;
  r.excluded = full.excluded;
  const double Lf = static_cast<double>(L);
  auto stats = [&](const IntMoments& m, double& val, double& err) {
    long double mu2, mu3, mu4;
    m.central_moments(mu2, mu3, mu4);
    val = m.mean() / Lf;
    err = m.n > 1 ? std::sqrt(static_cast<double>(mu2) / static_cast<double>(m.n)) / Lf : 0.0;
  };
  stats(full.lhs, r.lhs, r.lhs_error);
  stats(full.rhs, r.rhs, r.rhs_error);
  stats(full.diff, r.discrepancy, r.discrepancy_error);
  r.z_score = r.discrepancy_error > 0.0 ? r.discrepancy / r.discrepancy_error : 0.0;
  return r;
}

}  // namespace bbs::mc
