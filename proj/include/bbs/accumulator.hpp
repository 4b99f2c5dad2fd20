#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "bbs/errors.hpp"

namespace bbs::mc {

using int128 = __int128;

// Exact integer power sums of an integer observable, up to fourth order.
// Merging is plain 128-bit addition, so it is associative and commutative
// bit-for-bit: merged statistics equal single-pass statistics regardless of
// how samples were split across workers.
struct IntMoments {
  std::uint64_t n = 0;
  int128 s1 = 0, s2 = 0, s3 = 0, s4 = 0;

  void add(long long x) {
    const int128 v = x;
    ++n;
    s1 += v;
    s2 += v * v;
    s3 += v * v * v;
    s4 += v * v * v * v;
  }

  void merge(const IntMoments& o) {
    n += o.n;
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
  }

  double mean() const { return n ? static_cast<double>(static_cast<long double>(s1) / n) : 0.0; }

  // Central moments mu2..mu4 in long double from the exact sums.
  void central_moments(long double& mu2, long double& mu3, long double& mu4) const {
    if (n == 0) {
      mu2 = mu3 = mu4 = 0.0L;
      return;
    }
    const long double r1 = static_cast<long double>(s1) / n;
    const long double r2 = static_cast<long double>(s2) / n;
    const long double r3 = static_cast<long double>(s3) / n;
    const long double r4 = static_cast<long double>(s4) / n;
    mu2 = r2 - r1 * r1;
    mu3 = r3 - 3.0L * r1 * r2 + 2.0L * r1 * r1 * r1;
    mu4 = r4 - 4.0L * r1 * r3 + 6.0L * r1 * r1 * r2 - 3.0L * r1 * r1 * r1 * r1;
  }

  // Cumulants k1..k4 of the sample distribution.
  std::array<double, 4> cumulants() const {
    long double mu2, mu3, mu4;
    central_moments(mu2, mu3, mu4);
    return {mean(), static_cast<double>(mu2), static_cast<double>(mu3),
            static_cast<double>(mu4 - 3.0L * mu2 * mu2)};
  }
};

// Exact cross sums of a pair of integer observables; cov is the only reader.
struct IntCross {
  std::uint64_t n = 0;
  int128 sx = 0, sy = 0, sxy = 0;

  void add(long long x, long long y) {
    ++n;
    sx += static_cast<int128>(x);
    sy += static_cast<int128>(y);
    sxy += static_cast<int128>(x) * y;
  }

  void merge(const IntCross& o) {
    n += o.n;
    sx += o.sx;
    sy += o.sy;
    sxy += o.sxy;
  }

  double covariance() const {
    if (n < 2) return 0.0;
    const long double mx = static_cast<long double>(sx) / n;
    const long double my = static_cast<long double>(sy) / n;
    return static_cast<double>(static_cast<long double>(sxy) / n - mx * my);
  }
};

// Integer-valued histogram with dense storage around the observed range.
struct Histogram {
  long long lo = 0;
  std::vector<std::uint64_t> counts;

  void add(long long v) {
    if (counts.empty()) {
      lo = v;
      counts.assign(1, 0);
    } else if (v < lo) {
      counts.insert(counts.begin(), static_cast<std::size_t>(lo - v), 0);
      lo = v;
    } else if (v >= lo + static_cast<long long>(counts.size())) {
      counts.resize(static_cast<std::size_t>(v - lo) + 1, 0);
    }
    ++counts[static_cast<std::size_t>(v - lo)];
  }

  void merge(const Histogram& o) {
    for (std::size_t i = 0; i < o.counts.size(); ++i)
      if (o.counts[i]) add_count(o.lo + static_cast<long long>(i), o.counts[i]);
  }

  void add_count(long long v, std::uint64_t c) {
    add(v);
    counts[static_cast<std::size_t>(v - lo)] += c - 1;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

// Streaming mean/comoment of a fixed-dimension real vector. Merged with the
// parallel-axis (Chan) update in a fixed batch order, so results do not
// depend on the worker count.
struct VecStats {
  int dim = 0;
  std::uint64_t n = 0;
  std::vector<double> mean;     // dim
  std::vector<double> comoment; // dim x dim, row-major: sum (x-m)(x-m)^T

  VecStats(int d = 0)
      : dim(d), mean(static_cast<std::size_t>(d), 0.0),
        comoment(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0) {}

  void merge(const VecStats& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const std::uint64_t nn = n + o.n;
    const double w = static_cast<double>(n) * static_cast<double>(o.n) / static_cast<double>(nn);
    std::vector<double> delta(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) delta[static_cast<std::size_t>(i)] = o.mean[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        comoment[static_cast<std::size_t>(i) * dim + j] +=
            o.comoment[static_cast<std::size_t>(i) * dim + j] +
            w * delta[static_cast<std::size_t>(i)] * delta[static_cast<std::size_t>(j)];
    for (int i = 0; i < dim; ++i)
      mean[static_cast<std::size_t>(i)] +=
          delta[static_cast<std::size_t>(i)] * static_cast<double>(o.n) / static_cast<double>(nn);
    n = nn;
  }

  double covariance(int i, int j) const {
    if (n < 2) return 0.0;
    return comoment[static_cast<std::size_t>(i) * dim + j] / static_cast<double>(n);
  }
};

// Two-pass accumulation of a batch of vectors: means first, then comoments
// around the batch mean, to avoid catastrophic cancellation.
inline VecStats vec_stats_two_pass(const std::vector<double>& flat, int dim) {
  VecStats s(dim);
  if (dim == 0) return s;
  const std::uint64_t n = flat.size() / static_cast<std::size_t>(dim);
  s.n = n;
  if (n == 0) return s;
  for (std::uint64_t r = 0; r < n; ++r)
    for (int i = 0; i < dim; ++i)
      s.mean[static_cast<std::size_t>(i)] += flat[r * dim + static_cast<std::size_t>(i)];
  for (int i = 0; i < dim; ++i) s.mean[static_cast<std::size_t>(i)] /= static_cast<double>(n);
  for (std::uint64_t r = 0; r < n; ++r)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        s.comoment[static_cast<std::size_t>(i) * dim + j] +=
            (flat[r * dim + static_cast<std::size_t>(i)] - s.mean[static_cast<std::size_t>(i)]) *
            (flat[r * dim + static_cast<std::size_t>(j)] - s.mean[static_cast<std::size_t>(j)]);
  return s;
}

// Delete-one-batch jackknife. `estimate` maps a merged accumulator to the
// statistic of interest; Acc needs merge() and a default constructor.
template <class Acc, class F>
std::pair<double, double> jackknife(const std::vector<Acc>& batches, F&& estimate) {
  const int b = static_cast<int>(batches.size());
  Acc full{};
  int used = 0;
  for (const auto& a : batches)
    if (a.n > 0) {
      full.merge(a);
      ++used;
    }
  const double theta = estimate(full);
  if (used < 2) return {theta, 0.0};
  std::vector<double> loo;
  loo.reserve(static_cast<std::size_t>(used));
  for (int k = 0; k < b; ++k) {
    if (batches[static_cast<std::size_t>(k)].n == 0) continue;
    Acc rest{};
    for (int j = 0; j < b; ++j)
      if (j != k && batches[static_cast<std::size_t>(j)].n > 0)
        rest.merge(batches[static_cast<std::size_t>(j)]);
    loo.push_back(estimate(rest));
  }
  double m = 0.0;
  for (double v : loo) m += v;
  m /= static_cast<double>(loo.size());
  double ss = 0.0;
  for (double v : loo) ss += (v - m) * (v - m);
  const double g = static_cast<double>(loo.size());
  return {theta, std::sqrt((g - 1.0) / g * ss)};
}

}  // namespace bbs::mc
