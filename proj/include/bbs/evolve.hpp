#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bbs/config.hpp"
#include "bbs/errors.hpp"

namespace bbs {

// Per-bond carrier loads from one sweep. loads[x] is the load entering
// site x; `exit` is the load after the last site. A periodic sweep closes:
// exit == loads[0].
struct CarrierTrace {
  int capacity = 1;
  std::vector<int> loads;
  int exit = 0;
};

struct EvolveResult {
  Configuration config;
  CarrierTrace trace;
};

namespace detail {

// Reference per-site rule. Reads `in`, writes `out` (may alias), records the
// entering load per site when `trace` is non-null. Returns exit load and the
// number of pickup events.
inline std::pair<int, long> carrier_pass(const Configuration& in, Configuration& out,
                                         int capacity, int entry,
                                         std::vector<int>* trace) {
  const std::size_t n = in.size();
  int u = entry;
  long pickups = 0;
  for (std::size_t x = 0; x < n; ++x) {
    if (trace) (*trace)[x] = u;
    const bool occupied = in.get(x);
    if (occupied && u < capacity) {
      out.set(x, false);
      ++u;
      ++pickups;
    } else if (!occupied && u > 0) {
      out.set(x, true);
      --u;
    } else {
      out.set(x, occupied);
    }
  }
  return {u, pickups};
}

}  // namespace detail

// One left-to-right pass of a capacity-l carrier with initial load u0.
inline EvolveResult evolve_open(const Configuration& config, int capacity, int u0) {
  if (capacity < 1) throw DomainError("evolve_open: capacity must be >= 1");
  if (u0 < 0 || u0 > capacity)
    throw DomainError("evolve_open: initial load must lie in [0, capacity]");
  EvolveResult r{Configuration(config.size()), {capacity, std::vector<int>(config.size()), 0}};
  auto [exit, pickups] = detail::carrier_pass(config, r.config, capacity, u0, &r.trace.loads);
  (void)pickups;
  r.trace.exit = exit;
  return r;
}

// Periodic time evolution T_l. The entering load is the least fixed point of
// the pass map u -> exit_load(u), reached by iterating from u = 0. The pass
// map is monotone non-decreasing and bounded by the capacity, so at most
// capacity+1 updates occur before a fixed point is hit.
inline EvolveResult evolve_periodic(const Configuration& config, int capacity) {
  if (capacity < 1) throw DomainError("evolve_periodic: capacity must be >= 1");
  EvolveResult r{Configuration(config.size()), {capacity, std::vector<int>(config.size()), 0}};
  int u = 0;
  for (int iter = 0; iter <= capacity + 1; ++iter) {
    auto [exit, pickups] = detail::carrier_pass(config, r.config, capacity, u, &r.trace.loads);
    (void)pickups;
    if (exit == u) {
      r.trace.exit = exit;
      return r;
    }
    u = exit;
  }
  throw CarrierNonConvergent("evolve_periodic: no closed carrier load found");
}

// Conserved energy E_k: number of pickup events of the fixed-point
// capacity-k carrier. E_K = Q for K at least the longest soliton size.
inline long energy(const Configuration& config, int capacity) {
  if (capacity < 1) throw DomainError("energy: capacity must be >= 1");
  Configuration scratch(config.size());
  int u = 0;
  for (int iter = 0; iter <= capacity + 1; ++iter) {
    auto [exit, pickups] = detail::carrier_pass(config, scratch, capacity, u, nullptr);
    if (exit == u) return pickups;
    u = exit;
  }
  throw CarrierNonConvergent("energy: no closed carrier load found");
}

// Conserved energies E_1..E_K of a configuration, with the E_0 = 0 convention
// kept implicit (E[k-1] holds E_k).
struct EnergySpectrum {
  std::size_t length = 0;
  std::vector<long> E;

  long at(int k) const {  // E_k with E_0 = 0
    if (k <= 0) return 0;
    return E.at(static_cast<std::size_t>(k) - 1);
  }
  int max_index() const { return static_cast<int>(E.size()); }
};

inline EnergySpectrum spectrum(const Configuration& config, int max_k) {
  EnergySpectrum s;
  s.length = config.size();
  s.E.reserve(static_cast<std::size_t>(max_k));
  for (int k = 1; k <= max_k; ++k) s.E.push_back(energy(config, k));
  return s;
}

// Extends the spectrum until it saturates at E_k = Q, then one step further
// so the flat tail is visible to soliton_content.
inline EnergySpectrum saturated_spectrum(const Configuration& config) {
  const long q = static_cast<long>(config.ball_count());
  EnergySpectrum s;
  s.length = config.size();
  for (int k = 1;; ++k) {
    s.E.push_back(energy(config, k));
    if (s.E.back() == q && s.E.size() >= 2 && s.E[s.E.size() - 2] == q) break;
    if (k > static_cast<int>(config.size()) + 1)
      throw NonSaturatedSpectrum("saturated_spectrum: tail did not stabilize");
  }
  return s;
}

// Soliton multiplicities m_k = 2E_k - E_{k-1} - E_{k+1} for k = 1..K-1.
// Requires a saturated tail (E_{K-1} = E_K).
inline std::vector<long> soliton_content(const EnergySpectrum& spec) {
  const int K = spec.max_index();
  if (K < 2 || spec.at(K) != spec.at(K - 1))
    throw NonSaturatedSpectrum("soliton_content: spectrum tail has not stabilized");
  std::vector<long> m;
  m.reserve(static_cast<std::size_t>(K) - 1);
  for (int k = 1; k < K; ++k) {
    const long mk = 2 * spec.at(k) - spec.at(k - 1) - spec.at(k + 1);
    if (mk < 0)
      throw DomainError("soliton_content: negative multiplicity (invalid spectrum)");
    m.push_back(mk);
  }
  return m;
}

// Pseudoenergy of a single configuration,
//   eps_i = -ln((2E_i - E_{i+1} - E_{i-1}) / (L - 2E_i)),
// defined whenever the configuration contains at least one size-i soliton.
inline double pseudoenergy(const EnergySpectrum& spec, int i) {
  if (i < 1 || i + 1 > spec.max_index())
    throw DomainError("pseudoenergy: index out of computed range");
  const long num = 2 * spec.at(i) - spec.at(i + 1) - spec.at(i - 1);
  const long den = static_cast<long>(spec.length) - 2 * spec.at(i);
  if (den <= 0) throw DomainError("pseudoenergy: requires 2 E_i < L");
  if (num == 0)
    throw UndefinedPseudoenergy("pseudoenergy: no size-" + std::to_string(i) +
                                " soliton in this configuration");
  return -std::log(static_cast<double>(num) / static_cast<double>(den));
}

// eps_1..eps_{K-1} from a spectrum computed up to K.
inline std::vector<double> pseudoenergies(const EnergySpectrum& spec) {
  std::vector<double> eps;
  eps.reserve(static_cast<std::size_t>(spec.max_index()) - 1);
  for (int i = 1; i < spec.max_index(); ++i) eps.push_back(pseudoenergy(spec, i));
  return eps;
}

// Microscopic generalized current field eta^{(l)}_i(x) = min(u'_0(x), u_1(x)),
// where u is the periodic T_l carrier on `config` and u' the periodic T_i
// carrier on T_l(config). Symmetric under (l, i) exchange.
struct CurrentField {
  int evolution_capacity = 1;  // l
  int charge_capacity = 1;     // i
  std::vector<int> values;
};

inline CurrentField generalized_current_field(const Configuration& config, int l, int i) {
  const EvolveResult first = evolve_periodic(config, l);
  const EvolveResult second = evolve_periodic(first.config, i);
  CurrentField f;
  f.evolution_capacity = l;
  f.charge_capacity = i;
  f.values.resize(config.size());
  for (std::size_t x = 0; x < config.size(); ++x) {
    f.values[x] = std::min(i - second.trace.loads[x], first.trace.loads[x]);
  }
  return f;
}

}  // namespace bbs
