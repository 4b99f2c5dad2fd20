#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>

#include "bbs/config.hpp"
#include "bbs/errors.hpp"
#include "bbs/rng.hpp"

namespace bbs {

// Product state: each box occupied independently with probability `density`.
struct IidSpec {
  std::size_t length = 0;
  double density = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (length < 1) throw DomainError("IidSpec: length must be >= 1");
    if (!(density >= 0.0 && density < 0.5))
      throw DomainError("IidSpec: density must lie in [0, 1/2)");
  }

  double fugacity() const { return density / (1.0 - density); }
};

inline Configuration sample_iid(const IidSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  Configuration c(spec.length);
  for (std::size_t w = 0; w < c.words().size(); ++w) {
    std::uint64_t word = 0;
    const std::size_t base = w * 64;
    const std::size_t n = std::min<std::size_t>(64, spec.length - base);
    for (std::size_t b = 0; b < n; ++b)
      if (rng.next_double() < spec.density) word |= std::uint64_t{1} << b;
    c.words()[w] = word;
  }
  return c;
}

// Two-temperature GGE with weight exp(-beta1 E_1 - beta_inf Q), where E_1 is
// the soliton count and Q the ball count. Parameterized equivalently by
// (a, z) through e^{beta1/2} = (a^{1/2}-a^{-1/2})/(z^{1/2}-z^{-1/2}) and
// z = e^{-beta_inf}. Sampled by a Metropolis chain over single-site flips.
struct Gge2tSpec {
  std::size_t length = 0;
  double beta1 = 0.0;
  double beta_inf = 0.0;
  int burn_in = 20;   // sweeps (1 sweep = length proposed flips)
  int thinning = 5;   // sweeps between successive chain samples
  std::string proposal = "flip";
  std::uint64_t seed = 1;

  void validate() const {
    if (length < 1) throw DomainError("Gge2tSpec: length must be >= 1");
    if (burn_in < 0 || thinning < 1)
      throw DomainError("Gge2tSpec: mcmc parameters must be positive");
    if (proposal != "flip")
      throw DomainError("Gge2tSpec: only the single-site 'flip' proposal exists");
    if (!(fugacity_z() > 0.0 && fugacity_z() < 1.0))
      throw InvalidTemperature("Gge2tSpec: requires beta_inf > 0 (implied a, z in (0,1))");
  }

  double fugacity_z() const { return std::exp(-beta_inf); }

  // Positive root of the quadratic for a^{1/2}; a < 1 whenever z < 1.
  double parameter_a() const {
    const double z = fugacity_z();
    const double c = std::exp(0.5 * beta1) * (1.0 / std::sqrt(z) - std::sqrt(z));
    const double w = 0.5 * (-c + std::sqrt(c * c + 4.0));
    return w * w;
  }

  double mean_density() const {
    const double a = parameter_a();
    return a / (1.0 + a);
  }

  static Gge2tSpec from_az(double a, double z, std::size_t length, std::uint64_t seed) {
    if (!(a > 0.0 && a < 1.0 && z > 0.0 && z < 1.0))
      throw InvalidTemperature("Gge2tSpec: requires 0 < a < 1 and 0 < z < 1");
    Gge2tSpec s;
    s.length = length;
    s.seed = seed;
    s.beta_inf = -std::log(z);
    s.beta1 = 2.0 * std::log((1.0 / std::sqrt(a) - std::sqrt(a)) /
                             (1.0 / std::sqrt(z) - std::sqrt(z)));
    return s;
  }
};

// E_1 equals the number of run starts {x : s_x = 1 and s_{x-1} = 0} on the
// ring, for every configuration (verified exhaustively against energy(.,1)
// in the test suite). This makes the Metropolis update a 3-site local rule.
inline long run_start_count(const Configuration& c) {
  long n = 0;
  const std::size_t L = c.size();
  for (std::size_t x = 0; x < L; ++x)
    if (c.get(x) && !c.get((x + L - 1) % L)) ++n;
  return n;
}

class Gge2tChain {
 public:
  explicit Gge2tChain(const Gge2tSpec& spec)
      : spec_(spec), rng_(spec.seed), state_(spec.length) {
    spec_.validate();
    // Start from an i.i.d. draw at the target mean density; the burn-in then
    // only has to fix up local statistics.
    IidSpec init{spec_.length, spec_.mean_density(), rng_.next_u64()};
    state_ = sample_iid(init);
    e1_ = run_start_count(state_);
    q_ = static_cast<long>(state_.ball_count());
    for (int s = 0; s < spec_.burn_in; ++s) sweep();
  }

  // One sweep = `length` proposed single-site flips.
  void sweep() {
    const std::size_t L = spec_.length;
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t x = static_cast<std::size_t>(rng_.next_below(L));
      const bool sx = state_.get(x);
      const bool sl = state_.get((x + L - 1) % L);
      const bool sr = state_.get((x + 1) % L);
      long de1 = 0;
      if (L > 1) {
        const int before = (sx && !sl ? 1 : 0) + (sr && !sx ? 1 : 0);
        const int after = (!sx && !sl ? 1 : 0) + (sr && sx ? 1 : 0);
        de1 = after - before;
      }
      const long dq = sx ? -1 : 1;
      const double dw = spec_.beta1 * de1 + spec_.beta_inf * dq;
      if (dw <= 0.0 || rng_.next_double() < std::exp(-dw)) {
        state_.flip(x);
        e1_ += de1;
        q_ += dq;
      }
    }
  }

  const Configuration& state() const { return state_; }
  long soliton_count() const { return e1_; }
  long ball_count() const { return q_; }

  // Next decorrelated draw (advances `thinning` sweeps).
  const Configuration& next_sample() {
    for (int s = 0; s < spec_.thinning; ++s) sweep();
    return state_;
  }

 private:
  Gge2tSpec spec_;
  SplitMix64 rng_;
  Configuration state_;
  long e1_ = 0;
  long q_ = 0;
};

// Independent draw: fresh chain, state after burn-in. Deterministic in the
// seed and embarrassingly parallel across seeds.
inline Configuration sample_gge2t(const Gge2tSpec& spec) {
  return Gge2tChain(spec).state();
}

// Plain key-value serialization for ensemble specs.
inline std::string to_key_value(const IidSpec& s) {
  std::ostringstream os;
  os << "ensemble=iid\nlength=" << s.length << "\ndensity=" << s.density
     << "\nseed=" << s.seed << "\n";
  return os.str();
}

inline std::string to_key_value(const Gge2tSpec& s) {
  std::ostringstream os;
  os << "ensemble=gge2t\nlength=" << s.length << "\nbeta1=" << s.beta1
     << "\nbeta_inf=" << s.beta_inf << "\nburn_in=" << s.burn_in
     << "\nthinning=" << s.thinning << "\nseed=" << s.seed << "\n";
  return os.str();
}

inline std::map<std::string, std::string> parse_key_value(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("spec file: expected key=value lines");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace bbs
