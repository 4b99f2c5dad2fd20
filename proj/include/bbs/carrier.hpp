#pragma once

#include <algorithm>
#include <tuple>

#include "bbs/errors.hpp"

namespace bbs {

// Element of B_l: a capacity-l carrier holding `load` balls,
// equivalently the pair (slots, load) with slots + load = l.
struct CarrierElement {
  int capacity = 1;
  int load = 0;

  CarrierElement() = default;
  CarrierElement(int capacity_, int load_) : capacity(capacity_), load(load_) {
    if (capacity < 1 || load < 0 || load > capacity)
      throw DomainError("CarrierElement: load must lie in [0, capacity]");
  }

  int slots() const { return capacity - load; }

  bool operator==(const CarrierElement&) const = default;
};

struct RImage {
  CarrierElement beta_out;   // in B_m
  CarrierElement alpha_out;  // in B_l
  int energy;                // H(alpha x beta) = min(alpha_0, beta_1)
};

// Combinatorial R on B_l x B_m:
//   alpha~_i = alpha_i + min(alpha_{i+1}, beta_i) - min(alpha_i, beta_{i+1})
//   beta~_i  = beta_i  - min(alpha_{i+1}, beta_i) + min(alpha_i, beta_{i+1})
// with the component index taken mod 2 and component 0 = empty slots,
// component 1 = balls.
inline RImage combinatorial_R(const CarrierElement& alpha, const CarrierElement& beta) {
  const int a0 = alpha.slots(), a1 = alpha.load;
  const int b0 = beta.slots(), b1 = beta.load;
  const int m10 = std::min(a1, b0);
  const int m01 = std::min(a0, b1);
  RImage r;
  r.alpha_out = CarrierElement(alpha.capacity, a1 + m01 - m10);
  r.beta_out = CarrierElement(beta.capacity, b1 - m01 + m10);
  r.energy = m01;
  return r;
}

}  // namespace bbs
