// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace fdsim {

// How many shared-pool samples each round distills on. The growing
// schedule starts cheap and ramps up by `d` every `tau` rounds until the
// whole pool is in play; the constant and full schedules are the
// comparison baselines, and isolated turns communication off entirely.
class Schedule {
 public:
  enum class Kind { kDccr, kConstant, kFull, kIsolated };

  static Schedule dccr(std::size_t d, std::size_t tau, std::size_t cap) {
    if (d == 0 || tau == 0) throw std::invalid_argument("Schedule::dccr: d and tau must be >= 1");
    if (d > cap) throw std::invalid_argument("Schedule::dccr: d exceeds pool size");
    Schedule s;
    s.kind_ = Kind::kDccr;
    s.d_ = d;
    s.tau_ = tau;
    s.cap_ = cap;
    return s;
  }

  // round(fraction * cap), half up, floored at 1.
  static Schedule constant(double fraction, std::size_t cap) {
    if (!(fraction > 0.0 && fraction <= 1.0))
      throw std::invalid_argument("Schedule::constant: fraction must be in (0, 1]");
    if (cap == 0) throw std::invalid_argument("Schedule::constant: empty pool");
    Schedule s;
    s.kind_ = Kind::kConstant;
    s.cap_ = cap;
    s.count_ = std::min(cap, std::max<std::size_t>(
                                 1, static_cast<std::size_t>(
                                        std::floor(fraction * static_cast<double>(cap) + 0.5))));
    return s;
  }

  static Schedule full(std::size_t cap) {
    Schedule s;
    s.kind_ = Kind::kFull;
    s.cap_ = cap;
    s.count_ = cap;
    return s;
  }

  static Schedule isolated(std::size_t cap) {
    Schedule s;
    s.kind_ = Kind::kIsolated;
    s.cap_ = cap;
    return s;
  }

  // n_d at round t; non-decreasing in t for the growing schedule.
  std::size_t samples_at(std::size_t t) const {
    switch (kind_) {
      case Kind::kDccr:
        return std::min(d_ * (t / tau_ + 1), cap_);
      case Kind::kConstant:
      case Kind::kFull:
        return count_;
      case Kind::kIsolated:
        return 0;
    }
    return 0;
  }

  Kind kind() const { return kind_; }
  std::size_t cap() const { return cap_; }
  std::size_t d() const { return d_; }
  std::size_t tau() const { return tau_; }

 private:
  Schedule() = default;
  Kind kind_ = Kind::kFull;
  std::size_t d_ = 0;
  std::size_t tau_ = 1;
  std::size_t cap_ = 0;
  std::size_t count_ = 0;
};

}  // namespace fdsim
