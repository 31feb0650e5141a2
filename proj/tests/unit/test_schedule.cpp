// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "fdsim/schedule.hpp"

using namespace fdsim;

TEST_SUITE("schedule") {
  TEST_CASE("growing schedule steps every tau rounds") {
    const Schedule s = Schedule::dccr(100, 100, 1000);
    CHECK(s.samples_at(0) == 100);
    CHECK(s.samples_at(99) == 100);
    CHECK(s.samples_at(100) == 200);
    CHECK(s.samples_at(199) == 200);
    CHECK(s.samples_at(200) == 300);
  }

  TEST_CASE("growing schedule saturates at the pool size") {
    const Schedule s = Schedule::dccr(100, 200, 1000);
    CHECK(s.samples_at(1999) == 1000);   // min(100 * 10, 1000)
    CHECK(s.samples_at(100000) == 1000);
  }

  TEST_CASE("growing schedule is non-decreasing") {
    const Schedule s = Schedule::dccr(7, 13, 150);
    for (std::size_t t = 0; t + 1 < 3000; ++t) CHECK(s.samples_at(t + 1) >= s.samples_at(t));
  }

  TEST_CASE("constant schedule rounds half up with a floor of one") {
    CHECK(Schedule::constant(0.2, 1000).samples_at(0) == 200);
    CHECK(Schedule::constant(1.0, 1000).samples_at(12345) == 1000);
    CHECK(Schedule::constant(0.5, 3).samples_at(0) == 2);
    CHECK(Schedule::constant(0.001, 100).samples_at(0) == 1);
  }

  TEST_CASE("full uses the whole pool, isolated uses nothing") {
    CHECK(Schedule::full(321).samples_at(0) == 321);
    CHECK(Schedule::full(321).samples_at(999) == 321);
    CHECK(Schedule::isolated(321).samples_at(0) == 0);
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(Schedule::dccr(0, 10, 100), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::dccr(10, 0, 100), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::dccr(101, 10, 100), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::constant(0.0, 100), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::constant(1.5, 100), std::invalid_argument);
  }

  TEST_CASE("cumulative counts match the analytic sum") {
    // Frozen from the arithmetic-series closed form.
    const auto total = [](const Schedule& s, std::size_t rounds) {
      std::size_t acc = 0;
      for (std::size_t t = 0; t < rounds; ++t) acc += s.samples_at(t);
      return acc;
    };
    CHECK(total(Schedule::dccr(100, 100, 1000), 2000) == 1550000);
    CHECK(total(Schedule::dccr(100, 200, 1000), 2000) == 1100000);
    CHECK(total(Schedule::dccr(50, 50, 1000), 200) == 25000);
  }
}
