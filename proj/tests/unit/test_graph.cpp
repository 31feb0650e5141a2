// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <utility>
#include <vector>

#include "fdsim/graph.hpp"
#include "fdsim/rng.hpp"

using namespace fdsim;

TEST_SUITE("graph") {
  TEST_CASE("ring_lattice(10, 6): degrees and neighbor sets") {
    const Graph g = Graph::ring_lattice(10, 6);
    CHECK(g.num_nodes() == 10);
    CHECK(g.num_edges() == 30);
    for (std::size_t i = 0; i < 10; ++i) CHECK(g.degree(i) == 6);
    CHECK(g.neighbors(0) == std::vector<std::size_t>{1, 2, 3, 7, 8, 9});
    CHECK(g.neighbors(5) == std::vector<std::size_t>{2, 3, 4, 6, 7, 8});
  }

  TEST_CASE("smallest ring is a triangle") {
    const Graph g = Graph::ring_lattice(3, 2);
    CHECK(g.num_edges() == 3);
    CHECK(g.neighbors(0) == std::vector<std::size_t>{1, 2});
  }

  TEST_CASE("ring_lattice rejects bad k") {
    CHECK_THROWS_AS(Graph::ring_lattice(10, 5), std::invalid_argument);
    CHECK_THROWS_AS(Graph::ring_lattice(10, 0), std::invalid_argument);
    CHECK_THROWS_AS(Graph::ring_lattice(10, 10), std::invalid_argument);
    CHECK_THROWS_AS(Graph::ring_lattice(1, 2), std::invalid_argument);
  }

  TEST_CASE("custom edge lists") {
    const std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 1}};
    const Graph g = Graph::from_edges(3, edges);
    CHECK(g.neighbors(1) == std::vector<std::size_t>{0});
    CHECK(g.neighbors(2).empty());
    CHECK_THROWS_AS(g.neighbors(3), std::out_of_range);

    const std::vector<std::pair<std::size_t, std::size_t>> self = {{1, 1}};
    CHECK_THROWS_AS(Graph::from_edges(3, self), std::invalid_argument);
    const std::vector<std::pair<std::size_t, std::size_t>> dup = {{0, 1}, {1, 0}};
    CHECK_THROWS_AS(Graph::from_edges(3, dup), std::invalid_argument);
    const std::vector<std::pair<std::size_t, std::size_t>> oob = {{0, 5}};
    CHECK_THROWS_AS(Graph::from_edges(3, oob), std::invalid_argument);
  }

  TEST_CASE("connectivity") {
    CHECK(Graph::ring_lattice(10, 6).is_connected());
    const std::vector<std::pair<std::size_t, std::size_t>> two = {{0, 1}, {2, 3}};
    CHECK_FALSE(Graph::from_edges(4, two).is_connected());
    CHECK(Graph::from_edges(1, {}).is_connected());
  }

  TEST_CASE("neighbor relation is symmetric on random graphs") {
    SplitMix64 gen(17);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + gen.next_u64() % 12;
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
          if (gen.next_f64() < 0.4) edges.emplace_back(a, b);
      const Graph g = Graph::from_edges(n, edges);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : g.neighbors(i)) {
          const auto& back = g.neighbors(j);
          CHECK(std::find(back.begin(), back.end(), i) != back.end());
          CHECK(j != i);
        }
      }
    }
  }
}
