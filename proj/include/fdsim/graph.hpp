// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fdsim {

// Undirected device connectivity. Immutable after construction; neighbor
// lists are kept sorted so every traversal order is deterministic.
class Graph {
 public:
  Graph() = default;

  // Circulant ring lattice: node i connects to i +- 1 .. k/2 (mod n).
  static Graph ring_lattice(std::size_t n, std::size_t k) {
    if (k == 0 || k % 2 != 0) throw std::invalid_argument("ring_lattice: k must be even and > 0");
    if (k >= n) throw std::invalid_argument("ring_lattice: k must be < n");
    Graph g;
    g.adj_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 1; j <= k / 2; ++j) {
        g.add_edge_unchecked(i, (i + j) % n);
      }
    }
    g.finish();
    return g;
  }

  static Graph from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
    Graph g;
    g.adj_.resize(n);
    for (const auto& [a, b] : edges) {
      if (a >= n || b >= n) throw std::invalid_argument("from_edges: node index out of range");
      if (a == b) throw std::invalid_argument("from_edges: self-loop");
      g.add_edge_unchecked(a, b);
    }
    g.finish();
    return g;
  }

  std::size_t num_nodes() const { return adj_.size(); }
  std::size_t num_edges() const { return num_edges_; }  // undirected count
  std::size_t degree(std::size_t i) const { return neighbors(i).size(); }

  // Sorted ascending; never contains i itself.
  const std::vector<std::size_t>& neighbors(std::size_t i) const {
    if (i >= adj_.size()) throw std::out_of_range("neighbors: node index out of range");
    return adj_[i];
  }

  bool is_connected() const {
    if (adj_.empty()) return true;
    std::vector<char> seen(adj_.size(), 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    std::size_t visited = 1;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj_[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++visited;
          q.push(v);
        }
      }
    }
    return visited == adj_.size();
  }

 private:
  void add_edge_unchecked(std::size_t a, std::size_t b) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }

  void finish() {
    num_edges_ = 0;
    for (auto& nb : adj_) {
      std::sort(nb.begin(), nb.end());
      if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
        throw std::invalid_argument("Graph: duplicate edge");
      num_edges_ += nb.size();
    }
    num_edges_ /= 2;
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::size_t num_edges_ = 0;
};

}  // namespace fdsim
