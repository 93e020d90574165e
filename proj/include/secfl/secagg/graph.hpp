#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "secfl/common.hpp"

namespace secfl::secagg {

// k-regular client communication graph. k = n-1 is the complete graph
// (plain SecAgg); smaller k trades setup cost for resilience.
struct CommGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::set<std::uint16_t>> adjacency;

  const std::set<std::uint16_t>& neighbors(std::uint16_t u) const {
    return adjacency.at(u);
  }
  bool has_edge(std::uint16_t u, std::uint16_t v) const {
    return adjacency.at(u).count(v) > 0;
  }
};

// Circulant construction (ring offsets 1..k/2, plus the antipode when k is
// odd) relabeled by a seeded permutation. Exactly k-regular, simple,
// deterministic for a given seed.
inline CommGraph build_k_regular(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k >= n) throw std::invalid_argument("graph: need 1 <= k < n");
  if ((n * k) % 2 != 0) throw std::invalid_argument("graph: n*k must be even");

  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i;
  Rng rng(seed);
  rng.shuffle(label);

  CommGraph g;
  g.n = n;
  g.k = k;
  g.adjacency.resize(n);
  auto connect = [&](std::size_t a, std::size_t b) {
    g.adjacency[label[a]].insert(static_cast<std::uint16_t>(label[b]));
    g.adjacency[label[b]].insert(static_cast<std::uint16_t>(label[a]));
  };
  for (std::size_t off = 1; off <= k / 2; ++off) {
    for (std::size_t i = 0; i < n; ++i) connect(i, (i + off) % n);
  }
  if (k % 2 == 1) {
    // n is even here (n*k even with k odd)
    for (std::size_t i = 0; i < n / 2; ++i) connect(i, i + n / 2);
  }
  return g;
}

}  // namespace secfl::secagg
