#include <catch2/catch_amalgamated.hpp>

#include "secfl/secagg/graph.hpp"

using namespace secfl::secagg;

namespace {

void check_regular(const CommGraph& g) {
  REQUIRE(g.adjacency.size() == g.n);
  for (std::size_t u = 0; u < g.n; ++u) {
    CHECK(g.adjacency[u].size() == g.k);
    CHECK(g.adjacency[u].count(static_cast<std::uint16_t>(u)) == 0);
    for (std::uint16_t v : g.adjacency[u]) {
      CHECK(g.has_edge(v, static_cast<std::uint16_t>(u)));
    }
  }
}

}  // namespace

TEST_CASE("k = n-1 yields the complete graph") {
  auto g = build_k_regular(4, 3, 7);
  check_regular(g);
  for (std::size_t u = 0; u < 4; ++u) CHECK(g.adjacency[u].size() == 3);
}

TEST_CASE("every node has degree exactly k") {
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{6, 2},
                      {20, 6},
                      {20, 19},
                      {10, 5},
                      {9, 4},
                      {12, 7}}) {
    auto g = build_k_regular(n, k, 1234);
    check_regular(g);
  }
}

TEST_CASE("handshake and range violations are rejected") {
  CHECK_THROWS_AS(build_k_regular(5, 3, 1), std::invalid_argument);  // 15 odd
  CHECK_THROWS_AS(build_k_regular(5, 5, 1), std::invalid_argument);  // k >= n
  CHECK_THROWS_AS(build_k_regular(5, 0, 1), std::invalid_argument);
}

TEST_CASE("construction is deterministic per seed") {
  auto a = build_k_regular(12, 5, 42);
  auto b = build_k_regular(12, 5, 42);
  auto c = build_k_regular(12, 5, 43);
  CHECK(a.adjacency == b.adjacency);
  CHECK(a.adjacency != c.adjacency);
}
