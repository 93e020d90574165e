#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "secfl/secagg/graph.hpp"
#include "secfl/secagg/mask.hpp"

using namespace secfl;
using namespace secfl::secagg;

namespace {

Seed128 seed_from(std::uint64_t v) {
  Seed128 s{};
  Rng rng(v);
  rng.fill_bytes(s);
  return s;
}

struct Party {
  ClientKeys keys;
  Seed128 self_seed;
  std::map<std::uint16_t, Seed128> round_seeds;  // per-round pairwise seeds
};

// Full client-side setup for one simulated round.
std::vector<Party> setup_parties(const CommGraph& g, std::uint32_t round,
                                 std::uint64_t seed) {
  std::vector<Party> parties(g.n);
  for (std::size_t u = 0; u < g.n; ++u) {
    parties[u].keys = derive_client_keys(seed_from(derive_seed(seed, {1, u})));
    parties[u].self_seed = seed_from(derive_seed(seed, {2, round, u}));
  }
  for (std::size_t u = 0; u < g.n; ++u) {
    for (std::uint16_t v : g.neighbors(static_cast<std::uint16_t>(u))) {
      const Seed128 base =
          agree_pairwise(parties[u].keys.secret, parties[v].keys.public_key);
      parties[u].round_seeds[v] = round_mask_seed(base, round);
    }
  }
  return parties;
}

RingVector random_ring(std::size_t len, Rng& rng) {
  RingVector v(len);
  for (auto& e : v) e = rng.uniform_u64(1 << 20);  // small values, far from wrap
  return v;
}

}  // namespace

TEST_CASE("two clients with zero vectors cancel pairwise masks exactly") {
  auto g = build_k_regular(2, 1, 3);
  auto parties = setup_parties(g, 1, 77);
  const RingVector zero(32, 0);

  // strip each side's own self mask; what remains is the pairwise term,
  // which must cancel edge-wise
  auto mu = mask_update(zero, 0, g, parties[0].round_seeds, parties[0].self_seed);
  auto mv = mask_update(zero, 1, g, parties[1].round_seeds, parties[1].self_seed);
  sub_in_place(mu.vector, expand_mask(parties[0].self_seed, zero.size()));
  sub_in_place(mv.vector, expand_mask(parties[1].self_seed, zero.size()));

  RingVector sum(zero.size(), 0);
  add_in_place(sum, mu.vector);
  add_in_place(sum, mv.vector);
  for (auto e : sum) CHECK(e == 0);
}

TEST_CASE("pairwise masks cancel over arbitrary graphs") {
  Rng rng(11);
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{4, 3}, {6, 2}, {10, 5},
                      {20, 6}}) {
    auto g = build_k_regular(n, k, derive_seed(5, {n, k}));
    auto parties = setup_parties(g, 3, derive_seed(6, {n, k}));
    const std::size_t len = 40;

    RingVector expected(len, 0);
    RingVector masked_sum(len, 0);
    std::vector<RingVector> self_masks;
    for (std::size_t u = 0; u < n; ++u) {
      auto q = random_ring(len, rng);
      add_in_place(expected, q);
      auto mu = mask_update(q, static_cast<std::uint16_t>(u), g,
                            parties[u].round_seeds, parties[u].self_seed);
      add_in_place(masked_sum, mu.vector);
      self_masks.push_back(expand_mask(parties[u].self_seed, len));
    }
    // after removing self masks the pairwise terms have cancelled edge-wise
    for (const auto& sm : self_masks) sub_in_place(masked_sum, sm);
    CHECK(masked_sum == expected);
  }
}

TEST_CASE("a masked vector shows no positional correlation with its input") {
  auto g = build_k_regular(4, 3, 9);
  auto parties = setup_parties(g, 1, 13);
  const std::size_t len = 100'000;
  Rng rng(21);
  RingVector q(len);
  for (auto& e : q) e = rng.uniform_u64(1000);  // all "positive" small values

  auto mu = mask_update(q, 0, g, parties[0].round_seeds, parties[0].self_seed);

  // sign test: masked entries should land in the upper/lower half of the
  // ring independently of the input; with uniform masks each side has
  // probability 1/2
  std::size_t upper = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (mu.vector[i] >= (1ULL << 63)) ++upper;
  }
  const double z = (static_cast<double>(upper) - len / 2.0) / std::sqrt(len / 4.0);
  INFO("upper=" << upper << " z=" << z);
  CHECK(std::abs(z) < 4.0);
}

TEST_CASE("zero-padded and dense inputs yield indistinguishable masked updates") {
  auto g = build_k_regular(6, 5, 17);
  auto parties = setup_parties(g, 2, 23);
  const std::size_t len = 100'000;
  Rng rng(29);

  RingVector dense(len), padded(len, 0);
  for (auto& e : dense) e = rng.uniform_u64(1 << 16);
  for (std::size_t i = 0; i < len / 2; ++i) padded[i] = rng.uniform_u64(1 << 16);
  // second half of `padded` stays zero, as a pruned client's update would

  auto uniformity_z = [&](const RingVector& v) {
    const std::size_t buckets = 1 << 12;
    std::vector<std::uint32_t> count(buckets, 0);
    for (auto e : v) ++count[e >> 52];  // top 12 bits
    const double expected = static_cast<double>(v.size()) / buckets;
    double chi2 = 0.0;
    for (auto c : count) {
      const double d = c - expected;
      chi2 += d * d / expected;
    }
    const double dof = buckets - 1;
    return (chi2 - dof) / std::sqrt(2.0 * dof);
  };

  auto md = mask_update(dense, 0, g, parties[0].round_seeds, parties[0].self_seed);
  auto mp = mask_update(padded, 1, g, parties[1].round_seeds, parties[1].self_seed);
  CHECK(std::abs(uniformity_z(md.vector)) < 4.0);
  CHECK(std::abs(uniformity_z(mp.vector)) < 4.0);
  CHECK(md.vector.size() == mp.vector.size());
}

TEST_CASE("mask_update requires a seed per neighbor") {
  auto g = build_k_regular(4, 3, 1);
  auto parties = setup_parties(g, 1, 2);
  auto seeds = parties[0].round_seeds;
  seeds.erase(seeds.begin());
  const RingVector q(8, 0);
  CHECK_THROWS_AS(mask_update(q, 0, g, seeds, parties[0].self_seed),
                  std::invalid_argument);
}

TEST_CASE("unmasking with no dropouts recovers the plaintext ring sum") {
  const std::size_t n = 20, k = 6, len = 64, t = 14;
  const std::uint32_t round = 5;
  auto field = PrimeField::production();
  auto g = build_k_regular(n, k, 31);
  auto parties = setup_parties(g, round, 41);

  Rng rng(51);
  RingVector expected(len, 0);
  std::vector<MaskedUpdate> masked;
  std::vector<SeedShare> shares;
  std::vector<PublicKey> pks(n);
  std::set<std::uint16_t> survivors;
  for (std::size_t u = 0; u < n; ++u) {
    auto q = random_ring(len, rng);
    add_in_place(expected, q);
    masked.push_back(mask_update(q, static_cast<std::uint16_t>(u), g,
                                 parties[u].round_seeds, parties[u].self_seed));
    auto s = share_secret(seed_to_field(parties[u].self_seed), n, t, field,
                          derive_seed(61, {u}), static_cast<std::uint16_t>(u),
                          ShareKind::self_seed);
    shares.insert(shares.end(), s.begin(), s.end());
    pks[u] = parties[u].keys.public_key;
    survivors.insert(static_cast<std::uint16_t>(u));
  }

  auto sum = unmask_aggregate(masked, survivors, {}, shares, g, RingParams{}, pks,
                              round, t, field);
  CHECK(sum == expected);
}

TEST_CASE("unmasking survives one dropped client out of five") {
  const std::size_t n = 5, k = 4, len = 32, t = 4;
  const std::uint32_t round = 2;
  auto field = PrimeField::production();
  auto g = build_k_regular(n, k, 8);
  auto parties = setup_parties(g, round, 15);

  Rng rng(16);
  std::vector<RingVector> inputs(n);
  std::vector<MaskedUpdate> masked;
  std::vector<SeedShare> shares;
  std::vector<PublicKey> pks(n);
  for (std::size_t u = 0; u < n; ++u) {
    inputs[u] = random_ring(len, rng);
    masked.push_back(mask_update(inputs[u], static_cast<std::uint16_t>(u), g,
                                 parties[u].round_seeds, parties[u].self_seed));
    pks[u] = parties[u].keys.public_key;
  }

  const std::uint16_t dropped_id = 2;
  std::set<std::uint16_t> survivors, dropped{dropped_id};
  RingVector expected(len, 0);
  for (std::size_t u = 0; u < n; ++u) {
    if (u == dropped_id) continue;
    survivors.insert(static_cast<std::uint16_t>(u));
    add_in_place(expected, inputs[u]);
    auto s = share_secret(seed_to_field(parties[u].self_seed), n, t, field,
                          derive_seed(71, {u}), static_cast<std::uint16_t>(u),
                          ShareKind::self_seed);
    shares.insert(shares.end(), s.begin(), s.end());
  }
  auto key_shares = share_secret(seed_to_field(parties[dropped_id].keys.key_seed), n, t,
                                 field, derive_seed(72, {0}), dropped_id,
                                 ShareKind::secret_key);
  shares.insert(shares.end(), key_shares.begin(), key_shares.end());

  // the dropped client's masked update never arrived
  masked.erase(masked.begin() + dropped_id);

  auto sum = unmask_aggregate(masked, survivors, dropped, shares, g, RingParams{}, pks,
                              round, t, field);
  CHECK(sum == expected);
}

TEST_CASE("unmasking aborts below the share threshold") {
  const std::size_t n = 4, k = 3, len = 8, t = 3;
  auto field = PrimeField::production();
  auto g = build_k_regular(n, k, 3);
  auto parties = setup_parties(g, 1, 4);

  std::vector<MaskedUpdate> masked;
  std::vector<SeedShare> shares;
  std::vector<PublicKey> pks(n);
  std::set<std::uint16_t> survivors;
  Rng rng(5);
  for (std::size_t u = 0; u < n; ++u) {
    masked.push_back(mask_update(random_ring(len, rng), static_cast<std::uint16_t>(u),
                                 g, parties[u].round_seeds, parties[u].self_seed));
    pks[u] = parties[u].keys.public_key;
    survivors.insert(static_cast<std::uint16_t>(u));
    auto s = share_secret(seed_to_field(parties[u].self_seed), n, t, field,
                          derive_seed(81, {u}), static_cast<std::uint16_t>(u),
                          ShareKind::self_seed);
    // keep too few shares for client 0
    const std::size_t keep = (u == 0) ? t - 1 : n;
    shares.insert(shares.end(), s.begin(), s.begin() + keep);
  }
  CHECK_THROWS_AS(unmask_aggregate(masked, survivors, {}, shares, g, RingParams{}, pks,
                                   1, t, field),
                  ProtocolAbort);
}
