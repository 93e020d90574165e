#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "secfl/secagg/graph.hpp"
#include "secfl/secagg/mask.hpp"
#include "secfl/secagg/messages.hpp"

namespace secfl {

// Self-contained property checks over the masked-aggregation protocol,
// runnable from the CLI without any test framework.
namespace protocol_suite {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

struct Party {
  secagg::ClientKeys keys;
  secagg::Seed128 self_seed;
  std::map<std::uint16_t, secagg::Seed128> round_seeds;
};

inline secagg::Seed128 seed128(std::uint64_t v) {
  secagg::Seed128 s{};
  Rng rng(v);
  rng.fill_bytes(s);
  return s;
}

inline std::vector<Party> make_parties(const secagg::CommGraph& g, std::uint32_t round,
                                       std::uint64_t seed) {
  std::vector<Party> parties(g.n);
  for (std::size_t u = 0; u < g.n; ++u) {
    parties[u].keys = secagg::derive_client_keys(seed128(derive_seed(seed, {1, u})));
    parties[u].self_seed = seed128(derive_seed(seed, {2, round, u}));
  }
  for (std::size_t u = 0; u < g.n; ++u) {
    for (std::uint16_t v : g.neighbors(static_cast<std::uint16_t>(u))) {
      parties[u].round_seeds[v] = secagg::round_mask_seed(
          secagg::agree_pairwise(parties[u].keys.secret, parties[v].keys.public_key),
          round);
    }
  }
  return parties;
}

// run masking + server unmasking over `rounds` random rounds; returns the
// number of rounds whose unmasked aggregate differed from the plaintext sum
inline std::size_t exactness_failures(std::size_t n, std::size_t k, std::size_t rounds,
                                      std::size_t len, std::size_t n_dropped,
                                      std::uint64_t seed) {
  const auto field = secagg::PrimeField::production();
  const std::size_t t = (2 * n) / 3 + 1;
  const auto g = secagg::build_k_regular(n, k, derive_seed(seed, {7}));
  Rng rng(derive_seed(seed, {8}));
  std::size_t failures = 0;

  for (std::uint32_t round = 1; round <= rounds; ++round) {
    auto parties = make_parties(g, round, derive_seed(seed, {9, round}));
    std::set<std::uint16_t> dropped;
    while (dropped.size() < n_dropped) {
      dropped.insert(static_cast<std::uint16_t>(rng.uniform_u64(n)));
    }

    std::vector<secagg::MaskedUpdate> masked;
    std::vector<secagg::SeedShare> shares;
    std::vector<secagg::PublicKey> pks(n);
    std::set<std::uint16_t> survivors;
    secagg::RingVector expected(len, 0);
    for (std::size_t u = 0; u < n; ++u) {
      const auto id = static_cast<std::uint16_t>(u);
      pks[u] = parties[u].keys.public_key;
      secagg::RingVector q(len);
      for (auto& e : q) e = rng.uniform_u64(1 << 16);
      const auto mu =
          secagg::mask_update(q, id, g, parties[u].round_seeds, parties[u].self_seed);
      if (dropped.count(id)) {
        auto ks = secagg::share_secret(
            secagg::seed_to_field(parties[u].keys.key_seed), n, t, field,
            derive_seed(seed, {10, round, u}), id, secagg::ShareKind::secret_key);
        shares.insert(shares.end(), ks.begin(), ks.end());
        continue;  // masked update never arrives
      }
      survivors.insert(id);
      masked.push_back(mu);
      secagg::add_in_place(expected, q);
      auto ss = secagg::share_secret(
          secagg::seed_to_field(parties[u].self_seed), n, t, field,
          derive_seed(seed, {11, round, u}), id, secagg::ShareKind::self_seed);
      shares.insert(shares.end(), ss.begin(), ss.end());
    }

    const auto sum = secagg::unmask_aggregate(masked, survivors, dropped, shares, g,
                                              secagg::RingParams{}, pks, round, t, field);
    if (sum != expected) ++failures;
  }
  return failures;
}

}  // namespace detail

inline std::vector<CheckResult> run_all(std::uint64_t seed = 20240901) {
  std::vector<CheckResult> results;
  auto check = [&](const std::string& name, std::function<std::string()> body) {
    CheckResult r;
    r.name = name;
    try {
      r.detail = body();
      r.passed = true;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    results.push_back(std::move(r));
  };

  check("graph-regularity", [&] {
    for (auto [n, k] : {std::pair<std::size_t, std::size_t>{4, 3}, {6, 2}, {20, 6},
                        {20, 19}, {50, 10}}) {
      const auto g = secagg::build_k_regular(n, k, derive_seed(seed, {n, k}));
      for (std::size_t u = 0; u < n; ++u) {
        if (g.adjacency[u].size() != k) throw std::runtime_error("degree mismatch");
        for (auto v : g.adjacency[u]) {
          if (v == u) throw std::runtime_error("self loop");
          if (!g.has_edge(v, static_cast<std::uint16_t>(u))) {
            throw std::runtime_error("asymmetric edge");
          }
        }
      }
    }
    return "5 configurations, exact degree and symmetry";
  });

  check("agreement-symmetry", [&] {
    for (std::uint64_t i = 0; i < 32; ++i) {
      auto a = secagg::derive_client_keys(detail::seed128(derive_seed(seed, {20, i})));
      auto b = secagg::derive_client_keys(detail::seed128(derive_seed(seed, {21, i})));
      if (secagg::agree_pairwise(a.secret, b.public_key) !=
          secagg::agree_pairwise(b.secret, a.public_key)) {
        throw std::runtime_error("asymmetric agreement");
      }
    }
    return "32 keypairs";
  });

  check("masked-sum-exactness-complete-graph", [&] {
    const auto failures = detail::exactness_failures(20, 19, 100, 64, 0, seed);
    if (failures) throw std::runtime_error("mismatched rounds");
    return "100 rounds, n=20, k=19, zero error";
  });

  check("masked-sum-exactness-k-regular", [&] {
    const auto failures = detail::exactness_failures(20, 6, 100, 64, 0, seed + 1);
    if (failures) throw std::runtime_error("mismatched rounds");
    return "100 rounds, n=20, k=6, zero error";
  });

  check("dropout-recovery", [&] {
    const auto failures = detail::exactness_failures(5, 4, 50, 32, 1, seed + 2);
    if (failures) throw std::runtime_error("mismatched rounds");
    return "50 rounds, 1 of 5 dropped, survivor sum exact";
  });

  check("shamir-threshold", [&] {
    const auto field = secagg::PrimeField::production();
    Rng rng(derive_seed(seed, {30}));
    for (int trial = 0; trial < 20; ++trial) {
      secagg::Seed128 secret{};
      rng.fill_bytes(secret);
      const auto value = secagg::seed_to_field(secret);
      auto shares =
          secagg::share_secret(value, 7, 5, field, rng.next_u64(), 0,
                               secagg::ShareKind::self_seed);
      std::vector<secagg::SeedShare> subset{shares[6], shares[0], shares[3], shares[5],
                                            shares[1]};
      if (secagg::reconstruct_secret(subset, 5, field) != value) {
        throw std::runtime_error("reconstruction mismatch");
      }
    }
    return "20 random 128-bit secrets, 5-of-7";
  });

  check("shamir-small-field-privacy", [&] {
    const secagg::PrimeField field(257);
    auto shares = secagg::share_secret(123, 3, 2, field, derive_seed(seed, {31}), 0,
                                       secagg::ShareKind::self_seed);
    for (const auto& share : shares) {
      const mpz_class x = static_cast<unsigned long>(share.x);
      std::set<unsigned long> consistent;
      for (unsigned long s = 0; s < 257; ++s) {
        // the unique line through (0, s) and (x, y): f(z) = s + a1*z
        const mpz_class a1 = field.mul(field.sub(share.y, s), field.inv(x));
        if (field.add(s, field.mul(a1, x)) == share.y) consistent.insert(s);
      }
      if (consistent.size() != 257) throw std::runtime_error("secret leaked");
    }
    return "every single share is consistent with all 257 secrets";
  });

  check("quantization-bound", [&] {
    const secagg::RingParams ring;
    Rng rng(derive_seed(seed, {32}));
    const std::size_t len = 100000;
    const std::size_t n = 10;
    WeightDelta d;
    d.values.resize(len);
    secagg::RingVector sum(len, 0);
    std::vector<double> real_avg(len, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      for (auto& v : d.values) v = rng.uniform_real(-2.0, 2.0);
      secagg::add_in_place(sum, secagg::quantize(d, ring));
      for (std::size_t i = 0; i < len; ++i) real_avg[i] += d.values[i] / n;
    }
    const auto avg = secagg::dequantize_sum(sum, n, ring);
    const double bound = 1.0 / static_cast<double>(ring.scale);
    for (std::size_t i = 0; i < len; ++i) {
      if (std::abs(avg[i] - real_avg[i]) > bound) {
        throw std::runtime_error("bound exceeded at element " + std::to_string(i));
      }
    }
    return "100000 elements within 1/scale";
  });

  check("mask-uniformity-chi-square", [&] {
    const auto v = secagg::expand_mask(detail::seed128(derive_seed(seed, {33})), 1000000);
    const std::size_t buckets = 1 << 16;
    std::vector<std::uint32_t> count(buckets, 0);
    for (auto e : v) ++count[e & (buckets - 1)];
    const double expected = static_cast<double>(v.size()) / buckets;
    double chi2 = 0.0;
    for (auto c : count) {
      const double d = c - expected;
      chi2 += d * d / expected;
    }
    const double dof = buckets - 1;
    const double z = (chi2 - dof) / std::sqrt(2.0 * dof);
    if (std::abs(z) >= 3.29) {
      throw std::runtime_error("chi-square z = " + std::to_string(z));
    }
    std::ostringstream os;
    os << "1e6 elements, 2^16 buckets, |z| = " << std::abs(z);
    return os.str();
  });

  check("fixed-size-messages", [&] {
    for (std::size_t len : {16, 256, 2788}) {
      secagg::RingVector v(len, 0);
      auto m = secagg::make_masked_update_message(1, 0, v);
      std::vector<std::uint8_t> wire;
      secagg::encode_message(m, wire);
      if (wire.size() != secagg::masked_update_message_bytes(len)) {
        throw std::runtime_error("size formula mismatch");
      }
    }
    return "message size = header + 8*len";
  });

  return results;
}

// Prints one line per check; returns true iff everything passed.
inline bool run_and_report(std::ostream& out, std::uint64_t seed = 20240901) {
  bool all = true;
  for (const auto& r : run_all(seed)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << "\n";
    all = all && r.passed;
  }
  return all;
}

}  // namespace protocol_suite
}  // namespace secfl
