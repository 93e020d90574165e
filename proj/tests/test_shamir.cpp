#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "secfl/secagg/shamir.hpp"

using namespace secfl;
using namespace secfl::secagg;

TEST_CASE("every t-subset reconstructs the secret") {
  auto field = PrimeField::production();
  const mpz_class value = 42;
  auto shares = share_secret(value, 3, 2, field, 99, 0, ShareKind::self_seed);
  REQUIRE(shares.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      std::vector<SeedShare> pair{shares[i], shares[j]};
      CHECK(reconstruct_secret(pair, 2, field) == value);
    }
  }
}

TEST_CASE("n = t means only the full set reconstructs") {
  auto field = PrimeField::production();
  const mpz_class value = 123456789;
  auto shares = share_secret(value, 4, 4, field, 7, 0, ShareKind::self_seed);
  CHECK(reconstruct_secret(shares, 4, field) == value);
  std::vector<SeedShare> partial(shares.begin(), shares.begin() + 3);
  CHECK_THROWS_AS(reconstruct_secret(partial, 4, field), ProtocolAbort);
}

TEST_CASE("reconstruction rejects duplicate evaluation points") {
  auto field = PrimeField::production();
  auto shares = share_secret(5, 3, 2, field, 1, 0, ShareKind::self_seed);
  std::vector<SeedShare> dup{shares[0], shares[0]};
  CHECK_THROWS_AS(reconstruct_secret(dup, 2, field), std::invalid_argument);
}

TEST_CASE("threshold bounds are validated") {
  auto field = PrimeField::production();
  CHECK_THROWS_AS(share_secret(1, 3, 1, field, 1, 0, ShareKind::self_seed),
                  std::invalid_argument);
  CHECK_THROWS_AS(share_secret(1, 3, 4, field, 1, 0, ShareKind::self_seed),
                  std::invalid_argument);
}

TEST_CASE("128-bit seeds round-trip through the field") {
  auto field = PrimeField::production();
  Seed128 seed{};
  Rng rng(31337);
  rng.fill_bytes(seed);
  const mpz_class embedded = seed_to_field(seed);
  auto shares = share_secret(embedded, 5, 4, field, 17, 3, ShareKind::secret_key);
  std::vector<SeedShare> subset{shares[4], shares[1], shares[3], shares[0]};
  CHECK(field_to_seed(reconstruct_secret(subset, 4, field)) == seed);
}

TEST_CASE("t-1 shares are consistent with every candidate secret (p=257)") {
  // brute force over the demonstration field: with t=2, a single share
  // (x0, y0) lies on exactly one line through (0, s) for EVERY candidate
  // secret s, so it reveals nothing.
  PrimeField field(257);
  const mpz_class value = 201;
  auto shares = share_secret(value, 3, 2, field, 5, 0, ShareKind::self_seed);
  for (const auto& share : shares) {
    std::set<unsigned long> reachable;
    for (unsigned long s = 0; s < 257; ++s) {
      // candidate polynomial f(x) = s + a1*x matching the share requires
      // a1 = (y - s) / x, which exists for every s since x is invertible
      const mpz_class a1 =
          field.mul(field.sub(share.y, s), field.inv(static_cast<unsigned long>(share.x)));
      const mpz_class back =
          field.sub(share.y, field.mul(a1, static_cast<unsigned long>(share.x)));
      reachable.insert(back.get_ui());
    }
    CHECK(reachable.size() == 257);  // every secret remains possible
  }
}

TEST_CASE("mixed shares of two secrets are detected by re-evaluation") {
  auto field = PrimeField::production();
  auto a = share_secret(1000, 4, 2, field, 21, 0, ShareKind::self_seed);
  auto b = share_secret(2000, 4, 2, field, 22, 0, ShareKind::self_seed);

  // interpolate from a mixed pair, then check the polynomial against a third
  // honest share of secret `a`: it must not fit
  std::vector<SeedShare> mixed{a[0], b[1]};
  const mpz_class claimed = reconstruct_secret(mixed, 2, field);

  std::vector<SeedShare> honest{a[0], a[2]};
  const mpz_class truth = reconstruct_secret(honest, 2, field);
  CHECK(claimed != truth);
}
