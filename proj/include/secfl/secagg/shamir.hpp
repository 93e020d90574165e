#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/secagg/keys.hpp"

namespace secfl::secagg {

// Prime field with a runtime modulus. Production sharing runs over
// p = 2^130 - 5, which embeds 128-bit secrets injectively; the small-field
// demonstrations use p = 257.
class PrimeField {
 public:
  explicit PrimeField(mpz_class p) : p_(std::move(p)) {
    if (p_ < 2) throw std::invalid_argument("field: modulus must be >= 2");
  }

  static PrimeField production() { return PrimeField((mpz_class(1) << 130) - 5); }

  const mpz_class& modulus() const { return p_; }

  mpz_class reduce(const mpz_class& v) const {
    mpz_class r = v % p_;
    if (r < 0) r += p_;
    return r;
  }

  mpz_class add(const mpz_class& a, const mpz_class& b) const { return reduce(a + b); }
  mpz_class sub(const mpz_class& a, const mpz_class& b) const { return reduce(a - b); }
  mpz_class mul(const mpz_class& a, const mpz_class& b) const { return reduce(a * b); }

  mpz_class inv(const mpz_class& a) const {
    mpz_class out;
    if (mpz_invert(out.get_mpz_t(), reduce(a).get_mpz_t(), p_.get_mpz_t()) == 0) {
      throw std::invalid_argument("field: element not invertible");
    }
    return out;
  }

  // Uniform element via rejection sampling on whole 64-bit words.
  mpz_class sample(Rng& rng) const {
    const std::size_t bits = mpz_sizeinbase(p_.get_mpz_t(), 2);
    const std::size_t words = (bits + 63) / 64;
    while (true) {
      mpz_class v = 0;
      for (std::size_t w = 0; w < words; ++w) {
        v <<= 64;
        v += mpz_class(static_cast<unsigned long>(rng.next_u64() >> 32)) << 32 |
             mpz_class(static_cast<unsigned long>(rng.next_u64() & 0xffffffffULL));
      }
      v >>= (64 * words - bits);  // keep exactly `bits` random bits
      if (v < p_) return v;
    }
  }

 private:
  mpz_class p_;
};

enum class ShareKind : std::uint8_t { self_seed = 0, secret_key = 1 };

// One Shamir share of a client's secret: y = f(x) for the owner's sharing
// polynomial f with f(0) = secret.
struct SeedShare {
  std::uint16_t owner = 0;
  ShareKind kind = ShareKind::self_seed;
  std::uint64_t x = 0;  // nonzero evaluation point
  mpz_class y;
};

inline mpz_class seed_to_field(const Seed128& seed) {
  mpz_class v = 0;
  for (std::size_t i = seed.size(); i-- > 0;) {
    v <<= 8;
    v += seed[i];
  }
  return v;
}

inline Seed128 field_to_seed(const mpz_class& v) {
  if (v < 0 || v >= (mpz_class(1) << 128)) {
    throw std::invalid_argument("shamir: value does not fit 128 bits");
  }
  Seed128 out{};
  mpz_class rest = v;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(mpz_class(rest & 0xff).get_ui());
    rest >>= 8;
  }
  return out;
}

// Splits `value` into n shares with threshold t: a random polynomial of
// degree t-1 with constant term `value`, evaluated at x = 1..n.
inline std::vector<SeedShare> share_secret(const mpz_class& value, std::size_t n,
                                           std::size_t t, const PrimeField& field,
                                           std::uint64_t seed, std::uint16_t owner,
                                           ShareKind kind) {
  if (t < 2 || t > n) throw std::invalid_argument("shamir: need 2 <= t <= n");
  if (value < 0 || value >= field.modulus()) {
    throw std::invalid_argument("shamir: value outside field");
  }
  Rng rng(seed);
  std::vector<mpz_class> coeff(t);
  coeff[0] = value;
  for (std::size_t i = 1; i < t; ++i) coeff[i] = field.sample(rng);

  std::vector<SeedShare> shares;
  shares.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const mpz_class x = static_cast<unsigned long>(i);
    mpz_class y = 0;
    for (std::size_t c = t; c-- > 0;) y = field.add(field.mul(y, x), coeff[c]);
    shares.push_back({owner, kind, static_cast<std::uint64_t>(i), y});
  }
  return shares;
}

// Lagrange interpolation at x = 0 over the first t shares.
inline mpz_class reconstruct_secret(std::span<const SeedShare> shares, std::size_t t,
                                    const PrimeField& field) {
  if (shares.size() < t) throw ProtocolAbort("shamir: fewer shares than threshold");
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < t; ++i) {
    if (shares[i].x == 0 || !seen.insert(shares[i].x).second) {
      throw std::invalid_argument("shamir: duplicate or zero evaluation point");
    }
  }
  mpz_class acc = 0;
  for (std::size_t i = 0; i < t; ++i) {
    const mpz_class xi = static_cast<unsigned long>(shares[i].x);
    mpz_class num = 1, den = 1;
    for (std::size_t j = 0; j < t; ++j) {
      if (j == i) continue;
      const mpz_class xj = static_cast<unsigned long>(shares[j].x);
      num = field.mul(num, xj);
      den = field.mul(den, field.sub(xj, xi));
    }
    acc = field.add(acc, field.mul(shares[i].y, field.mul(num, field.inv(den))));
  }
  return acc;
}

}  // namespace secfl::secagg
