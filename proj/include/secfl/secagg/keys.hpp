#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/secagg/ring.hpp"

namespace secfl::secagg {

using Seed128 = std::array<std::uint8_t, 16>;
using PublicKey = std::array<std::uint8_t, 32>;
using SecretKey = std::array<std::uint8_t, 32>;
using SymmetricKey = std::array<std::uint8_t, 32>;

inline void ensure_sodium() {
  static const int rc = [] {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    return 0;
  }();
  (void)rc;
}

// Key agreement keypair plus the per-round self-mask seed. The X25519 scalar
// is derived from key_seed, so sharing key_seed (128 bits) is enough for the
// server to rebuild a dropped client's pairwise masks.
struct ClientKeys {
  Seed128 key_seed{};
  SecretKey secret{};
  PublicKey public_key{};
  Seed128 self_seed{};
};

namespace detail {

inline void blake2b(std::uint8_t* out, std::size_t out_len,
                    const std::uint8_t* in, std::size_t in_len) {
  ensure_sodium();
  if (crypto_generichash(out, out_len, in, in_len, nullptr, 0) != 0) {
    throw std::runtime_error("crypto_generichash failed");
  }
}

}  // namespace detail

inline ClientKeys derive_client_keys(const Seed128& key_seed) {
  ensure_sodium();
  ClientKeys k;
  k.key_seed = key_seed;
  std::vector<std::uint8_t> tagged(key_seed.begin(), key_seed.end());
  tagged.push_back('K');
  detail::blake2b(k.secret.data(), k.secret.size(), tagged.data(), tagged.size());
  if (crypto_scalarmult_base(k.public_key.data(), k.secret.data()) != 0) {
    throw std::runtime_error("crypto_scalarmult_base failed");
  }
  return k;
}

// X25519 shared point hashed to 128 bits. Symmetric:
// agree(sk_u, pk_v) == agree(sk_v, pk_u).
inline Seed128 agree_pairwise(const SecretKey& secret, const PublicKey& peer_public) {
  ensure_sodium();
  std::array<std::uint8_t, 32> point{};
  if (crypto_scalarmult(point.data(), secret.data(), peer_public.data()) != 0) {
    throw std::runtime_error("key agreement produced a degenerate point");
  }
  Seed128 seed{};
  detail::blake2b(seed.data(), seed.size(), point.data(), point.size());
  return seed;
}

// Domain-separated per-round derivations from a long-lived pairwise seed.
inline Seed128 round_mask_seed(const Seed128& base, std::uint32_t round) {
  std::vector<std::uint8_t> in(base.begin(), base.end());
  put_u64le(in, round);
  in.push_back('M');
  Seed128 out{};
  detail::blake2b(out.data(), out.size(), in.data(), in.size());
  return out;
}

inline SymmetricKey round_cipher_key(const Seed128& base, std::uint32_t round) {
  std::vector<std::uint8_t> in(base.begin(), base.end());
  put_u64le(in, round);
  in.push_back('F');
  SymmetricKey out{};
  detail::blake2b(out.data(), out.size(), in.data(), in.size());
  return out;
}

// Deterministic expansion of a 128-bit seed into ring elements, via ChaCha20
// keyed by BLAKE2b(seed || 'E') with a zero nonce.
inline RingVector expand_mask(const Seed128& seed, std::size_t len) {
  ensure_sodium();
  std::vector<std::uint8_t> tagged(seed.begin(), seed.end());
  tagged.push_back('E');
  SymmetricKey key{};
  detail::blake2b(key.data(), key.size(), tagged.data(), tagged.size());

  std::vector<std::uint8_t> buf(len * 8);
  const std::array<std::uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
  if (!buf.empty() &&
      crypto_stream_chacha20(buf.data(), buf.size(), nonce.data(), key.data()) != 0) {
    throw std::runtime_error("crypto_stream_chacha20 failed");
  }
  RingVector out(len);
  for (std::size_t i = 0; i < len; ++i) out[i] = get_u64le(buf, i * 8);
  return out;
}

}  // namespace secfl::secagg
