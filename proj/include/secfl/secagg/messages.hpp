#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/secagg/keys.hpp"
#include "secfl/secagg/ring.hpp"
#include "secfl/secagg/shamir.hpp"

namespace secfl::secagg {

// Wire format, little-endian throughout:
//   u32 payload_len | u32 round | u16 sender | u16 recipient | u8 kind | payload
// sender/recipient are client ids; kServerId marks the server and
// kBroadcastId a fan-out to every client. Payloads per kind:
//   public_key    32B X25519 public key
//   seed_share    u16 owner | u8 share kind | u32 x | 32B y (LE, zero padded)
//   masked_update u64 ring element * len
//   fit_time      24B secretbox (16B MAC + 8B LE double), nonce derived
//   net_time      per client: u64 bits of upload_s | u64 bits of download_s
//   global_model  f64 accuracy | f64 weight * total_len
struct Message {
  std::uint32_t round = 0;
  std::uint16_t sender = 0;
  std::uint16_t recipient = 0;
  std::uint8_t kind = 0;
  std::vector<std::uint8_t> payload;
};

constexpr std::uint16_t kServerId = 0xffff;
constexpr std::uint16_t kBroadcastId = 0xfffe;

constexpr std::uint8_t kMsgPublicKey = 1;
constexpr std::uint8_t kMsgSeedShare = 2;
constexpr std::uint8_t kMsgMaskedUpdate = 3;
constexpr std::uint8_t kMsgFitTime = 4;
constexpr std::uint8_t kMsgNetTime = 5;
constexpr std::uint8_t kMsgGlobalModel = 6;

constexpr std::size_t kMessageHeaderBytes = 4 + 4 + 2 + 2 + 1;

inline std::size_t masked_update_message_bytes(std::size_t vector_len) {
  return kMessageHeaderBytes + 8 * vector_len;
}

inline void encode_message(const Message& m, std::vector<std::uint8_t>& out) {
  put_u32le(out, static_cast<std::uint32_t>(m.payload.size()));
  put_u32le(out, m.round);
  put_u16le(out, m.sender);
  put_u16le(out, m.recipient);
  out.push_back(m.kind);
  out.insert(out.end(), m.payload.begin(), m.payload.end());
}

inline Message decode_message(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + kMessageHeaderBytes > in.size()) {
    throw std::invalid_argument("message: truncated header");
  }
  Message m;
  const std::size_t len = get_u32le(in, pos);
  m.round = get_u32le(in, pos + 4);
  m.sender = get_u16le(in, pos + 8);
  m.recipient = get_u16le(in, pos + 10);
  m.kind = in[pos + 12];
  pos += kMessageHeaderBytes;
  if (pos + len > in.size()) throw std::invalid_argument("message: truncated payload");
  m.payload.assign(in.begin() + static_cast<std::ptrdiff_t>(pos),
                   in.begin() + static_cast<std::ptrdiff_t>(pos + len));
  pos += len;
  return m;
}

// Everything that flows through the server, in arrival order. Byte-stable
// across runs with the same seed.
class Transcript {
 public:
  void append(const Message& m) {
    encode_message(m, bytes_);
    ++count_;
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t message_count() const { return count_; }

  std::vector<Message> messages() const {
    std::vector<Message> out;
    std::size_t pos = 0;
    while (pos < bytes_.size()) out.push_back(decode_message(bytes_, pos));
    return out;
  }

  bool contains(std::span<const std::uint8_t> pattern) const {
    if (pattern.empty() || pattern.size() > bytes_.size()) return false;
    for (std::size_t i = 0; i + pattern.size() <= bytes_.size(); ++i) {
      bool hit = true;
      for (std::size_t j = 0; j < pattern.size(); ++j) {
        if (bytes_[i + j] != pattern[j]) {
          hit = false;
          break;
        }
      }
      if (hit) return true;
    }
    return false;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t count_ = 0;
};

// ---- payload builders/parsers ----

inline Message make_public_key_message(std::uint16_t sender, const PublicKey& pk) {
  Message m{0, sender, kServerId, kMsgPublicKey, {}};
  m.payload.assign(pk.begin(), pk.end());
  return m;
}

inline PublicKey parse_public_key(const Message& m) {
  if (m.kind != kMsgPublicKey || m.payload.size() != 32) {
    throw std::invalid_argument("message: bad public key payload");
  }
  PublicKey pk{};
  std::copy(m.payload.begin(), m.payload.end(), pk.begin());
  return pk;
}

inline Message make_share_message(std::uint32_t round, std::uint16_t sender,
                                  std::uint16_t recipient, const SeedShare& s) {
  Message m{round, sender, recipient, kMsgSeedShare, {}};
  put_u16le(m.payload, s.owner);
  m.payload.push_back(static_cast<std::uint8_t>(s.kind));
  put_u32le(m.payload, static_cast<std::uint32_t>(s.x));
  std::array<std::uint8_t, 32> y{};
  mpz_class rest = s.y;
  if (rest < 0 || rest >= (mpz_class(1) << 256)) {
    throw std::invalid_argument("message: share element out of range");
  }
  for (std::size_t i = 0; i < y.size() && rest != 0; ++i) {
    y[i] = static_cast<std::uint8_t>(mpz_class(rest & 0xff).get_ui());
    rest >>= 8;
  }
  m.payload.insert(m.payload.end(), y.begin(), y.end());
  return m;
}

inline SeedShare parse_share(const Message& m) {
  if (m.kind != kMsgSeedShare || m.payload.size() != 2 + 1 + 4 + 32) {
    throw std::invalid_argument("message: bad share payload");
  }
  SeedShare s;
  s.owner = get_u16le(m.payload, 0);
  s.kind = static_cast<ShareKind>(m.payload[2]);
  s.x = get_u32le(m.payload, 3);
  s.y = 0;
  for (std::size_t i = 32; i-- > 0;) {
    s.y <<= 8;
    s.y += m.payload[7 + i];
  }
  return s;
}

inline Message make_masked_update_message(std::uint32_t round, std::uint16_t sender,
                                          const RingVector& v) {
  Message m{round, sender, kServerId, kMsgMaskedUpdate, {}};
  m.payload.reserve(v.size() * 8);
  for (std::uint64_t e : v) put_u64le(m.payload, e);
  return m;
}

inline RingVector parse_masked_update(const Message& m) {
  if (m.kind != kMsgMaskedUpdate || m.payload.size() % 8 != 0) {
    throw std::invalid_argument("message: bad masked update payload");
  }
  RingVector v(m.payload.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = get_u64le(m.payload, i * 8);
  return v;
}

}  // namespace secfl::secagg
