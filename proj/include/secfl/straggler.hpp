#pragma once

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/secagg/keys.hpp"
#include "secfl/secagg/messages.hpp"

namespace secfl {

// What a client knows after the fit-time broadcast and the server's network
// report: everyone's fit times (full-model equivalents) plus the
// server-measured upload/download durations. Ranking and sizing are derived
// from these.
struct StragglerContext {
  std::uint16_t client = 0;
  double percentile = 0.20;
  std::vector<double> fit_times;
  std::vector<double> upload_times;    // empty until the server's report arrives
  std::vector<double> download_times;  // informational

  std::size_t n() const { return fit_times.size(); }

  // M = ceil(percentile * n); the 1e-9 slack absorbs binary representation
  // noise like 0.2 * 10 = 2.0000000000000004.
  std::size_t straggler_count() const {
    return static_cast<std::size_t>(
        std::ceil(percentile * static_cast<double>(n()) - 1e-9));
  }

  // True iff `id` ranks among the slowest M by (fit time, id); on ties the
  // lower id wins the non-straggler slot.
  bool is_straggler(std::uint16_t id) const {
    const std::size_t m = straggler_count();
    if (m == 0) return false;
    std::size_t slower = 0;  // clients ranked strictly after `id`
    for (std::size_t v = 0; v < n(); ++v) {
      if (v == id) continue;
      if (fit_times[v] > fit_times[id] ||
          (fit_times[v] == fit_times[id] && v > id)) {
        ++slower;
      }
    }
    return slower < m;  // id is among the last m in the ordering
  }

  double own_fit() const { return fit_times.at(client); }

  // T: fit time of the slowest non-straggler.
  double slowest_nonstraggler_fit() const {
    double t = 0.0;
    bool found = false;
    for (std::size_t v = 0; v < n(); ++v) {
      if (is_straggler(static_cast<std::uint16_t>(v))) continue;
      t = std::max(t, fit_times[v]);
      found = true;
    }
    if (!found) throw std::logic_error("straggler: every client is a straggler");
    return t;
  }

  // max over non-stragglers of (fit + upload); the completion time a
  // network-aware straggler aims to match.
  double target_completion() const {
    if (upload_times.size() != n()) {
      throw std::invalid_argument("straggler: network report missing");
    }
    double t = 0.0;
    bool found = false;
    for (std::size_t v = 0; v < n(); ++v) {
      if (is_straggler(static_cast<std::uint16_t>(v))) continue;
      t = std::max(t, fit_times[v] + upload_times[v]);
      found = true;
    }
    if (!found) throw std::logic_error("straggler: every client is a straggler");
    return t;
  }
};

inline bool self_identify(const StragglerContext& ctx) {
  if (ctx.fit_times.empty()) throw std::invalid_argument("straggler: no fit times");
  return ctx.is_straggler(ctx.client);
}

// p = clamp(fit_ns / fit_k, floor, 1): equalizes the straggler's fit with the
// slowest non-straggler under the linear cost model.
inline double submodel_fraction_compute(double fit_k, double fit_ns, double floor) {
  if (!(fit_k > 0.0) || !(fit_ns > 0.0)) {
    throw std::invalid_argument("submodel: fit times must be positive");
  }
  if (!(floor > 0.0) || floor > 1.0) {
    throw std::invalid_argument("submodel: floor must be in (0, 1]");
  }
  return std::clamp(fit_ns / fit_k, floor, 1.0);
}

// p = clamp((target - upload_k) / fit_full_k, floor, 1): over-prunes so that
// fit plus the fixed-size upload finishes by target_completion.
inline double submodel_fraction_network(double fit_full_k, double upload_k,
                                        double target_completion, double floor) {
  if (!(fit_full_k > 0.0) || !(upload_k > 0.0) || !(target_completion > 0.0)) {
    throw std::invalid_argument("submodel: inputs must be positive");
  }
  if (!(floor > 0.0) || floor > 1.0) {
    throw std::invalid_argument("submodel: floor must be in (0, 1]");
  }
  return std::clamp((target_completion - upload_k) / fit_full_k, floor, 1.0);
}

namespace detail {

inline std::array<std::uint8_t, crypto_secretbox_NONCEBYTES> fit_nonce(
    std::uint32_t round, std::uint16_t sender, std::uint16_t recipient) {
  std::array<std::uint8_t, crypto_secretbox_NONCEBYTES> nonce{};
  std::vector<std::uint8_t> tmp;
  put_u32le(tmp, round);
  put_u16le(tmp, sender);
  put_u16le(tmp, recipient);
  std::copy(tmp.begin(), tmp.end(), nonce.begin());
  return nonce;
}

}  // namespace detail

// One authenticated ciphertext of the sender's fit time per recipient, keyed
// by the pairwise seed for that pair and round.
inline secagg::Message make_fit_time_packet(std::uint32_t round, std::uint16_t sender,
                                            std::uint16_t recipient, double fit_time,
                                            const secagg::Seed128& pairwise_seed) {
  secagg::ensure_sodium();
  std::vector<std::uint8_t> plain;
  put_f64le(plain, fit_time);
  const auto key = secagg::round_cipher_key(pairwise_seed, round);
  const auto nonce = detail::fit_nonce(round, sender, recipient);
  std::vector<std::uint8_t> cipher(crypto_secretbox_MACBYTES + plain.size());
  if (crypto_secretbox_easy(cipher.data(), plain.data(), plain.size(), nonce.data(),
                            key.data()) != 0) {
    throw std::runtime_error("crypto_secretbox failed");
  }
  secagg::Message m{round, sender, recipient, secagg::kMsgFitTime, std::move(cipher)};
  return m;
}

inline double open_fit_time_packet(const secagg::Message& m,
                                   const secagg::Seed128& pairwise_seed) {
  secagg::ensure_sodium();
  if (m.kind != secagg::kMsgFitTime ||
      m.payload.size() != crypto_secretbox_MACBYTES + 8) {
    throw std::invalid_argument("fit packet: bad payload size");
  }
  const auto key = secagg::round_cipher_key(pairwise_seed, m.round);
  const auto nonce = detail::fit_nonce(m.round, m.sender, m.recipient);
  std::vector<std::uint8_t> plain(8);
  if (crypto_secretbox_open_easy(plain.data(), m.payload.data(), m.payload.size(),
                                 nonce.data(), key.data()) != 0) {
    throw IntegrityError("fit packet: authentication failed");
  }
  return get_f64le(plain, 0);
}

// Runs the whole broadcast: every client encrypts its time for every other
// client, the relay (server role) forwards ciphertexts and appends them to
// the transcript, recipients decrypt. Returns one complete context per
// client. pairwise_seeds[u][v] must hold the (u,v) base seed for u != v.
inline std::vector<StragglerContext> broadcast_fit_times(
    const std::vector<double>& times,
    const std::vector<std::map<std::uint16_t, secagg::Seed128>>& pairwise_seeds,
    std::uint32_t round, double percentile, secagg::Transcript& relay) {
  const std::size_t n = times.size();
  if (pairwise_seeds.size() != n) {
    throw std::invalid_argument("broadcast: seed table size mismatch");
  }

  std::vector<StragglerContext> contexts(n);
  for (std::size_t u = 0; u < n; ++u) {
    contexts[u].client = static_cast<std::uint16_t>(u);
    contexts[u].percentile = percentile;
    contexts[u].fit_times.assign(n, 0.0);
    contexts[u].fit_times[u] = times[u];
  }

  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      auto it = pairwise_seeds[u].find(static_cast<std::uint16_t>(v));
      if (it == pairwise_seeds[u].end()) {
        throw std::invalid_argument("broadcast: missing pairwise seed");
      }
      const auto msg = make_fit_time_packet(round, static_cast<std::uint16_t>(u),
                                            static_cast<std::uint16_t>(v), times[u],
                                            it->second);
      relay.append(msg);  // the server only ever sees the ciphertext
      const auto& seed_vu = pairwise_seeds[v].at(static_cast<std::uint16_t>(u));
      contexts[v].fit_times[u] = open_fit_time_packet(msg, seed_vu);
    }
  }
  return contexts;
}

}  // namespace secfl
