#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/secagg/graph.hpp"
#include "secfl/secagg/keys.hpp"
#include "secfl/secagg/ring.hpp"
#include "secfl/secagg/shamir.hpp"

namespace secfl::secagg {

struct MaskedUpdate {
  std::uint16_t client = 0;
  RingVector vector;
};

// masked = quantized + PRG(self_seed) + sum over neighbors v of
// sign(u,v) * PRG(seed_uv), sign positive iff u < v. The pairwise terms
// cancel edge-wise when both endpoints report.
inline MaskedUpdate mask_update(const RingVector& quantized, std::uint16_t client,
                                const CommGraph& graph,
                                const std::map<std::uint16_t, Seed128>& neighbor_seeds,
                                const Seed128& self_seed) {
  MaskedUpdate out;
  out.client = client;
  out.vector = quantized;
  add_in_place(out.vector, expand_mask(self_seed, quantized.size()));
  for (std::uint16_t v : graph.neighbors(client)) {
    auto it = neighbor_seeds.find(v);
    if (it == neighbor_seeds.end()) {
      throw std::invalid_argument("mask: missing seed for neighbor " + std::to_string(v));
    }
    const RingVector m = expand_mask(it->second, quantized.size());
    if (client < v) {
      add_in_place(out.vector, m);
    } else {
      sub_in_place(out.vector, m);
    }
  }
  return out;
}

// Server-side unmasking. Needs >= t shares of every survivor's self seed and
// of every dropped client's key seed; dropped clients' pairwise masks are
// recomputed from their reconstructed key seeds and the public keys.
// `round` must match the round whose per-round pairwise seeds were used.
inline RingVector unmask_aggregate(const std::vector<MaskedUpdate>& masked,
                                   const std::set<std::uint16_t>& survivors,
                                   const std::set<std::uint16_t>& dropped,
                                   const std::vector<SeedShare>& shares,
                                   const CommGraph& graph, const RingParams& params,
                                   const std::vector<PublicKey>& public_keys,
                                   std::uint32_t round, std::size_t threshold,
                                   const PrimeField& field) {
  (void)params;
  for (std::uint16_t u : survivors) {
    if (dropped.count(u)) {
      throw std::invalid_argument("unmask: client both survivor and dropped");
    }
  }

  std::size_t len = 0;
  std::size_t counted = 0;
  RingVector acc;
  for (const auto& mu : masked) {
    if (!survivors.count(mu.client)) continue;
    if (acc.empty()) {
      len = mu.vector.size();
      acc.assign(len, 0);
    }
    add_in_place(acc, mu.vector);
    ++counted;
  }
  if (counted != survivors.size()) {
    throw std::invalid_argument("unmask: missing masked update for a survivor");
  }

  auto collect = [&](std::uint16_t owner, ShareKind kind) {
    std::vector<SeedShare> own;
    for (const auto& s : shares) {
      if (s.owner == owner && s.kind == kind) own.push_back(s);
    }
    if (own.size() < threshold) {
      throw ProtocolAbort("unmask: fewer than t shares for client " +
                          std::to_string(owner) + "; round aborted");
    }
    return field_to_seed(reconstruct_secret(own, threshold, field));
  };

  // remove survivors' self masks
  for (std::uint16_t u : survivors) {
    sub_in_place(acc, expand_mask(collect(u, ShareKind::self_seed), len));
  }

  // remove residual pairwise masks left by dropped neighbors
  for (std::uint16_t d : dropped) {
    const ClientKeys keys = derive_client_keys(collect(d, ShareKind::secret_key));
    for (std::uint16_t v : graph.neighbors(d)) {
      if (!survivors.count(v)) continue;
      const Seed128 base = agree_pairwise(keys.secret, public_keys.at(v));
      const RingVector m = expand_mask(round_mask_seed(base, round), len);
      // survivor v added sign(v, d) * m; cancel it
      if (v < d) {
        sub_in_place(acc, m);
      } else {
        add_in_place(acc, m);
      }
    }
  }
  return acc;
}

}  // namespace secfl::secagg
