#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "secfl/pruning.hpp"

namespace secfl {

struct ClientProfile {
  double cpu_hz = 3e9;
  double up_bps = 17e6;
  double down_bps = 155e6;
  bool is_straggler_ground_truth = false;  // experiment labeling only

  void validate() const {
    if (!(cpu_hz > 0) || !(up_bps > 0) || !(down_bps > 0)) {
      throw std::invalid_argument("profile: rates must be positive");
    }
  }
};

struct CostModel {
  double flops_full = 1.5e8;       // one unpruned local fit
  double cycles_per_flop = 1.0;
  std::size_t bytes_per_update = 0;  // fixed masked-update message size
  double setup_s = 0.002;
  double mask_s = 0.001;
  double unmask_s = 0.002;
};

// Linear cost model: training cost scales with the active fraction.
inline double fit_duration(const ClientProfile& profile, double submodel_fraction,
                           const CostModel& cost) {
  if (!(submodel_fraction > 0.0) || submodel_fraction > 1.0) {
    throw std::invalid_argument("timing: submodel fraction must be in (0, 1]");
  }
  return cost.flops_full * submodel_fraction * cost.cycles_per_flop / profile.cpu_hz;
}

inline double comm_duration(double bytes, double bps) {
  if (bytes < 0 || !(bps > 0)) throw std::invalid_argument("timing: bad comm inputs");
  return bytes * 8.0 / bps;
}

// All simulated times live on a 1 ms grid, which keeps max-comparisons free
// of floating-point order sensitivity.
inline std::int64_t to_ticks(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * 1000.0));
}

inline double from_ticks(std::int64_t ticks) {
  return static_cast<double>(ticks) / 1000.0;
}

struct ClientTimeline {
  std::int64_t fit_start = 0;  // ticks
  std::int64_t fit_end = 0;
  std::int64_t upload_start = 0;
  std::int64_t upload_end = 0;
  std::int64_t download_start = 0;
  std::int64_t download_end = 0;
};

struct RoundTimeline {
  std::vector<ClientTimeline> clients;
  std::int64_t setup_ticks = 0;
  std::int64_t mask_ticks = 0;
  std::int64_t unmask_start = 0;
  std::int64_t unmask_end = 0;
  std::int64_t round_ticks = 0;

  double round_time_s() const { return from_ticks(round_ticks); }
  double fit_duration_s(std::size_t u) const {
    return from_ticks(clients[u].fit_end - clients[u].fit_start);
  }
  double upload_duration_s(std::size_t u) const {
    return from_ticks(clients[u].upload_end - clients[u].upload_start);
  }
  double download_duration_s(std::size_t u) const {
    return from_ticks(clients[u].download_end - clients[u].download_start);
  }
};

// One synchronous round: every client starts fitting after setup, masks, and
// uploads immediately after; the server unmasks once the last upload lands
// and then everyone downloads the fixed-size aggregate.
inline RoundTimeline simulate_round(std::span<const ClientProfile> profiles,
                                    std::span<const double> submodel_fractions,
                                    const CostModel& cost) {
  if (profiles.size() != submodel_fractions.size()) {
    throw std::invalid_argument("timing: one decision per client required");
  }
  if (profiles.empty()) throw std::invalid_argument("timing: no clients");
  if (cost.bytes_per_update == 0) {
    throw std::invalid_argument("timing: bytes_per_update unset");
  }

  RoundTimeline t;
  t.setup_ticks = to_ticks(cost.setup_s);
  t.mask_ticks = to_ticks(cost.mask_s);
  t.clients.resize(profiles.size());
  const double bytes = static_cast<double>(cost.bytes_per_update);

  std::int64_t last_upload = 0;
  for (std::size_t u = 0; u < profiles.size(); ++u) {
    profiles[u].validate();
    auto& c = t.clients[u];
    c.fit_start = t.setup_ticks;
    c.fit_end = c.fit_start + to_ticks(fit_duration(profiles[u], submodel_fractions[u], cost));
    c.upload_start = c.fit_end + t.mask_ticks;
    c.upload_end = c.upload_start + to_ticks(comm_duration(bytes, profiles[u].up_bps));
    last_upload = std::max(last_upload, c.upload_end);
  }
  t.unmask_start = last_upload;
  t.unmask_end = t.unmask_start + to_ticks(cost.unmask_s);

  std::int64_t last_download = 0;
  for (std::size_t u = 0; u < profiles.size(); ++u) {
    auto& c = t.clients[u];
    c.download_start = t.unmask_end;
    c.download_end = c.download_start + to_ticks(comm_duration(bytes, profiles[u].down_bps));
    last_download = std::max(last_download, c.download_end);
  }
  t.round_ticks = last_download;
  return t;
}

inline RoundTimeline simulate_round(std::span<const ClientProfile> profiles,
                                    std::span<const PruneDecision> decisions,
                                    const CostModel& cost) {
  std::vector<double> fractions(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    fractions[i] = decisions[i].submodel_fraction;
  }
  return simulate_round(profiles, fractions, cost);
}

// Critical-path decomposition; the six components sum to round_time exactly.
struct PhaseBreakdown {
  double setup_s = 0;
  double fit_s = 0;
  double mask_s = 0;
  double upload_s = 0;
  double unmask_s = 0;
  double download_s = 0;
  std::size_t upload_critical_client = 0;
  std::size_t download_critical_client = 0;

  double total_s() const {
    return setup_s + fit_s + mask_s + upload_s + unmask_s + download_s;
  }
};

inline PhaseBreakdown phase_breakdown(const RoundTimeline& t) {
  if (t.clients.empty()) throw std::invalid_argument("timing: empty timeline");
  std::size_t cu = 0, cd = 0;
  for (std::size_t u = 1; u < t.clients.size(); ++u) {
    if (t.clients[u].upload_end > t.clients[cu].upload_end) cu = u;
    if (t.clients[u].download_end - t.clients[u].download_start >
        t.clients[cd].download_end - t.clients[cd].download_start) {
      cd = u;
    }
  }
  PhaseBreakdown b;
  b.setup_s = from_ticks(t.setup_ticks);
  b.fit_s = t.fit_duration_s(cu);
  b.mask_s = from_ticks(t.mask_ticks);
  b.upload_s = t.upload_duration_s(cu);
  b.unmask_s = from_ticks(t.unmask_end - t.unmask_start);
  b.download_s = t.download_duration_s(cd);
  b.upload_critical_client = cu;
  b.download_critical_client = cd;
  return b;
}

}  // namespace secfl
