#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/model.hpp"

namespace secfl {

// Per-client memory across rounds. `round` is the 1-based round currently
// being processed; the threshold is fixed at round 2 and never moves again.
struct InvarianceState {
  std::optional<ModelWeights> prev_weights;
  std::optional<double> threshold;
  std::set<std::size_t> prev_drop;   // global hidden-neuron indices
  std::vector<double> acc_gains;     // one entry per completed round
  int round = 0;
};

struct PruneDecision {
  std::set<std::size_t> to_drop;  // global hidden-neuron indices
  double submodel_fraction = 1.0;
  std::size_t slack_count = 0;
};

// Relative weight change; the epsilon keeps never-trained zero weights from
// ever counting as invariant.
inline double invariance(double w_prev, double w_cur) {
  return std::abs(w_cur - w_prev) / (std::abs(w_prev) + 1e-8);
}

// Mean invariance over each hidden neuron's owned weights (incoming row,
// bias, outgoing column), indexed by global hidden-neuron id.
inline std::vector<double> neuron_invariance(const InvarianceState& state,
                                             const ModelWeights& cur) {
  if (!state.prev_weights.has_value()) {
    throw std::invalid_argument("invariance: no previous weights recorded");
  }
  const ModelWeights& prev = *state.prev_weights;
  if (prev.shapes() != cur.shapes()) {
    throw std::invalid_argument("invariance: shape mismatch");
  }
  const auto prev_flat = prev.flat();
  const auto cur_flat = cur.flat();
  const auto& shapes = cur.shapes();

  std::vector<double> out;
  out.reserve(hidden_neuron_count(shapes));
  for (std::size_t h = 0; h + 1 < shapes.size(); ++h) {
    for (std::size_t j = 0; j < shapes[h].outputs; ++j) {
      double sum = 0.0;
      const auto positions = owned_positions(shapes, h, j);
      for (std::size_t p : positions) sum += invariance(prev_flat[p], cur_flat[p]);
      out.push_back(sum / static_cast<double>(positions.size()));
    }
  }
  return out;
}

// Freezes the invariance threshold as the mean neuron invariance, exactly
// once, at round 2.
inline double init_threshold(InvarianceState& state, const ModelWeights& cur) {
  if (state.round != 2) {
    throw std::invalid_argument("threshold: may only be initialized at round 2");
  }
  if (state.threshold.has_value()) {
    throw std::invalid_argument("threshold: already initialized");
  }
  const auto inv = neuron_invariance(state, cur);
  if (inv.empty()) throw std::invalid_argument("threshold: no prunable neurons");
  double sum = 0.0;
  for (double v : inv) sum += v;
  state.threshold = sum / static_cast<double>(inv.size());
  return *state.threshold;
}

namespace detail {

inline std::size_t drop_target(std::size_t n_prunable, double submodel_fraction) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(n_prunable) * (1.0 - submodel_fraction)));
}

// k uniform picks from `candidates` (ascending order in, selection order out).
inline std::vector<std::size_t> sample_from(const std::vector<std::size_t>& candidates,
                                            std::size_t k, Rng& rng) {
  auto idx = rng.sample_indices(candidates.size(), k);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(candidates[i]);
  return out;
}

}  // namespace detail

// Deterministic share of slack picks taken from prev_drop:
// clamp(cur/bench, 0, 1) with bench the mean of the first five accuracy
// gains and cur the mean of the last five. Shrinks as gains flatten out.
inline double slack_deterministic_share(const InvarianceState& state) {
  if (state.acc_gains.size() < 5) {
    throw std::invalid_argument("slack: need 5 completed rounds of accuracy gains");
  }
  double bench = 0.0, cur = 0.0;
  for (std::size_t i = 0; i < 5; ++i) bench += state.acc_gains[i];
  for (std::size_t i = state.acc_gains.size() - 5; i < state.acc_gains.size(); ++i) {
    cur += state.acc_gains[i];
  }
  bench /= 5.0;
  cur /= 5.0;
  // bench == 0 with cur == 0 reads as "no change": fully deterministic
  const double ratio = (bench == 0.0) ? (cur == 0.0 ? 1.0 : (cur > 0.0 ? 2.0 : -1.0))
                                      : cur / bench;
  return std::clamp(ratio, 0.0, 1.0);
}

// Adaptive slack selection: early rounds pick uniformly; later rounds split
// between previously dropped neurons (stability) and fresh random ones in
// the deterministic share above.
inline std::set<std::size_t> select_slack(const InvarianceState& state, std::size_t n,
                                          std::size_t slack_count,
                                          const std::set<std::size_t>& exclude,
                                          std::uint64_t seed) {
  std::vector<std::size_t> universe;
  for (std::size_t j = 0; j < n; ++j) {
    if (!exclude.count(j)) universe.push_back(j);
  }
  if (slack_count > universe.size()) {
    throw std::invalid_argument("slack: request exceeds available neurons");
  }

  Rng rng(derive_seed(seed, {0x51ac}));
  std::set<std::size_t> slack;

  if (state.round > 5) {
    const double det_pct = slack_deterministic_share(state);

    std::vector<std::size_t> prev_pool;
    for (std::size_t j : state.prev_drop) {
      if (!exclude.count(j)) prev_pool.push_back(j);
    }
    std::size_t from_prev = static_cast<std::size_t>(
        std::llround(static_cast<double>(slack_count) * det_pct));
    from_prev = std::min(from_prev, prev_pool.size());  // fall back to random
    for (std::size_t j : detail::sample_from(prev_pool, from_prev, rng)) {
      slack.insert(j);
    }
    std::vector<std::size_t> rest;
    for (std::size_t j : universe) {
      if (!slack.count(j)) rest.push_back(j);
    }
    for (std::size_t j : detail::sample_from(rest, slack_count - slack.size(), rng)) {
      slack.insert(j);
    }
  } else {
    for (std::size_t j : detail::sample_from(universe, slack_count, rng)) {
      slack.insert(j);
    }
  }
  return slack;
}

// Invariant neuron selection. Candidates are the neurons whose invariance
// sits at or below the frozen threshold; slack neurons fill any shortfall.
// Reads only this client's copies of the global model.
inline PruneDecision select_invariant(InvarianceState& state, const ModelWeights& cur,
                                      double submodel_fraction, double floor,
                                      std::uint64_t seed) {
  if (state.round <= 2) {
    throw std::invalid_argument("select: pruning starts after two warm-up rounds");
  }
  if (!state.threshold.has_value()) {
    throw std::invalid_argument("select: threshold not initialized");
  }
  if (!(submodel_fraction > 0.0) || submodel_fraction > 1.0) {
    throw std::invalid_argument("select: submodel fraction must be in (0, 1]");
  }
  if (submodel_fraction < floor) {
    throw std::invalid_argument("select: submodel fraction below configured floor");
  }

  const std::size_t n = hidden_neuron_count(cur.shapes());
  const std::size_t target = detail::drop_target(n, submodel_fraction);

  PruneDecision d;
  d.submodel_fraction = submodel_fraction;
  if (target == 0) {
    state.prev_drop.clear();
    return d;
  }

  const auto inv = neuron_invariance(state, cur);
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < n; ++j) {
    if (inv[j] <= *state.threshold) candidates.push_back(j);
  }

  Rng rng(derive_seed(seed, {0x1e00}));
  if (candidates.size() >= target) {
    for (std::size_t j : detail::sample_from(candidates, target, rng)) {
      d.to_drop.insert(j);
    }
  } else {
    d.to_drop.insert(candidates.begin(), candidates.end());
    d.slack_count = target - candidates.size();
    const std::set<std::size_t> exclude(candidates.begin(), candidates.end());
    for (std::size_t j : select_slack(state, n, d.slack_count, exclude, seed)) {
      d.to_drop.insert(j);
    }
  }
  state.prev_drop = d.to_drop;
  return d;
}

// Baseline: uniform neuron choice.
inline PruneDecision random_dropout(std::size_t n, double submodel_fraction,
                                    std::uint64_t seed) {
  if (!(submodel_fraction > 0.0) || submodel_fraction > 1.0) {
    throw std::invalid_argument("dropout: submodel fraction must be in (0, 1]");
  }
  PruneDecision d;
  d.submodel_fraction = submodel_fraction;
  Rng rng(derive_seed(seed, {0xd0b0}));
  for (std::size_t j : rng.sample_indices(n, detail::drop_target(n, submodel_fraction))) {
    d.to_drop.insert(j);
  }
  return d;
}

// Baseline: drop from the tail of each prunable layer, apportioning the
// global target across layers by largest remainder so the total always
// equals round(N * (1 - p)).
inline PruneDecision ordered_dropout(const std::vector<std::size_t>& layer_sizes,
                                     double submodel_fraction) {
  if (!(submodel_fraction > 0.0) || submodel_fraction > 1.0) {
    throw std::invalid_argument("dropout: submodel fraction must be in (0, 1]");
  }
  std::size_t n = 0;
  for (std::size_t s : layer_sizes) n += s;
  const std::size_t target = detail::drop_target(n, submodel_fraction);

  PruneDecision d;
  d.submodel_fraction = submodel_fraction;
  if (target == 0) return d;

  const double q = 1.0 - submodel_fraction;
  std::vector<std::size_t> per_layer(layer_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;  // (-frac, layer)
  std::size_t assigned = 0;
  for (std::size_t h = 0; h < layer_sizes.size(); ++h) {
    const double exact = static_cast<double>(layer_sizes[h]) * q;
    per_layer[h] = static_cast<std::size_t>(std::floor(exact));
    per_layer[h] = std::min(per_layer[h], layer_sizes[h]);
    assigned += per_layer[h];
    remainders.push_back({-(exact - std::floor(exact)), h});
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    const std::size_t h = remainders[i].second;
    if (per_layer[h] < layer_sizes[h]) {
      ++per_layer[h];
      ++assigned;
    }
  }
  if (assigned != target) {
    throw std::invalid_argument("dropout: cannot apportion drop target");
  }

  std::size_t base = 0;
  for (std::size_t h = 0; h < layer_sizes.size(); ++h) {
    for (std::size_t j = layer_sizes[h] - per_layer[h]; j < layer_sizes[h]; ++j) {
      d.to_drop.insert(base + j);
    }
    base += layer_sizes[h];
  }
  return d;
}

}  // namespace secfl
