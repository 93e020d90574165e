#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "secfl/common.hpp"

namespace secfl {

struct LayerShape {
  std::size_t inputs = 0;
  std::size_t outputs = 0;

  std::size_t weight_count() const { return inputs * outputs; }
  std::size_t param_count() const { return inputs * outputs + outputs; }

  bool operator==(const LayerShape&) const = default;
};

inline void validate_shapes(std::span<const LayerShape> shapes) {
  if (shapes.empty()) throw std::invalid_argument("model: no layers");
  for (const auto& s : shapes) {
    if (s.inputs < 1 || s.outputs < 1) {
      throw std::invalid_argument("model: layer dimensions must be >= 1");
    }
  }
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
    if (shapes[l].outputs != shapes[l + 1].inputs) {
      throw std::invalid_argument(
          "model: layer " + std::to_string(l) + " outputs " +
          std::to_string(shapes[l].outputs) + " != layer " +
          std::to_string(l + 1) + " inputs " + std::to_string(shapes[l + 1].inputs));
    }
  }
}

// Hidden layers are the outputs of every layer except the last; input
// features and output classes are never prunable.
inline std::size_t hidden_layer_count(std::span<const LayerShape> shapes) {
  return shapes.empty() ? 0 : shapes.size() - 1;
}

inline std::size_t hidden_neuron_count(std::span<const LayerShape> shapes) {
  std::size_t n = 0;
  for (std::size_t h = 0; h + 1 < shapes.size(); ++h) n += shapes[h].outputs;
  return n;
}

// Per-layer flat layout: weights row-major [inputs x outputs], then biases.
// The whole model is one flat vector; layers are spans into it.
class ModelWeights {
 public:
  ModelWeights() = default;

  explicit ModelWeights(std::vector<LayerShape> shapes) : shapes_(std::move(shapes)) {
    validate_shapes(shapes_);
    offsets_.resize(shapes_.size() + 1, 0);
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
      offsets_[l + 1] = offsets_[l] + shapes_[l].param_count();
    }
    values_.assign(offsets_.back(), 0.0);
  }

  static ModelWeights unflatten(std::vector<LayerShape> shapes,
                                std::span<const double> flat) {
    ModelWeights m(std::move(shapes));
    if (flat.size() != m.total_len()) {
      throw std::invalid_argument("model: flat vector length mismatch");
    }
    std::copy(flat.begin(), flat.end(), m.values_.begin());
    return m;
  }

  const std::vector<LayerShape>& shapes() const { return shapes_; }
  std::size_t layer_count() const { return shapes_.size(); }
  std::size_t total_len() const { return values_.size(); }
  std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

  std::span<double> layer(std::size_t l) {
    return {values_.data() + offsets_[l], shapes_[l].param_count()};
  }
  std::span<const double> layer(std::size_t l) const {
    return {values_.data() + offsets_[l], shapes_[l].param_count()};
  }

  // Weight from input i to output j of layer l.
  double& weight(std::size_t l, std::size_t i, std::size_t j) {
    return values_[offsets_[l] + i * shapes_[l].outputs + j];
  }
  double weight(std::size_t l, std::size_t i, std::size_t j) const {
    return values_[offsets_[l] + i * shapes_[l].outputs + j];
  }
  double& bias(std::size_t l, std::size_t j) {
    return values_[offsets_[l] + shapes_[l].weight_count() + j];
  }
  double bias(std::size_t l, std::size_t j) const {
    return values_[offsets_[l] + shapes_[l].weight_count() + j];
  }

  std::vector<double> flatten() const { return values_; }
  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }

  void add_flat(std::span<const double> delta, double scale = 1.0) {
    if (delta.size() != values_.size()) {
      throw std::invalid_argument("model: delta length mismatch");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * delta[i];
  }

 private:
  std::vector<LayerShape> shapes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

// Dropped hidden neurons, one set per hidden layer. Set h refers to the
// outputs of layer h (equivalently the inputs of layer h+1).
struct NeuronMask {
  std::vector<std::set<std::size_t>> dropped;

  static NeuronMask none(std::span<const LayerShape> shapes) {
    NeuronMask m;
    m.dropped.resize(hidden_layer_count(shapes));
    return m;
  }

  // Builds a mask from global hidden-neuron indices (layer 0's neurons first,
  // then layer 1's, ...).
  static NeuronMask from_global(std::span<const LayerShape> shapes,
                                const std::set<std::size_t>& global) {
    NeuronMask m = none(shapes);
    std::size_t base = 0, h = 0;
    auto it = global.begin();
    for (; h + 1 < shapes.size(); ++h) {
      const std::size_t width = shapes[h].outputs;
      while (it != global.end() && *it < base + width) {
        m.dropped[h].insert(*it - base);
        ++it;
      }
      base += width;
    }
    if (it != global.end()) {
      throw std::invalid_argument("mask: global neuron index out of range");
    }
    return m;
  }

  std::set<std::size_t> to_global(std::span<const LayerShape> shapes) const {
    std::set<std::size_t> global;
    std::size_t base = 0;
    for (std::size_t h = 0; h + 1 < shapes.size(); ++h) {
      for (std::size_t j : dropped[h]) global.insert(base + j);
      base += shapes[h].outputs;
    }
    return global;
  }

  std::size_t dropped_count() const {
    std::size_t n = 0;
    for (const auto& s : dropped) n += s.size();
    return n;
  }

  bool empty() const { return dropped_count() == 0; }
};

inline void validate_mask(const NeuronMask& mask, std::span<const LayerShape> shapes) {
  validate_shapes(shapes);
  if (mask.dropped.size() != hidden_layer_count(shapes)) {
    throw std::invalid_argument("mask: hidden layer count mismatch");
  }
  for (std::size_t h = 0; h < mask.dropped.size(); ++h) {
    const std::size_t width = shapes[h].outputs;
    for (std::size_t j : mask.dropped[h]) {
      if (j >= width) throw std::invalid_argument("mask: neuron index out of range");
    }
    if (mask.dropped[h].size() == width) {
      throw std::invalid_argument("mask: layer " + std::to_string(h) +
                                  " has no active neurons left");
    }
  }
}

// Weight update, flat, exactly the ModelWeights layout. Positions owned by
// dropped neurons are exactly zero.
struct WeightDelta {
  std::vector<double> values;
};

struct DatasetShard {
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major [size x n_features]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
};

// Flat positions owned by hidden neuron j of hidden layer h: its incoming
// weights, its bias, and its outgoing weights.
inline std::vector<std::size_t> owned_positions(std::span<const LayerShape> shapes,
                                                std::size_t hidden_layer,
                                                std::size_t neuron) {
  std::vector<std::size_t> pos;
  std::size_t off = 0;
  for (std::size_t l = 0; l < hidden_layer; ++l) off += shapes[l].param_count();
  const LayerShape& in_layer = shapes[hidden_layer];
  for (std::size_t i = 0; i < in_layer.inputs; ++i) {
    pos.push_back(off + i * in_layer.outputs + neuron);
  }
  pos.push_back(off + in_layer.weight_count() + neuron);  // bias
  const std::size_t next_off = off + in_layer.param_count();
  const LayerShape& out_layer = shapes[hidden_layer + 1];
  for (std::size_t k = 0; k < out_layer.outputs; ++k) {
    pos.push_back(next_off + neuron * out_layer.outputs + k);
  }
  return pos;
}

// Boolean exclusion map over the flat layout (1 = owned by a dropped neuron).
inline std::vector<std::uint8_t> excluded_positions(const NeuronMask& mask,
                                                    std::span<const LayerShape> shapes) {
  validate_mask(mask, shapes);
  std::size_t total = 0;
  for (const auto& s : shapes) total += s.param_count();
  std::vector<std::uint8_t> excluded(total, 0);
  for (std::size_t h = 0; h < mask.dropped.size(); ++h) {
    for (std::size_t j : mask.dropped[h]) {
      for (std::size_t p : owned_positions(shapes, h, j)) excluded[p] = 1;
    }
  }
  return excluded;
}

inline double active_fraction(const NeuronMask& mask,
                              std::span<const LayerShape> shapes) {
  const auto excluded = excluded_positions(mask, shapes);
  std::size_t active = 0;
  for (std::uint8_t e : excluded) active += (e == 0);
  return static_cast<double>(active) / static_cast<double>(excluded.size());
}

inline ModelWeights init_model(std::vector<LayerShape> shapes, std::uint64_t seed) {
  ModelWeights m(std::move(shapes));
  Rng rng(seed);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.shapes()[l].inputs));
    auto layer = m.layer(l);
    for (std::size_t w = 0; w < m.shapes()[l].weight_count(); ++w) {
      layer[w] = rng.uniform_real(-bound, bound);
    }
    // biases stay zero
  }
  return m;
}

namespace detail {

// Ascending active input/output index lists per layer; iteration always
// follows these so a masked network and the explicitly excised sub-network
// perform bitwise-identical arithmetic.
struct ActiveSets {
  std::vector<std::vector<std::size_t>> in;
  std::vector<std::vector<std::size_t>> out;
};

inline ActiveSets active_sets(std::span<const LayerShape> shapes, const NeuronMask& mask) {
  ActiveSets a;
  const std::size_t L = shapes.size();
  a.in.resize(L);
  a.out.resize(L);
  auto full = [](std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
  };
  auto complement = [](std::size_t n, const std::set<std::size_t>& drop) {
    std::vector<std::size_t> v;
    v.reserve(n - drop.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!drop.count(i)) v.push_back(i);
    }
    return v;
  };
  for (std::size_t l = 0; l < L; ++l) {
    a.in[l] = (l == 0) ? full(shapes[l].inputs) : a.out[l - 1];
    a.out[l] = (l + 1 == L) ? full(shapes[l].outputs)
                            : complement(shapes[l].outputs, mask.dropped[l]);
  }
  return a;
}

// Forward pass; activations[l] holds layer l's post-activation outputs at
// active positions (inactive positions stay 0 and are never read). The last
// layer holds raw logits.
inline void forward(const ModelWeights& m, const ActiveSets& act,
                    std::span<const double> x,
                    std::vector<std::vector<double>>& activations) {
  const std::size_t L = m.layer_count();
  activations.resize(L);
  std::span<const double> prev = x;
  for (std::size_t l = 0; l < L; ++l) {
    activations[l].assign(m.shapes()[l].outputs, 0.0);
    for (std::size_t j : act.out[l]) {
      double z = m.bias(l, j);
      for (std::size_t i : act.in[l]) z += prev[i] * m.weight(l, i, j);
      activations[l][j] = (l + 1 == L) ? z : std::max(0.0, z);
    }
    prev = activations[l];
  }
}

inline std::size_t argmax_lowest_tie(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

}  // namespace detail

// Local SGD on softmax cross-entropy; returns new_weights - input_weights.
// Dropped rows/columns are never read or written, so the delta is exactly
// zero there. Deterministic for a given seed (seeded epoch shuffles).
inline WeightDelta train_local(const ModelWeights& weights, const NeuronMask& mask,
                               const DatasetShard& shard, std::size_t epochs,
                               double lr, std::uint64_t seed,
                               std::size_t batch_size = 32) {
  validate_mask(mask, weights.shapes());
  if (shard.size() == 0) throw std::invalid_argument("train: empty shard");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (batch_size == 0) throw std::invalid_argument("train: zero batch size");
  if (shard.n_features != weights.shapes().front().inputs) {
    throw std::invalid_argument("train: feature width mismatch");
  }
  const std::size_t n_classes = weights.shapes().back().outputs;
  for (int y : shard.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw std::invalid_argument("train: label out of range");
    }
  }

  ModelWeights w = weights;
  const auto act = detail::active_sets(w.shapes(), mask);
  const std::size_t L = w.layer_count();

  Rng rng(seed);
  std::vector<std::size_t> order(shard.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> dz(L);
  std::vector<double> grad(w.total_len());

  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, order.size());
      const double batch_n = static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);

      for (std::size_t s = start; s < stop; ++s) {
        const std::size_t idx = order[s];
        const auto x = shard.row(idx);
        detail::forward(w, act, x, activations);

        // softmax + cross-entropy gradient on the logits
        auto& logits = activations[L - 1];
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double denom = 0.0;
        std::vector<double>& dlast = dz[L - 1];
        dlast.assign(logits.size(), 0.0);
        for (std::size_t j = 0; j < logits.size(); ++j) {
          dlast[j] = std::exp(logits[j] - mx);
          denom += dlast[j];
        }
        for (std::size_t j = 0; j < logits.size(); ++j) dlast[j] /= denom;
        dlast[static_cast<std::size_t>(shard.labels[idx])] -= 1.0;

        for (std::size_t l = L; l-- > 0;) {
          std::span<const double> below =
              (l == 0) ? x : std::span<const double>(activations[l - 1]);
          const std::size_t goff = w.layer_offset(l);
          const std::size_t outs = w.shapes()[l].outputs;
          const std::size_t wcount = w.shapes()[l].weight_count();
          if (l > 0) dz[l - 1].assign(w.shapes()[l - 1].outputs, 0.0);
          for (std::size_t j : act.out[l]) {
            const double d = dz[l][j];
            for (std::size_t i : act.in[l]) {
              grad[goff + i * outs + j] += below[i] * d;
              if (l > 0) dz[l - 1][i] += w.weight(l, i, j) * d;
            }
            grad[goff + wcount + j] += d;
          }
          if (l > 0) {
            for (std::size_t i : act.in[l]) {
              if (activations[l - 1][i] <= 0.0) dz[l - 1][i] = 0.0;
            }
          }
        }
      }

      // mean-gradient SGD step over active positions only
      const double step = lr / batch_n;
      auto flat = w.flat();
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t goff = w.layer_offset(l);
        const std::size_t outs = w.shapes()[l].outputs;
        const std::size_t wcount = w.shapes()[l].weight_count();
        for (std::size_t j : act.out[l]) {
          for (std::size_t i : act.in[l]) {
            flat[goff + i * outs + j] -= step * grad[goff + i * outs + j];
          }
          flat[goff + wcount + j] -= step * grad[goff + wcount + j];
        }
      }
    }
  }

  WeightDelta delta;
  delta.values.resize(w.total_len());
  const auto before = weights.flat();
  const auto after = w.flat();
  for (std::size_t i = 0; i < delta.values.size(); ++i) {
    delta.values[i] = after[i] - before[i];
  }
  return delta;
}

// Fraction of samples whose argmax matches the label; argmax ties go to the
// lowest class index. Evaluation always runs the full (unmasked) network.
inline double evaluate(const ModelWeights& weights, const DatasetShard& shard) {
  if (shard.size() == 0) throw std::invalid_argument("evaluate: empty shard");
  if (shard.n_features != weights.shapes().front().inputs) {
    throw std::invalid_argument("evaluate: feature width mismatch");
  }
  const NeuronMask empty = NeuronMask::none(weights.shapes());
  const auto act = detail::active_sets(weights.shapes(), empty);
  std::vector<std::vector<double>> activations;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < shard.size(); ++i) {
    detail::forward(weights, act, shard.row(i), activations);
    const std::size_t pred = detail::argmax_lowest_tie(activations.back());
    if (pred == static_cast<std::size_t>(shard.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(shard.size());
}

}  // namespace secfl
