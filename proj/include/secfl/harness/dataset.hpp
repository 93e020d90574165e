#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "secfl/common.hpp"
#include "secfl/model.hpp"

namespace secfl {

struct DatasetParams {
  std::size_t n_samples = 5000;
  std::size_t n_features = 8;
  std::size_t n_classes = 4;
  double sigma = 1.0;
  double center_scale = 3.0;
  double test_fraction = 0.2;
};

// Synthetic Gaussian-blob classification data: one class per blob, balanced
// labels, a held-out test shard reserved before the equal client partition.
struct Dataset {
  DatasetShard test;
  std::vector<DatasetShard> shards;
  std::vector<std::vector<std::size_t>> shard_sample_ids;  // original indices
  std::vector<std::size_t> test_sample_ids;
};

inline Dataset generate_dataset(const DatasetParams& params, std::size_t n_clients,
                                std::uint64_t seed) {
  if (params.n_classes < 2) throw std::invalid_argument("dataset: need >= 2 classes");
  if (params.n_features < 1) throw std::invalid_argument("dataset: need features");
  if (n_clients < 1) throw std::invalid_argument("dataset: need clients");
  if (!(params.sigma > 0) || !(params.center_scale > 0)) {
    throw std::invalid_argument("dataset: sigma and center_scale must be positive");
  }
  if (!(params.test_fraction > 0) || params.test_fraction >= 1) {
    throw std::invalid_argument("dataset: test fraction must be in (0, 1)");
  }

  Rng rng(derive_seed(seed, {0xda7a}));
  const std::size_t d = params.n_features;

  // class centers on a sphere of radius center_scale, rejected until they
  // keep at least that much distance from each other
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < params.n_classes; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) {
        throw std::runtime_error("dataset: could not separate class centers");
      }
      std::vector<double> v(d);
      double norm = 0.0;
      for (auto& x : v) {
        x = rng.gaussian();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm < 1e-9) continue;
      for (auto& x : v) x *= params.center_scale / norm;
      bool ok = true;
      for (const auto& other : centers) {
        double dist2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          dist2 += (v[i] - other[i]) * (v[i] - other[i]);
        }
        if (dist2 < params.center_scale * params.center_scale) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.push_back(std::move(v));
        break;
      }
    }
  }

  // balanced labels, Gaussian noise around the class center
  std::vector<double> features(params.n_samples * d);
  std::vector<int> labels(params.n_samples);
  for (std::size_t i = 0; i < params.n_samples; ++i) {
    const std::size_t c = i % params.n_classes;
    labels[i] = static_cast<int>(c);
    for (std::size_t f = 0; f < d; ++f) {
      features[i * d + f] = centers[c][f] + params.sigma * rng.gaussian();
    }
  }

  std::vector<std::size_t> order(params.n_samples);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const std::size_t n_test =
      static_cast<std::size_t>(params.test_fraction * static_cast<double>(params.n_samples));
  if (n_test == 0 || n_test >= params.n_samples) {
    throw std::invalid_argument("dataset: test split empty or total");
  }
  const std::size_t per_shard = (params.n_samples - n_test) / n_clients;
  if (per_shard == 0) throw std::invalid_argument("dataset: not enough samples per client");

  auto take = [&](std::size_t begin, std::size_t count, DatasetShard& shard,
                  std::vector<std::size_t>& ids) {
    shard.n_features = d;
    shard.features.reserve(count * d);
    shard.labels.reserve(count);
    for (std::size_t i = begin; i < begin + count; ++i) {
      const std::size_t s = order[i];
      ids.push_back(s);
      shard.labels.push_back(labels[s]);
      for (std::size_t f = 0; f < d; ++f) shard.features.push_back(features[s * d + f]);
    }
  };

  Dataset out;
  take(0, n_test, out.test, out.test_sample_ids);
  out.shards.resize(n_clients);
  out.shard_sample_ids.resize(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c) {
    take(n_test + c * per_shard, per_shard, out.shards[c], out.shard_sample_ids[c]);
  }
  // any remainder after the equal partition is dropped
  return out;
}

}  // namespace secfl
