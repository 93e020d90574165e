#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "secfl/harness/dataset.hpp"

using namespace secfl;

TEST_CASE("equal partition with a held-out test shard") {
  DatasetParams p;
  p.n_samples = 1000;
  p.n_features = 4;
  p.n_classes = 3;
  auto data = generate_dataset(p, 10, 42);
  CHECK(data.test.size() == 200);
  REQUIRE(data.shards.size() == 10);
  for (const auto& s : data.shards) CHECK(s.size() == 80);
}

TEST_CASE("shards are pairwise disjoint by sample index") {
  DatasetParams p;
  p.n_samples = 500;
  p.n_features = 3;
  p.n_classes = 2;
  auto data = generate_dataset(p, 7, 9);
  std::set<std::size_t> seen(data.test_sample_ids.begin(), data.test_sample_ids.end());
  for (const auto& ids : data.shard_sample_ids) {
    for (std::size_t id : ids) CHECK(seen.insert(id).second);
  }
}

TEST_CASE("generation is deterministic and label-valid") {
  DatasetParams p;
  auto a = generate_dataset(p, 5, 31);
  auto b = generate_dataset(p, 5, 31);
  CHECK(a.test.features == b.test.features);
  CHECK(a.shards[2].features == b.shards[2].features);

  auto c = generate_dataset(p, 5, 32);
  CHECK(a.test.features != c.test.features);

  for (int y : a.test.labels) {
    CHECK(y >= 0);
    CHECK(y < static_cast<int>(p.n_classes));
  }
}

TEST_CASE("degenerate parameters are rejected") {
  DatasetParams p;
  p.n_classes = 1;
  CHECK_THROWS_AS(generate_dataset(p, 4, 1), std::invalid_argument);

  DatasetParams q;
  q.n_samples = 10;
  q.test_fraction = 0.99;  // leaves no training data for 4 clients
  CHECK_THROWS_AS(generate_dataset(q, 40, 1), std::invalid_argument);
}

TEST_CASE("the blobs are linearly separable (sanity oracle)") {
  DatasetParams p;  // defaults: 5000 samples, 8 features, 4 classes
  p.sigma = 0.5;    // small class spread relative to center separation
  auto data = generate_dataset(p, 10, 7);

  // merge all training shards and fit a single softmax layer
  DatasetShard all;
  all.n_features = p.n_features;
  for (const auto& s : data.shards) {
    all.features.insert(all.features.end(), s.features.begin(), s.features.end());
    all.labels.insert(all.labels.end(), s.labels.begin(), s.labels.end());
  }
  auto linear = init_model({{p.n_features, p.n_classes}}, 3);
  auto mask = NeuronMask::none(linear.shapes());
  for (int epoch = 0; epoch < 20; ++epoch) {
    auto delta = train_local(linear, mask, all, 1, 0.1, 100 + epoch);
    linear.add_flat(delta.values);
  }
  CHECK(evaluate(linear, data.test) > 0.95);
}
