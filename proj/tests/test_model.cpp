#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "secfl/model.hpp"

using namespace secfl;

namespace {

DatasetShard tiny_shard(std::size_t n, std::size_t d, std::size_t classes,
                        std::uint64_t seed) {
  DatasetShard s;
  s.n_features = d;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) s.features.push_back(rng.uniform_real(-1, 1));
    s.labels.push_back(static_cast<int>(rng.uniform_u64(classes)));
  }
  return s;
}

// Test-side oracle: the explicitly excised dense sub-network, built by
// copying active rows/columns into a smaller ModelWeights.
struct Excised {
  ModelWeights model;
  std::vector<std::vector<std::size_t>> in_map;   // per layer: new idx -> old idx
  std::vector<std::vector<std::size_t>> out_map;
};

Excised excise(const ModelWeights& full, const NeuronMask& mask) {
  const auto& shapes = full.shapes();
  const std::size_t L = shapes.size();
  Excised e;
  e.in_map.resize(L);
  e.out_map.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (l == 0) {
      for (std::size_t i = 0; i < shapes[0].inputs; ++i) e.in_map[0].push_back(i);
    } else {
      e.in_map[l] = e.out_map[l - 1];
    }
    if (l + 1 == L) {
      for (std::size_t j = 0; j < shapes[l].outputs; ++j) e.out_map[l].push_back(j);
    } else {
      for (std::size_t j = 0; j < shapes[l].outputs; ++j) {
        if (!mask.dropped[l].count(j)) e.out_map[l].push_back(j);
      }
    }
  }
  std::vector<LayerShape> sub_shapes(L);
  for (std::size_t l = 0; l < L; ++l) {
    sub_shapes[l] = {e.in_map[l].size(), e.out_map[l].size()};
  }
  e.model = ModelWeights(sub_shapes);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t i = 0; i < e.in_map[l].size(); ++i) {
      for (std::size_t j = 0; j < e.out_map[l].size(); ++j) {
        e.model.weight(l, i, j) = full.weight(l, e.in_map[l][i], e.out_map[l][j]);
      }
    }
    for (std::size_t j = 0; j < e.out_map[l].size(); ++j) {
      e.model.bias(l, j) = full.bias(l, e.out_map[l][j]);
    }
  }
  return e;
}

}  // namespace

TEST_CASE("init_model layout and determinism") {
  std::vector<LayerShape> shapes{{2, 4}, {4, 3}};
  auto m = init_model(shapes, 7);
  CHECK(m.total_len() == 27);  // (2*4+4)+(4*3+3)

  auto m2 = init_model(shapes, 7);
  CHECK(m.flatten() == m2.flatten());

  auto m3 = init_model(shapes, 8);
  CHECK(m.flatten() != m3.flatten());

  for (std::size_t j = 0; j < 4; ++j) CHECK(m.bias(0, j) == 0.0);
  const double bound = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(m.weight(0, i, j)) <= bound);
    }
  }
}

TEST_CASE("init_model rejects inconsistent shape chains") {
  CHECK_THROWS_AS(init_model({{2, 4}, {5, 3}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_model({{0, 4}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_model({}, 1), std::invalid_argument);
}

TEST_CASE("flatten/unflatten round-trips bitwise") {
  auto m = init_model({{3, 5}, {5, 4}, {4, 2}}, 42);
  auto flat = m.flatten();
  auto back = ModelWeights::unflatten(m.shapes(), flat);
  CHECK(back.flatten() == flat);
}

TEST_CASE("train_local with zero epochs returns an all-zero delta") {
  auto m = init_model({{2, 4}, {4, 3}}, 7);
  auto shard = tiny_shard(8, 2, 3, 1);
  auto delta = train_local(m, NeuronMask::none(m.shapes()), shard, 0, 0.1, 3);
  REQUIRE(delta.values.size() == m.total_len());
  for (double v : delta.values) CHECK(v == 0.0);
}

TEST_CASE("train_local input validation") {
  auto m = init_model({{2, 4}, {4, 3}}, 7);
  auto shard = tiny_shard(8, 2, 3, 1);
  auto mask = NeuronMask::none(m.shapes());

  DatasetShard empty;
  empty.n_features = 2;
  CHECK_THROWS_AS(train_local(m, mask, empty, 1, 0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(train_local(m, mask, shard, 1, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(train_local(m, mask, shard, 1, -0.5, 3), std::invalid_argument);

  NeuronMask degenerate = mask;
  for (std::size_t j = 0; j < 4; ++j) degenerate.dropped[0].insert(j);
  CHECK_THROWS_AS(train_local(m, degenerate, shard, 1, 0.1, 3), std::invalid_argument);
}

TEST_CASE("train_local is deterministic") {
  auto m = init_model({{3, 6}, {6, 3}}, 9);
  auto shard = tiny_shard(20, 3, 3, 5);
  NeuronMask mask = NeuronMask::none(m.shapes());
  mask.dropped[0] = {1, 4};
  auto d1 = train_local(m, mask, shard, 2, 0.05, 11);
  auto d2 = train_local(m, mask, shard, 2, 0.05, 11);
  CHECK(d1.values == d2.values);
}

TEST_CASE("masked training equals training the excised sub-network") {
  auto m = init_model({{3, 6}, {6, 5}, {5, 3}}, 21);
  auto shard = tiny_shard(24, 3, 3, 2);
  NeuronMask mask = NeuronMask::none(m.shapes());
  mask.dropped[0] = {0, 3};
  mask.dropped[1] = {2};

  auto delta_full = train_local(m, mask, shard, 2, 0.1, 17);

  auto ex = excise(m, mask);
  auto delta_sub =
      train_local(ex.model, NeuronMask::none(ex.model.shapes()), shard, 2, 0.1, 17);

  // bitwise match at every active position
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const std::size_t outs = m.shapes()[l].outputs;
    const std::size_t sub_outs = ex.model.shapes()[l].outputs;
    const std::size_t off = m.layer_offset(l);
    const std::size_t sub_off = ex.model.layer_offset(l);
    for (std::size_t i = 0; i < ex.in_map[l].size(); ++i) {
      for (std::size_t j = 0; j < ex.out_map[l].size(); ++j) {
        const double full_v =
            delta_full.values[off + ex.in_map[l][i] * outs + ex.out_map[l][j]];
        const double sub_v = delta_sub.values[sub_off + i * sub_outs + j];
        REQUIRE(full_v == sub_v);
      }
    }
    const std::size_t wc = m.shapes()[l].weight_count();
    const std::size_t sub_wc = ex.model.shapes()[l].weight_count();
    for (std::size_t j = 0; j < ex.out_map[l].size(); ++j) {
      REQUIRE(delta_full.values[off + wc + ex.out_map[l][j]] ==
              delta_sub.values[sub_off + sub_wc + j]);
    }
  }
}

TEST_CASE("deltas are exactly zero at every dropped position") {
  auto m = init_model({{4, 8}, {8, 6}, {6, 4}}, 3);
  auto shard = tiny_shard(30, 4, 4, 6);
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    NeuronMask mask = NeuronMask::none(m.shapes());
    mask.dropped[0] = {rng.uniform_u64(8), rng.uniform_u64(8)};
    mask.dropped[1] = {rng.uniform_u64(6)};
    auto delta = train_local(m, mask, shard, 1, 0.1, 1234 + trial);
    auto excluded = excluded_positions(mask, m.shapes());
    for (std::size_t p = 0; p < excluded.size(); ++p) {
      if (excluded[p]) REQUIRE(delta.values[p] == 0.0);
    }
  }
}

TEST_CASE("evaluate counts argmax matches with low-index tie break") {
  // single linear layer, identity-ish weights so outputs mirror inputs
  ModelWeights m({{2, 2}});
  m.weight(0, 0, 0) = 1.0;
  m.weight(0, 1, 1) = 1.0;

  DatasetShard s;
  s.n_features = 2;
  s.features = {1.0, 0.0};
  s.labels = {0};
  CHECK(evaluate(m, s) == 1.0);

  s.labels = {1};
  CHECK(evaluate(m, s) == 0.0);

  // tie on both logits resolves to class 0
  DatasetShard t;
  t.n_features = 2;
  t.features = {0.5, 0.5};
  t.labels = {0};
  CHECK(evaluate(m, t) == 1.0);
  t.labels = {1};
  CHECK(evaluate(m, t) == 0.0);
}

TEST_CASE("evaluate matches a brute-force forward pass") {
  auto m = init_model({{3, 5}, {5, 4}}, 13);
  auto shard = tiny_shard(10, 3, 4, 77);

  // independent naive forward: dense loops, ReLU hidden, argmax logits
  std::size_t correct = 0;
  for (std::size_t s = 0; s < shard.size(); ++s) {
    auto x = shard.row(s);
    std::vector<double> h(5, 0.0);
    for (std::size_t j = 0; j < 5; ++j) {
      double z = m.bias(0, j);
      for (std::size_t i = 0; i < 3; ++i) z += x[i] * m.weight(0, i, j);
      h[j] = z > 0 ? z : 0.0;
    }
    std::vector<double> o(4, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      double z = m.bias(1, j);
      for (std::size_t i = 0; i < 5; ++i) z += h[i] * m.weight(1, i, j);
      o[j] = z;
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < 4; ++j) {
      if (o[j] > o[best]) best = j;
    }
    if (best == static_cast<std::size_t>(shard.labels[s])) ++correct;
  }
  CHECK(evaluate(m, shard) == static_cast<double>(correct) / 10.0);
}

TEST_CASE("active_fraction enumerates excluded positions") {
  std::vector<LayerShape> shapes{{2, 2}, {2, 1}};
  CHECK(active_fraction(NeuronMask::none(shapes), shapes) == 1.0);

  NeuronMask mask = NeuronMask::none(shapes);
  mask.dropped[0] = {0};
  CHECK(active_fraction(mask, shapes) == Catch::Approx(5.0 / 9.0).epsilon(1e-12));

  NeuronMask degenerate = NeuronMask::none(shapes);
  degenerate.dropped[0] = {0, 1};
  CHECK_THROWS_AS(active_fraction(degenerate, shapes), std::invalid_argument);
}

TEST_CASE("global neuron index mapping round-trips") {
  std::vector<LayerShape> shapes{{4, 8}, {8, 6}, {6, 3}};
  CHECK(hidden_neuron_count(shapes) == 14);
  std::set<std::size_t> global{0, 7, 8, 13};
  auto mask = NeuronMask::from_global(shapes, global);
  CHECK(mask.dropped[0] == std::set<std::size_t>{0, 7});
  CHECK(mask.dropped[1] == std::set<std::size_t>{0, 5});
  CHECK(mask.to_global(shapes) == global);
  CHECK_THROWS_AS(NeuronMask::from_global(shapes, {14}), std::invalid_argument);
}
