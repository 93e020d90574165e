#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "secfl/harness/config.hpp"
#include "secfl/harness/csv.hpp"
#include "secfl/harness/dataset.hpp"
#include "secfl/model.hpp"
#include "secfl/pruning.hpp"
#include "secfl/secagg/graph.hpp"
#include "secfl/secagg/mask.hpp"
#include "secfl/secagg/messages.hpp"
#include "secfl/straggler.hpp"
#include "secfl/timing.hpp"

namespace secfl {

struct RoundRecord {
  std::size_t round = 0;
  double simulated_time_s = 0.0;  // cumulative
  double global_accuracy = 0.0;
  PhaseBreakdown breakdown;
  std::vector<double> fractions;  // per-client submodel fraction this round
  std::vector<std::size_t> drop_counts;
  std::vector<std::size_t> slack_counts;
};

// Client-side ground truth kept only when requested; used by tests to check
// the secure path against plaintext recomputations. Never visible to the
// server role.
struct RoundDebug {
  std::vector<double> plain_average;       // mean of the clients' raw deltas
  std::vector<double> secure_average;      // dequantized unmasked aggregate
  std::vector<double> broadcast_fit_times; // values clients encrypted (round >= 2)
  std::vector<std::set<std::size_t>> dropped_neurons;  // per client
};

struct RunResult {
  ExperimentConfig config;
  std::vector<RoundRecord> rounds;
  std::vector<RoundTimeline> timelines;
  secagg::Transcript transcript;  // everything relayed through the server
  double final_accuracy = 0.0;
  double max_accuracy = 0.0;
  std::vector<RoundDebug> debug;  // one per round when enabled
};

namespace detail {

// Seed derivation tags; each (tag, round, client) tuple is its own stream.
enum SeedTag : std::uint64_t {
  kSeedDataset = 1,
  kSeedModel = 2,
  kSeedGraph = 3,
  kSeedClientKey = 4,
  kSeedKeyShare = 5,
  kSeedSelfSeed = 6,
  kSeedSelfShare = 7,
  kSeedTrain = 8,
  kSeedPrune = 9,
};

// The server role: sees only relayed messages, public keys, measured network
// times, and the masked aggregate. No plaintext deltas, prune decisions, or
// fit times ever cross this interface.
class AggregationServer {
 public:
  AggregationServer(std::size_t n, secagg::CommGraph graph, secagg::RingParams ring,
                    std::size_t threshold)
      : n_(n),
        graph_(std::move(graph)),
        ring_(ring),
        threshold_(threshold),
        field_(secagg::PrimeField::production()),
        public_keys_(n) {}

  secagg::Transcript& transcript() { return transcript_; }
  const secagg::Transcript& transcript() const { return transcript_; }

  void register_public_key(const secagg::Message& m) {
    transcript_.append(m);
    public_keys_.at(m.sender) = secagg::parse_public_key(m);
  }
  const std::vector<secagg::PublicKey>& public_keys() const { return public_keys_; }

  void store_key_share(const secagg::Message& m) {
    transcript_.append(m);
    key_shares_.push_back(secagg::parse_share(m));
  }

  void relay_ciphertext(const secagg::Message& m) { transcript_.append(m); }

  void send_to_client(const secagg::Message& m) { transcript_.append(m); }

  void begin_round(std::uint32_t round) {
    round_ = round;
    masked_.clear();
    self_shares_.clear();
  }

  void store_self_share(const secagg::Message& m) {
    transcript_.append(m);
    self_shares_.push_back(secagg::parse_share(m));
  }

  void collect_masked(const secagg::Message& m) {
    transcript_.append(m);
    masked_.push_back({m.sender, secagg::parse_masked_update(m)});
  }

  // Federated average of the surviving clients' quantized deltas.
  std::vector<double> unmask_and_average(const std::set<std::uint16_t>& survivors,
                                         const std::set<std::uint16_t>& dropped) {
    std::vector<secagg::SeedShare> shares = self_shares_;
    if (!dropped.empty()) {
      for (const auto& s : key_shares_) {
        if (dropped.count(s.owner)) shares.push_back(s);
      }
    }
    const secagg::RingVector sum =
        secagg::unmask_aggregate(masked_, survivors, dropped, shares, graph_, ring_,
                                 public_keys_, round_, threshold_, field_);
    return secagg::dequantize_sum(sum, survivors.size(), ring_);
  }

  std::size_t masked_update_count() const { return masked_.size(); }

 private:
  std::size_t n_;
  secagg::CommGraph graph_;
  secagg::RingParams ring_;
  std::size_t threshold_;
  secagg::PrimeField field_;
  std::vector<secagg::PublicKey> public_keys_;
  std::vector<secagg::SeedShare> key_shares_;    // setup, for dropout recovery
  std::vector<secagg::SeedShare> self_shares_;   // current round
  std::vector<secagg::MaskedUpdate> masked_;     // current round
  secagg::Transcript transcript_;
  std::uint32_t round_ = 0;
};

struct SimClient {
  std::uint16_t id = 0;
  secagg::ClientKeys keys;
  std::map<std::uint16_t, secagg::Seed128> pair_base;  // all-pairs base seeds
  InvarianceState inv_state;
  double last_accuracy = 0.0;
  double prev_fraction = 1.0;  // fraction used in the previous round
};

inline secagg::Seed128 seed128_from(std::uint64_t seed) {
  secagg::Seed128 s{};
  Rng rng(seed);
  rng.fill_bytes(s);
  return s;
}

}  // namespace detail

// Runs the full experiment: synthesize data, then per round
// broadcast -> identify -> prune -> train -> mask -> unmask -> average.
// Pure function of the config; keep_debug additionally records client-side
// plaintext ground truth for tests.
inline RunResult run_experiment(const ExperimentConfig& config, bool keep_debug = false) {
  config.validate();
  const std::size_t n = config.n_clients;
  const std::uint64_t master = config.seed;
  const auto shapes = config.model_shapes();
  const auto ring = config.ring_params();
  const std::size_t threshold = config.resolved_threshold();
  const double floor = config.submodel_floor;

  const Dataset data =
      generate_dataset(config.dataset, n, derive_seed(master, {detail::kSeedDataset}));
  const auto graph = secagg::build_k_regular(n, config.resolved_graph_k(),
                                             derive_seed(master, {detail::kSeedGraph}));

  ModelWeights global = init_model(shapes, derive_seed(master, {detail::kSeedModel}));
  const std::size_t total_len = global.total_len();

  CostModel cost = config.cost_model();
  cost.bytes_per_update = secagg::masked_update_message_bytes(total_len);
  const auto profiles = config.client_profiles();
  const std::vector<std::size_t>& hidden = config.hidden;

  detail::AggregationServer server(n, graph, ring, threshold);

  // --- setup: keys, public key registration, key-seed shares ---
  std::vector<detail::SimClient> clients(n);
  for (std::size_t u = 0; u < n; ++u) {
    clients[u].id = static_cast<std::uint16_t>(u);
    clients[u].keys = secagg::derive_client_keys(
        detail::seed128_from(derive_seed(master, {detail::kSeedClientKey, u})));
    server.register_public_key(secagg::make_public_key_message(
        clients[u].id, clients[u].keys.public_key));
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      clients[u].pair_base[static_cast<std::uint16_t>(v)] =
          secagg::agree_pairwise(clients[u].keys.secret, server.public_keys()[v]);
    }
    auto shares = secagg::share_secret(
        secagg::seed_to_field(clients[u].keys.key_seed), n, threshold,
        secagg::PrimeField::production(),
        derive_seed(master, {detail::kSeedKeyShare, u}), clients[u].id,
        secagg::ShareKind::secret_key);
    for (std::size_t v = 0; v < n; ++v) {
      server.store_key_share(secagg::make_share_message(
          0, clients[u].id, static_cast<std::uint16_t>(v), shares[v]));
    }
  }

  RunResult result;
  result.config = config;

  double accuracy = evaluate(global, data.test);  // a_0, accuracy of the init model
  double prev_accuracy = accuracy;
  std::optional<RoundTimeline> prev_timeline;
  std::int64_t elapsed_ticks = 0;

  for (std::size_t round = 1; round <= config.rounds; ++round) {
    const std::uint32_t r32 = static_cast<std::uint32_t>(round);
    server.begin_round(r32);
    RoundDebug debug;

    // (1) model + accuracy distribution; one broadcast message per round
    {
      secagg::Message m{r32, secagg::kServerId, secagg::kBroadcastId,
                        secagg::kMsgGlobalModel, {}};
      put_f64le(m.payload, accuracy);
      for (double w : global.flat()) put_f64le(m.payload, w);
      server.send_to_client(m);
    }
    const ModelWeights received = global;  // every client's copy this round
    for (auto& c : clients) {
      c.inv_state.round = static_cast<int>(round);
      if (round >= 2) c.inv_state.acc_gains.push_back(accuracy - prev_accuracy);
      c.last_accuracy = accuracy;
    }

    // (2) straggler identification from the previous round's measurements
    std::vector<StragglerContext> contexts;
    if (round >= 2) {
      std::vector<double> full_equiv(n);
      for (std::size_t u = 0; u < n; ++u) {
        // full-model-equivalent fit time: measured duration divided by the
        // fraction it was measured at, so capability ranks are stable
        full_equiv[u] = prev_timeline->fit_duration_s(u) / clients[u].prev_fraction;
      }
      std::vector<std::map<std::uint16_t, secagg::Seed128>> seed_table(n);
      for (std::size_t u = 0; u < n; ++u) seed_table[u] = clients[u].pair_base;
      contexts = broadcast_fit_times(full_equiv, seed_table, r32, config.percentile,
                                     server.transcript());
      // the server's own measurement packet: upload/download per client
      secagg::Message net{r32, secagg::kServerId, secagg::kBroadcastId,
                          secagg::kMsgNetTime, {}};
      std::vector<double> uploads(n), downloads(n);
      for (std::size_t u = 0; u < n; ++u) {
        uploads[u] = prev_timeline->upload_duration_s(u);
        downloads[u] = prev_timeline->download_duration_s(u);
        put_f64le(net.payload, uploads[u]);
        put_f64le(net.payload, downloads[u]);
      }
      server.send_to_client(net);
      for (auto& ctx : contexts) {
        ctx.upload_times = uploads;
        ctx.download_times = downloads;
      }
      if (keep_debug) debug.broadcast_fit_times = full_equiv;
    }

    // threshold freeze at the end of the second warm-up round
    if (round == 2 &&
        (config.policy == Policy::clip || config.policy == Policy::clip_c)) {
      for (auto& c : clients) init_threshold(c.inv_state, received);
    }

    // (3) per-client prune decisions; warm-up rounds 1-2 never prune
    std::vector<PruneDecision> decisions(n);
    if (round >= 3 && config.policy != Policy::none) {
      for (std::size_t u = 0; u < n; ++u) {
        auto& ctx = contexts[u];
        if (!self_identify(ctx)) continue;
        const double fit_k = ctx.own_fit();
        const double fit_ns = ctx.slowest_nonstraggler_fit();
        const double p_compute = submodel_fraction_compute(fit_k, fit_ns, floor);
        const double p_network = submodel_fraction_network(
            fit_k, ctx.upload_times[u], ctx.target_completion(), floor);
        // only the full network-aware policy over-prunes; the baselines and
        // the compute-only variant stop at fit-time equalization
        const double p = (config.policy == Policy::clip) ? p_network : p_compute;
        const std::uint64_t seed =
            derive_seed(master, {detail::kSeedPrune, round, u});
        switch (config.policy) {
          case Policy::clip:
          case Policy::clip_c:
            decisions[u] = select_invariant(clients[u].inv_state, received, p,
                                            floor, seed);
            break;
          case Policy::random_drop:
            decisions[u] = random_dropout(hidden_neuron_count(shapes), p, seed);
            break;
          case Policy::ordered_drop:
            decisions[u] = ordered_dropout(hidden, p);
            break;
          case Policy::none:
            break;
        }
      }
    }

    // (4)-(5) local training, quantize, mask, share the self seeds
    std::vector<double> plain_sum(keep_debug ? total_len : 0, 0.0);
    std::set<std::uint16_t> survivors;
    for (std::size_t u = 0; u < n; ++u) {
      survivors.insert(clients[u].id);
      const auto mask = NeuronMask::from_global(shapes, decisions[u].to_drop);
      const WeightDelta delta =
          train_local(received, mask, data.shards[u], config.epochs, config.lr,
                      derive_seed(master, {detail::kSeedTrain, round, u}),
                      config.batch_size);
      if (keep_debug) {
        for (std::size_t i = 0; i < total_len; ++i) plain_sum[i] += delta.values[i];
        debug.dropped_neurons.push_back(decisions[u].to_drop);
      }

      const secagg::Seed128 self_seed =
          detail::seed128_from(derive_seed(master, {detail::kSeedSelfSeed, round, u}));
      std::map<std::uint16_t, secagg::Seed128> round_seeds;
      for (std::uint16_t v : graph.neighbors(clients[u].id)) {
        round_seeds[v] = secagg::round_mask_seed(clients[u].pair_base.at(v), r32);
      }
      const auto masked = secagg::mask_update(quantize(delta, ring), clients[u].id,
                                              graph, round_seeds, self_seed);
      server.collect_masked(
          secagg::make_masked_update_message(r32, clients[u].id, masked.vector));

      auto shares = secagg::share_secret(
          secagg::seed_to_field(self_seed), n, threshold,
          secagg::PrimeField::production(),
          derive_seed(master, {detail::kSeedSelfShare, round, u}), clients[u].id,
          secagg::ShareKind::self_seed);
      for (std::size_t v = 0; v < n; ++v) {
        server.store_self_share(secagg::make_share_message(
            r32, clients[u].id, static_cast<std::uint16_t>(v), shares[v]));
      }
    }

    // (6) unmask + federated average; a protocol abort names the round
    std::vector<double> average;
    try {
      average = server.unmask_and_average(survivors, {});
    } catch (const ProtocolAbort& e) {
      throw ProtocolAbort("round " + std::to_string(round) + ": " + e.what());
    }
    global.add_flat(average);

    if (keep_debug) {
      debug.secure_average = average;
      for (auto& v : plain_sum) v /= static_cast<double>(n);
      debug.plain_average = std::move(plain_sum);
      result.debug.push_back(std::move(debug));
    }

    // (7) server-side evaluation feeds the next round's broadcast
    prev_accuracy = accuracy;
    accuracy = evaluate(global, data.test);

    // (8) timing
    std::vector<double> fractions(n);
    for (std::size_t u = 0; u < n; ++u) fractions[u] = decisions[u].submodel_fraction;
    const RoundTimeline timeline = simulate_round(profiles, fractions, cost);
    if (timeline.round_ticks <= 0) {
      throw std::invalid_argument("config: cost model yields a zero-length round");
    }
    elapsed_ticks += timeline.round_ticks;

    RoundRecord rec;
    rec.round = round;
    rec.simulated_time_s = from_ticks(elapsed_ticks);
    rec.global_accuracy = accuracy;
    rec.breakdown = phase_breakdown(timeline);
    rec.fractions = fractions;
    for (const auto& d : decisions) {
      rec.drop_counts.push_back(d.to_drop.size());
      rec.slack_counts.push_back(d.slack_count);
    }
    result.rounds.push_back(rec);
    result.timelines.push_back(timeline);

    // (9) per-client round wrap-up
    for (std::size_t u = 0; u < n; ++u) {
      clients[u].inv_state.prev_weights = received;
      clients[u].prev_fraction = fractions[u];
    }
    prev_timeline = timeline;
  }

  result.transcript = server.transcript();
  result.final_accuracy = result.rounds.back().global_accuracy;
  result.max_accuracy = 0.0;
  for (const auto& r : result.rounds) {
    result.max_accuracy = std::max(result.max_accuracy, r.global_accuracy);
  }
  return result;
}

// Mean relative time saving at the accuracy levels m, m-2.5pp and m-5pp,
// where m is the treated run's best accuracy; levels one run never reaches
// are skipped, no common level is an error.
inline double speedup_at_accuracy(const std::vector<RoundRecord>& base,
                                  const std::vector<RoundRecord>& treated) {
  if (base.empty() || treated.empty()) {
    throw std::invalid_argument("speedup: empty run");
  }
  double m = 0.0;
  for (const auto& r : treated) m = std::max(m, r.global_accuracy);

  auto first_time_at = [](const std::vector<RoundRecord>& run,
                          double level) -> std::optional<double> {
    for (const auto& r : run) {
      if (r.global_accuracy >= level) return r.simulated_time_s;
    }
    return std::nullopt;
  };

  double sum = 0.0;
  std::size_t counted = 0;
  for (double level : {m, m - 0.025, m - 0.05}) {
    const auto tb = first_time_at(base, level);
    const auto tt = first_time_at(treated, level);
    if (!tb || !tt) continue;
    sum += (*tb - *tt) / *tb;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("speedup: no common reachable level");
  return sum / static_cast<double>(counted);
}

// ---- output files ----

inline void write_rounds_csv(const RunResult& run, std::ostream& out) {
  out << "round,simulated_time_s,global_accuracy,setup_s,fit_s,mask_s,upload_s,"
         "unmask_s,download_s";
  for (std::size_t u = 0; u < run.config.n_clients; ++u) out << ",p_client_" << u;
  out << "\n";
  for (const auto& r : run.rounds) {
    out << r.round << ',' << csv::seconds(r.simulated_time_s) << ','
        << csv::num(r.global_accuracy) << ',' << csv::seconds(r.breakdown.setup_s)
        << ',' << csv::seconds(r.breakdown.fit_s) << ','
        << csv::seconds(r.breakdown.mask_s) << ',' << csv::seconds(r.breakdown.upload_s)
        << ',' << csv::seconds(r.breakdown.unmask_s) << ','
        << csv::seconds(r.breakdown.download_s);
    for (double p : r.fractions) out << ',' << csv::num(p);
    out << "\n";
  }
}

inline std::vector<RoundRecord> parse_rounds_csv(std::istream& in) {
  std::vector<RoundRecord> out;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("rounds.csv: empty");
  const auto header = csv::split_line(line);
  if (header.size() < 9) throw std::invalid_argument("rounds.csv: bad header");
  const std::size_t n_clients = header.size() - 9;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != header.size()) throw std::invalid_argument("rounds.csv: bad row");
    RoundRecord r;
    r.round = static_cast<std::size_t>(csv::parse_num(f[0]));
    r.simulated_time_s = csv::parse_num(f[1]);
    r.global_accuracy = csv::parse_num(f[2]);
    r.breakdown.setup_s = csv::parse_num(f[3]);
    r.breakdown.fit_s = csv::parse_num(f[4]);
    r.breakdown.mask_s = csv::parse_num(f[5]);
    r.breakdown.upload_s = csv::parse_num(f[6]);
    r.breakdown.unmask_s = csv::parse_num(f[7]);
    r.breakdown.download_s = csv::parse_num(f[8]);
    for (std::size_t u = 0; u < n_clients; ++u) {
      r.fractions.push_back(csv::parse_num(f[9 + u]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_decisions_csv(const RunResult& run, std::ostream& out) {
  out << "round,client,policy,submodel_fraction,drop_count,slack_count\n";
  const std::string policy = to_string(run.config.policy);
  for (const auto& r : run.rounds) {
    for (std::size_t u = 0; u < r.fractions.size(); ++u) {
      out << r.round << ',' << u << ',' << policy << ',' << csv::num(r.fractions[u])
          << ',' << r.drop_counts[u] << ',' << r.slack_counts[u] << "\n";
    }
  }
}

inline void write_timeline_csv(const RunResult& run, std::ostream& out) {
  out << "round,client,phase,start_s,end_s\n";
  auto row = [&](std::size_t round, long client, const char* phase, std::int64_t a,
                 std::int64_t b) {
    out << round << ',' << client << ',' << phase << ',' << csv::seconds(from_ticks(a))
        << ',' << csv::seconds(from_ticks(b)) << "\n";
  };
  for (std::size_t i = 0; i < run.timelines.size(); ++i) {
    const auto& t = run.timelines[i];
    const std::size_t round = i + 1;
    for (std::size_t u = 0; u < t.clients.size(); ++u) {
      const auto& c = t.clients[u];
      const long id = static_cast<long>(u);
      row(round, id, "setup", 0, c.fit_start);
      row(round, id, "fit", c.fit_start, c.fit_end);
      row(round, id, "mask", c.fit_end, c.upload_start);
      row(round, id, "upload", c.upload_start, c.upload_end);
      row(round, id, "download", c.download_start, c.download_end);
    }
    row(round, -1, "unmask", t.unmask_start, t.unmask_end);
  }
}

struct PolicySummary {
  Policy policy;
  double final_accuracy = 0.0;
  double max_accuracy = 0.0;
  double total_time_s = 0.0;
  std::optional<double> speedup_vs_none;
};

inline void write_summary_csv(const std::vector<PolicySummary>& rows, std::ostream& out) {
  out << "policy,final_accuracy,max_accuracy,total_time_s,speedup_vs_none\n";
  for (const auto& r : rows) {
    out << to_string(r.policy) << ',' << csv::num(r.final_accuracy) << ','
        << csv::num(r.max_accuracy) << ',' << csv::seconds(r.total_time_s) << ',';
    if (r.speedup_vs_none) out << csv::num(*r.speedup_vs_none);
    out << "\n";
  }
}

inline PolicySummary summarize(const RunResult& run,
                               const std::vector<RoundRecord>* baseline = nullptr) {
  PolicySummary s;
  s.policy = run.config.policy;
  s.final_accuracy = run.final_accuracy;
  s.max_accuracy = run.max_accuracy;
  s.total_time_s = run.rounds.back().simulated_time_s;
  if (baseline) s.speedup_vs_none = speedup_at_accuracy(*baseline, run.rounds);
  return s;
}

// rounds.csv, timeline.csv, decisions.csv, summary.csv and config.echo under
// out_dir; byte-stable for a fixed seed.
inline void emit_outputs(const RunResult& run, const std::string& out_dir,
                         const std::vector<PolicySummary>* summary_rows = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error(std::string("cannot write ") + name);
    return f;
  };
  {
    auto f = open("rounds.csv");
    write_rounds_csv(run, f);
  }
  {
    auto f = open("timeline.csv");
    write_timeline_csv(run, f);
  }
  {
    auto f = open("decisions.csv");
    write_decisions_csv(run, f);
  }
  {
    auto f = open("summary.csv");
    if (summary_rows) {
      write_summary_csv(*summary_rows, f);
    } else {
      write_summary_csv({summarize(run)}, f);
    }
  }
  {
    auto f = open("config.echo");
    f << echo_config(run.config);
  }
}

}  // namespace secfl
