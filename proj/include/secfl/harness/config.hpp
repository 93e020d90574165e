#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "secfl/harness/dataset.hpp"
#include "secfl/secagg/ring.hpp"
#include "secfl/timing.hpp"

namespace secfl {

enum class Policy { none, clip, clip_c, random_drop, ordered_drop };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::none: return "none";
    case Policy::clip: return "clip";
    case Policy::clip_c: return "clip-c";
    case Policy::random_drop: return "random";
    case Policy::ordered_drop: return "ordered";
  }
  throw std::logic_error("policy: bad enum value");
}

inline Policy parse_policy(const std::string& s) {
  if (s == "none") return Policy::none;
  if (s == "clip") return Policy::clip;
  if (s == "clip-c") return Policy::clip_c;
  if (s == "random") return Policy::random_drop;
  if (s == "ordered") return Policy::ordered_drop;
  throw std::invalid_argument("policy: unknown name '" + s + "'");
}

inline const std::vector<Policy>& all_policies() {
  static const std::vector<Policy> p{Policy::none, Policy::clip, Policy::clip_c,
                                     Policy::random_drop, Policy::ordered_drop};
  return p;
}

struct ProfileParams {
  double cpu_ghz = 3.0;
  double up_mbps = 17.0;
  double down_mbps = 155.0;
};

struct ExperimentConfig {
  // [experiment]
  std::size_t n_clients = 10;
  double straggler_fraction = 0.2;
  std::size_t rounds = 60;
  std::uint64_t seed = 7;
  Policy policy = Policy::clip;
  double submodel_floor = 0.5;
  double percentile = 0.2;
  std::size_t graph_k = 0;     // 0 -> n_clients - 1 (complete graph)
  std::size_t threshold_t = 0; // 0 -> floor(2n/3) + 1

  // [model]
  std::vector<std::size_t> hidden = {64, 32};

  // [dataset]
  DatasetParams dataset;

  // [training]
  std::size_t epochs = 1;
  double lr = 0.03;
  std::size_t batch_size = 32;

  // [profile.*]
  ProfileParams non_straggler{3.0, 17.0, 155.0};
  ProfileParams straggler{2.0, 7.0, 27.0};

  // [cost]
  double flops_full = 1.5e8;
  double cycles_per_flop = 1.0;
  double setup_ms = 2.0;
  double mask_ms = 1.0;
  double unmask_ms = 2.0;

  // [ring]
  std::size_t scale_bits = 16;
  double clip_range = 8.0;

  std::size_t resolved_graph_k() const {
    return graph_k == 0 ? n_clients - 1 : graph_k;
  }
  std::size_t resolved_threshold() const {
    return threshold_t == 0 ? (2 * n_clients) / 3 + 1 : threshold_t;
  }
  std::size_t straggler_profile_count() const {
    return static_cast<std::size_t>(
        std::llround(straggler_fraction * static_cast<double>(n_clients)));
  }

  std::vector<LayerShape> model_shapes() const {
    std::vector<LayerShape> shapes;
    std::size_t in = dataset.n_features;
    for (std::size_t h : hidden) {
      shapes.push_back({in, h});
      in = h;
    }
    shapes.push_back({in, dataset.n_classes});
    return shapes;
  }

  secagg::RingParams ring_params() const {
    secagg::RingParams p;
    p.scale = 1ULL << scale_bits;
    p.clip = clip_range;
    return p;
  }

  // Straggler-class profiles go to the highest client ids; together with the
  // lower-id tie break this keeps equalized stragglers in the straggler set.
  std::vector<ClientProfile> client_profiles() const {
    std::vector<ClientProfile> out(n_clients);
    const std::size_t n_straggler = straggler_profile_count();
    for (std::size_t u = 0; u < n_clients; ++u) {
      const bool is_straggler = u >= n_clients - n_straggler;
      const ProfileParams& p = is_straggler ? straggler : non_straggler;
      out[u] = {p.cpu_ghz * 1e9, p.up_mbps * 1e6, p.down_mbps * 1e6, is_straggler};
    }
    return out;
  }

  CostModel cost_model() const {
    CostModel c;
    c.flops_full = flops_full;
    c.cycles_per_flop = cycles_per_flop;
    c.bytes_per_update = 0;  // derived from the model size by the harness
    c.setup_s = setup_ms / 1000.0;
    c.mask_s = mask_ms / 1000.0;
    c.unmask_s = unmask_ms / 1000.0;
    return c;
  }

  void validate() const {
    if (n_clients < 2) throw std::invalid_argument("config: need >= 2 clients");
    if (rounds < 1) throw std::invalid_argument("config: need >= 1 round");
    if (hidden.empty()) throw std::invalid_argument("config: need >= 1 hidden layer");
    if (!(submodel_floor > 0) || submodel_floor > 1) {
      throw std::invalid_argument("config: submodel_floor must be in (0, 1]");
    }
    if (!(percentile > 0) || percentile > 1) {
      throw std::invalid_argument("config: percentile must be in (0, 1]");
    }
    if (policy != Policy::none && straggler_profile_count() < 1) {
      throw std::invalid_argument(
          "config: straggler-dependent policy needs straggler_fraction*n_clients >= 1");
    }
    if (straggler_profile_count() >= n_clients) {
      throw std::invalid_argument("config: every client would be a straggler");
    }
    const std::size_t k = resolved_graph_k();
    if (k < 1 || k >= n_clients || (k * n_clients) % 2 != 0) {
      throw std::invalid_argument("config: invalid graph degree");
    }
    const std::size_t t = resolved_threshold();
    if (t < 2 || t > n_clients) throw std::invalid_argument("config: invalid threshold");
    if (epochs < 1) throw std::invalid_argument("config: need >= 1 epoch");
    if (!(lr > 0)) throw std::invalid_argument("config: lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("config: need batch size");
    if (scale_bits < 1 || scale_bits > 40) {
      throw std::invalid_argument("config: scale_bits out of range");
    }
    ring_params().check_no_overflow(n_clients);
    validate_shapes(model_shapes());
    for (const auto& p : client_profiles()) p.validate();
  }
};

namespace detail {

using IniMap = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline IniMap parse_ini(std::istream& in) {
  IniMap out;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config: bad section at line " +
                                    std::to_string(lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key=value at line " +
                                  std::to_string(lineno));
    }
    out[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("config: bad number '" + v + "'");
  return x;
}

inline std::uint64_t to_u64(const std::string& v) {
  std::size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("config: bad integer '" + v + "'");
  return x;
}

inline std::vector<std::size_t> to_size_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<std::size_t>(to_u64(item)));
  }
  if (out.empty()) throw std::invalid_argument("config: empty list '" + v + "'");
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  auto ini = detail::parse_ini(in);
  ExperimentConfig c;

  auto apply = [&](const std::string& section, const std::string& key,
                   const std::string& value) {
    using detail::to_double;
    using detail::to_u64;
    const std::string where = section + "." + key;
    if (section == "experiment") {
      if (key == "n_clients") c.n_clients = to_u64(value);
      else if (key == "straggler_fraction") c.straggler_fraction = to_double(value);
      else if (key == "rounds") c.rounds = to_u64(value);
      else if (key == "seed") c.seed = to_u64(value);
      else if (key == "policy") c.policy = parse_policy(value);
      else if (key == "submodel_floor") c.submodel_floor = to_double(value);
      else if (key == "percentile") c.percentile = to_double(value);
      else if (key == "graph_k") c.graph_k = to_u64(value);
      else if (key == "threshold_t") c.threshold_t = to_u64(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else if (section == "model") {
      if (key == "hidden") c.hidden = detail::to_size_list(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else if (section == "dataset") {
      if (key == "n_samples") c.dataset.n_samples = to_u64(value);
      else if (key == "n_features") c.dataset.n_features = to_u64(value);
      else if (key == "n_classes") c.dataset.n_classes = to_u64(value);
      else if (key == "sigma") c.dataset.sigma = to_double(value);
      else if (key == "center_scale") c.dataset.center_scale = to_double(value);
      else if (key == "test_fraction") c.dataset.test_fraction = to_double(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else if (section == "training") {
      if (key == "epochs") c.epochs = to_u64(value);
      else if (key == "lr") c.lr = to_double(value);
      else if (key == "batch_size") c.batch_size = to_u64(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else if (section == "profile.non_straggler" || section == "profile.straggler") {
      ProfileParams& p =
          (section == "profile.straggler") ? c.straggler : c.non_straggler;
      if (key == "cpu_ghz") p.cpu_ghz = to_double(value);
      else if (key == "up_mbps") p.up_mbps = to_double(value);
      else if (key == "down_mbps") p.down_mbps = to_double(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else if (section == "cost") {
      if (key == "flops_full") c.flops_full = to_double(value);
      else if (key == "cycles_per_flop") c.cycles_per_flop = to_double(value);
      else if (key == "setup_ms") c.setup_ms = to_double(value);
      else if (key == "mask_ms") c.mask_ms = to_double(value);
      else if (key == "unmask_ms") c.unmask_ms = to_double(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else if (section == "ring") {
      if (key == "scale_bits") c.scale_bits = to_u64(value);
      else if (key == "clip") c.clip_range = to_double(value);
      else throw std::invalid_argument("config: unknown key " + where);
    } else {
      throw std::invalid_argument("config: unknown section [" + section + "]");
    }
  };

  for (const auto& [section, keys] : ini) {
    for (const auto& [key, value] : keys) apply(section, key, value);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  if (path == "default") {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  return parse_config(in);
}

// The fully resolved configuration, re-parseable by parse_config.
inline std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "[experiment]\n";
  out << "n_clients = " << c.n_clients << "\n";
  out << "straggler_fraction = " << num(c.straggler_fraction) << "\n";
  out << "rounds = " << c.rounds << "\n";
  out << "seed = " << c.seed << "\n";
  out << "policy = " << to_string(c.policy) << "\n";
  out << "submodel_floor = " << num(c.submodel_floor) << "\n";
  out << "percentile = " << num(c.percentile) << "\n";
  out << "graph_k = " << c.resolved_graph_k() << "\n";
  out << "threshold_t = " << c.resolved_threshold() << "\n";
  out << "\n[model]\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    out << (i ? "," : "") << c.hidden[i];
  }
  out << "\n";
  out << "\n[dataset]\n";
  out << "n_samples = " << c.dataset.n_samples << "\n";
  out << "n_features = " << c.dataset.n_features << "\n";
  out << "n_classes = " << c.dataset.n_classes << "\n";
  out << "sigma = " << num(c.dataset.sigma) << "\n";
  out << "center_scale = " << num(c.dataset.center_scale) << "\n";
  out << "test_fraction = " << num(c.dataset.test_fraction) << "\n";
  out << "\n[training]\n";
  out << "epochs = " << c.epochs << "\n";
  out << "lr = " << num(c.lr) << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "\n[profile.non_straggler]\n";
  out << "cpu_ghz = " << num(c.non_straggler.cpu_ghz) << "\n";
  out << "up_mbps = " << num(c.non_straggler.up_mbps) << "\n";
  out << "down_mbps = " << num(c.non_straggler.down_mbps) << "\n";
  out << "\n[profile.straggler]\n";
  out << "cpu_ghz = " << num(c.straggler.cpu_ghz) << "\n";
  out << "up_mbps = " << num(c.straggler.up_mbps) << "\n";
  out << "down_mbps = " << num(c.straggler.down_mbps) << "\n";
  out << "\n[cost]\n";
  out << "flops_full = " << num(c.flops_full) << "\n";
  out << "cycles_per_flop = " << num(c.cycles_per_flop) << "\n";
  out << "setup_ms = " << num(c.setup_ms) << "\n";
  out << "mask_ms = " << num(c.mask_ms) << "\n";
  out << "unmask_ms = " << num(c.unmask_ms) << "\n";
  out << "\n[ring]\n";
  out << "scale_bits = " << c.scale_bits << "\n";
  out << "clip = " << num(c.clip_range) << "\n";
  return out.str();
}

}  // namespace secfl
