// secfl-sim: deterministic simulator of secure federated learning with
// straggler-aware client-side pruning.
//
//   secfl-sim run --config <path|default> [--policy P] [--seed S] [--out DIR]
//   secfl-sim compare --configs <paths...> [--out DIR]
//   secfl-sim protocol-test
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "secfl/harness/experiment.hpp"
#include "secfl/harness/protocol_suite.hpp"

namespace fs = std::filesystem;

namespace {

void print_run_summary(const secfl::RunResult& run) {
  std::cout << "policy=" << secfl::to_string(run.config.policy)
            << " rounds=" << run.rounds.size()
            << " simulated_time_s=" << secfl::csv::seconds(run.rounds.back().simulated_time_s)
            << " final_accuracy=" << run.final_accuracy
            << " max_accuracy=" << run.max_accuracy << "\n";
}

int cmd_run(const std::string& config_path, const std::string& policy_override,
            std::int64_t seed_override, const std::string& out_dir) {
  auto config = secfl::load_config(config_path);
  if (!policy_override.empty()) config.policy = secfl::parse_policy(policy_override);
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  config.validate();

  const auto run = secfl::run_experiment(config);
  secfl::emit_outputs(run, out_dir);
  print_run_summary(run);
  std::cout << "outputs written to " << out_dir << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& out_dir) {
  for (const auto& path : config_paths) {
    auto base_config = secfl::load_config(path);
    const std::string label =
        (path == "default") ? "default" : fs::path(path).stem().string();
    std::cout << "== " << label << " ==\n";

    std::map<secfl::Policy, secfl::RunResult> runs;
    for (secfl::Policy policy : secfl::all_policies()) {
      auto config = base_config;
      config.policy = policy;
      runs.emplace(policy, secfl::run_experiment(config));
    }

    const auto& baseline = runs.at(secfl::Policy::none).rounds;
    std::vector<secfl::PolicySummary> table;
    for (secfl::Policy policy : secfl::all_policies()) {
      const auto& run = runs.at(policy);
      table.push_back(secfl::summarize(
          run, policy == secfl::Policy::none ? nullptr : &baseline));
      const auto& row = table.back();
      std::cout << "  " << secfl::to_string(policy)
                << ": final=" << row.final_accuracy << " max=" << row.max_accuracy
                << " time_s=" << secfl::csv::seconds(row.total_time_s);
      if (row.speedup_vs_none) std::cout << " speedup=" << *row.speedup_vs_none;
      std::cout << "\n";

      secfl::emit_outputs(run, (fs::path(out_dir) / label / secfl::to_string(policy)).string());
    }
    std::ofstream summary(fs::path(out_dir) / label / "summary.csv", std::ios::binary);
    if (!summary) throw std::runtime_error("cannot write summary.csv");
    secfl::write_summary_csv(table, summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secure FL straggler-mitigation simulator"};
  app.require_subcommand(1);

  std::string config_path = "default";
  std::string policy_override;
  std::int64_t seed_override = -1;
  std::string out_dir = "out";
  std::vector<std::string> config_paths;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("--config", config_path, "config file path, or 'default'")->required();
  run->add_option("--policy", policy_override,
                  "override policy: none|clip|clip-c|random|ordered");
  run->add_option("--seed", seed_override, "override the experiment seed");
  run->add_option("--out", out_dir, "output directory");

  auto* compare = app.add_subcommand(
      "compare", "run every policy on each config and emit speedup tables");
  compare->add_option("--configs", config_paths, "config file paths")
      ->required()
      ->expected(-1);
  compare->add_option("--out", out_dir, "output directory");

  auto* protocol_test =
      app.add_subcommand("protocol-test", "run the masked-aggregation property suite");
  (void)protocol_test;

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, policy_override, seed_override, out_dir);
    if (compare->parsed()) return cmd_compare(config_paths, out_dir);
    // protocol-test
    return secfl::protocol_suite::run_and_report(std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
