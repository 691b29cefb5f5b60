// talbot: config-driven experiment runner.
//
//   talbot <dichotomy|dimension|smoothing|kernel-scan|revival> [--config FILE]
//          [--out DIR] [--threads N] [--seed U64] [--override key=value]... [--check]
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 check failed.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "talbot/experiments/config.hpp"
#include "talbot/experiments/output.hpp"
#include "talbot/experiments/runners.hpp"

namespace ex = talbot::experiments;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;
constexpr int kCheckFailed = 4;

int run(const std::string& experiment, const std::string& config_path, const std::string& out_dir, unsigned threads,
        const std::vector<std::string>& overrides, bool has_seed, std::uint64_t seed, bool check) {
  nlohmann::json tree = config_path.empty() ? nlohmann::json::object() : ex::load_config_tree(config_path);
  if (tree.contains("experiment") && ex::experiment_kind(tree.at("experiment").get<std::string>()) !=
                                         ex::experiment_kind(experiment))
    throw talbot::ConfigError("config describes experiment '" + tree.at("experiment").get<std::string>() +
                              "' but subcommand is '" + experiment + "'");
  tree["experiment"] = ex::to_string(ex::experiment_kind(experiment));
  for (const auto& o : overrides) ex::apply_override(tree, o);
  if (has_seed) tree["seed"] = seed;
  const auto cfg = ex::config_from_tree(tree);

  const auto result = ex::run_experiment(cfg, {threads});
  const std::string dir = out_dir.empty() ? cfg.output : out_dir;
  ex::write_result(result, cfg.tree, dir);

  std::cout << result.experiment << " config " << result.config_hash << " -> " << dir << " ("
            << ex::format_number(result.wall_seconds) << " s)\n";
  for (const auto& c : result.checks)
    std::cout << (c.passed ? "  PASS " : "  FAIL ") << c.name << ": " << c.detail << '\n';
  return check && !result.checks_passed() ? kCheckFailed : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic Schrodinger experiments: dichotomy, dimension, smoothing, kernel scan, revival"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned threads = ex::default_thread_count();
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  bool check = false;

  std::vector<CLI::App*> subs;
  for (const char* name : {"dichotomy", "dimension", "smoothing", "kernel-scan", "revival"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "config file (INI-style or JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: config 'output')");
    sub->add_option("--threads", threads, "worker threads (default: $TALBOT_THREADS or hardware)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed for sampled times");
    sub->add_option("--override", overrides, "dotted-path override key=value (repeatable)");
    sub->add_flag("--check", check, "exit 4 if an acceptance threshold fails");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  std::string experiment;
  bool has_seed = false;
  for (auto* sub : subs)
    if (sub->parsed()) {
      experiment = sub->get_name();
      has_seed = sub->count("--seed") > 0;
    }

  try {
    return run(experiment, config_path, out_dir, threads, overrides, has_seed, seed, check);
  } catch (const talbot::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const talbot::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const talbot::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const talbot::EstimatorUndefined& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
