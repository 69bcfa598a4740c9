// Command-line front end: train, test, suite, render.
//
// Log verbosity comes from TISSUE_QL_LOG (spdlog level syntax, e.g. "debug"
// or "warn"). Default is info.

#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include "tissue_ql/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;
constexpr int kExitPolicy = 4;

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  if (const char* env = std::getenv("TISSUE_QL_LOG")) spdlog::cfg::helpers::load_levels(env);
}

void log_scenario(const tql::Scenario& s) {
  spdlog::info("scenario '{}' seed {}", s.name, s.seed);
  spdlog::debug("idp1 ({:.3f}, {:.3f}) idp2 ({:.3f}, {:.3f})", s.targets.idp1.x(), s.targets.idp1.y(),
                s.targets.idp2.x(), s.targets.idp2.y());
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Visual-servo Q-learning on a simulated tissue sheet"};
  app.require_subcommand(1);

  std::string scenario_arg;
  std::string out_dir;
  std::string policy_path;
  bool dump_frames = false;
  int seeds = 10;
  unsigned threads = 0;
  std::uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "Train a policy and write training logs");
  train_cmd->add_option("--scenario", scenario_arg, "Preset name (default, c1..c4) or scenario file")->required();
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Override the scenario seed");

  auto* test_cmd = app.add_subcommand("test", "Run a greedy test episode with a saved policy");
  test_cmd->add_option("--scenario", scenario_arg, "Preset name or scenario file")->required();
  test_cmd->add_option("--policy", policy_path, "Policy file (17 values)")->required()->check(CLI::ExistingFile);
  test_cmd->add_option("--out", out_dir, "Output directory")->required();
  test_cmd->add_flag("--dump-frames", dump_frames, "Write every observed frame as a P6 image");

  auto* suite_cmd = app.add_subcommand("suite", "Train and test every preset over a range of seeds");
  suite_cmd->add_option("--out", out_dir, "Output directory")->required();
  suite_cmd->add_option("--seeds", seeds, "Seeds per preset (0..N-1)")->check(CLI::PositiveNumber);
  suite_cmd->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* render_cmd = app.add_subcommand("render", "Write the initial frame of a scenario");
  render_cmd->add_option("--scenario", scenario_arg, "Preset name or scenario file")->required();
  render_cmd->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  const auto started = std::chrono::steady_clock::now();
  try {
    if (*train_cmd) {
      tql::Scenario s = tql::load_scenario(scenario_arg);
      if (seed_opt->count() > 0) s.seed = seed;
      log_scenario(s);
      const tql::TrainRun run = tql::run_train(s, out_dir);
      for (std::size_t i = 0; i < run.result.episodes.size(); ++i) {
        spdlog::debug("episode {} mean reward {:.6f}", i, run.result.episodes[i].mean_reward);
      }
      spdlog::info("wrote {}, {}, {}", run.artifacts.training_csv.string(), run.artifacts.episodes_csv.string(),
                   run.artifacts.policy.string());
    } else if (*test_cmd) {
      const tql::Scenario s = tql::load_scenario(scenario_arg);
      log_scenario(s);
      const tql::TestRun run = tql::run_test(s, std::filesystem::path(policy_path), out_dir, dump_frames);
      const double final_error = run.curve.back().error_px;
      spdlog::info("{} actions, final error {:.3f} px ({})", run.curve.back().action, final_error,
                   final_error <= tql::kSuccessErrorPx ? "success" : "not within 12.5 px");
      spdlog::info("wrote {}", run.artifacts.testing_csv.string());
    } else if (*suite_cmd) {
      tql::SuiteOptions options;
      options.seeds = seeds;
      options.threads = threads;
      options.progress = [](const std::string& msg) { spdlog::info("{}", msg); };
      const tql::SuiteSummary summary = tql::run_suite(out_dir, options);
      for (const tql::SuiteRow& row : summary.rows) {
        spdlog::info("{}: {}/{} within 12.5 px, mean final error {:.3f} px", row.scenario, row.successes, row.runs,
                     row.mean_final_error_px);
      }
      spdlog::info("wrote {}", (std::filesystem::path(out_dir) / "summary.csv").string());
    } else if (*render_cmd) {
      const tql::Scenario s = tql::load_scenario(scenario_arg);
      log_scenario(s);
      spdlog::info("wrote {}", tql::run_render(s, out_dir).string());
    }
  } catch (const tql::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const tql::PolicyLoadError& e) {
    spdlog::error("{}", e.what());
    return kExitPolicy;
  } catch (const tql::TrainingAborted& e) {
    spdlog::error("{} (partial logs written)", e.what());
    return kExitAborted;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return EXIT_FAILURE;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  spdlog::debug("done in {:.1f} s", seconds);
  return EXIT_SUCCESS;
}
