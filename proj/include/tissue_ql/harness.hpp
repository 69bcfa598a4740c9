#pragma once

// File-level entry points: policy files, CSV logs, frame dumps, and the
// train / test / suite / render runs behind the command-line tool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tissue_ql/agent.hpp"
#include "tissue_ql/errors.hpp"
#include "tissue_ql/presets.hpp"
#include "tissue_ql/scenario.hpp"
#include "tissue_ql/training.hpp"
#include "tissue_ql/vision.hpp"

namespace tql {

namespace fs = std::filesystem;

/// Success band for a testing episode, in pixels of Euclidean error.
inline constexpr double kSuccessErrorPx = 12.5;
inline constexpr int kTestActions = 200;

using ProgressFn = std::function<void(const std::string&)>;

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A preset name (c1..c4, default) or a path to a scenario document.
inline Scenario load_scenario(const std::string& file_or_preset) {
  if (auto p = find_preset(file_or_preset)) return *p;
  if (!fs::exists(file_or_preset)) {
    throw ConfigError("scenario", "'" + file_or_preset + "' is neither a preset nor an existing file");
  }
  return parse_scenario(read_text_file(file_or_preset));
}

/// 17 decimal values, one per line, printed with round-trip precision.
inline void save_policy(const fs::path& path, const agent::WeightVector& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (int i = 0; i < agent::kFeatureCount; ++i) out << w[i] << '\n';
}

inline agent::WeightVector load_policy(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PolicyLoadError("cannot open policy file " + path.string());
  agent::WeightVector w;
  int count = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double v = 0;
    std::string rest;
    if (!(ls >> v) || (ls >> rest) || !std::isfinite(v)) {
      throw PolicyLoadError(path.string() + ":" + std::to_string(line_no) + ": expected one finite number");
    }
    if (count == agent::kFeatureCount) throw PolicyLoadError(path.string() + ": more than 17 values");
    w[count++] = v;
  }
  if (count != agent::kFeatureCount) {
    throw PolicyLoadError(path.string() + ": expected 17 values, found " + std::to_string(count));
  }
  return w;
}

inline std::string frame_filename(int episode, int action) {
  return "frame_" + std::to_string(episode) + "_" + std::to_string(action) + ".ppm";
}

namespace csv {

class Writer {
public:
  Writer(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out_ << std::setprecision(17) << header << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cells), ...);
    out_ << '\n';
  }

private:
  std::ofstream out_;
};

/// A numeric cell, or an empty cell when the value is missing or not finite.
inline std::string number_or_blank(double v, bool present = true) {
  if (!present || !std::isfinite(v)) return {};
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace csv

inline void write_training_csv(const fs::path& path, const TrainingResult& result) {
  csv::Writer w(path, "episode,action,epsilon,alpha,reward,updated");
  for (const EpisodeLog& ep : result.episodes) {
    for (const TransitionRecord& r : ep.records) {
      w.row(r.episode, r.action_index, r.epsilon, r.alpha, r.reward, r.updated ? 1 : 0);
    }
  }
}

inline void write_episodes_csv(const fs::path& path, const TrainingResult& result) {
  csv::Writer w(path, "episode,mean_reward");
  for (std::size_t i = 0; i < result.episodes.size(); ++i) w.row(i, result.episodes[i].mean_reward);
}

inline void write_testing_csv(const fs::path& path, const std::vector<TestPoint>& curve) {
  csv::Writer w(path, "action,error_px");
  for (const TestPoint& p : curve) w.row(p.action, p.error_px);
}

struct RunArtifacts {
  fs::path training_csv;
  fs::path episodes_csv;
  fs::path testing_csv;
  fs::path policy;
  fs::path frames_dir;
};

struct TrainRun {
  RunArtifacts artifacts;
  TrainingResult result;
};

/// Trains and writes training.csv, episodes.csv and policy.txt. On abort the
/// partial logs are written before the exception propagates.
inline TrainRun run_train(const Scenario& scenario, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  TrainRun run;
  run.artifacts.training_csv = out_dir / "training.csv";
  run.artifacts.episodes_csv = out_dir / "episodes.csv";
  run.artifacts.policy = out_dir / "policy.txt";
  try {
    run.result = train(scenario);
  } catch (const TrainingAborted& e) {
    write_training_csv(run.artifacts.training_csv, e.partial());
    write_episodes_csv(run.artifacts.episodes_csv, e.partial());
    throw;
  }
  write_training_csv(run.artifacts.training_csv, run.result);
  write_episodes_csv(run.artifacts.episodes_csv, run.result);
  save_policy(run.artifacts.policy, run.result.weights);
  return run;
}

struct TestRun {
  RunArtifacts artifacts;
  std::vector<TestPoint> curve;
};

inline TestRun run_test(const Scenario& scenario, const agent::WeightVector& weights, const fs::path& out_dir,
                        bool dump_frames = false, int max_actions = kTestActions) {
  fs::create_directories(out_dir);
  TestRun run;
  run.artifacts.testing_csv = out_dir / "testing.csv";
  std::function<void(int, const vision::Image&)> on_frame;
  if (dump_frames) {
    run.artifacts.frames_dir = out_dir / "frames";
    fs::create_directories(run.artifacts.frames_dir);
    on_frame = [dir = run.artifacts.frames_dir](int action, const vision::Image& img) {
      vision::write_ppm((dir / frame_filename(0, action)).string(), img);
    };
  }
  run.curve = test(weights, scenario, max_actions, on_frame);
  write_testing_csv(run.artifacts.testing_csv, run.curve);
  return run;
}

inline TestRun run_test(const Scenario& scenario, const fs::path& policy_file, const fs::path& out_dir,
                        bool dump_frames = false, int max_actions = kTestActions) {
  TestRun run = run_test(scenario, load_policy(policy_file), out_dir, dump_frames, max_actions);
  run.artifacts.policy = policy_file;
  return run;
}

/// Writes the initial frame of the scenario as frame_0_0.ppm.
inline fs::path run_render(const Scenario& scenario, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  Environment env(scenario);
  env.reset();
  const fs::path path = out_dir / frame_filename(0, 0);
  vision::write_ppm(path.string(), env.render());
  return path;
}

struct SuiteRun {
  std::string scenario;
  std::uint64_t seed = 0;
  bool completed = false;  // training and testing ran without error
  double final_error_px = 0;
  double first_episode_reward = 0;
  double last_episode_reward = 0;
  std::string failure;

  bool success() const { return completed && final_error_px <= kSuccessErrorPx; }
};

struct SuiteRow {
  std::string scenario;
  int runs = 0;
  int successes = 0;
  double mean_final_error_px = 0;

  double success_rate() const { return runs ? static_cast<double>(successes) / runs : 0.0; }
};

struct SuiteSummary {
  std::vector<SuiteRun> runs;
  std::vector<SuiteRow> rows;
};

struct SuiteOptions {
  std::vector<std::string> presets = {"c1", "c2", "c3", "c4"};
  int seeds = 10;
  unsigned threads = 0;  // 0: hardware concurrency
  ProgressFn progress;
};

/// Trains and greedily tests every preset over seeds 0..seeds-1. Each job
/// writes into <out>/<preset>/seed_<n>/; failures count as unsuccessful.
/// Writes runs.csv and summary.csv at the top level; cells with no value
/// (failed runs, a scenario with no completed run) are left empty.
inline SuiteSummary run_suite(const fs::path& out_dir, const SuiteOptions& options = {}) {
  fs::create_directories(out_dir);
  struct Job {
    Scenario scenario;
    fs::path dir;
  };
  std::vector<Job> jobs;
  for (const std::string& name : options.presets) {
    const auto base = find_preset(name);
    if (!base) throw ConfigError("suite", "unknown preset '" + name + "'");
    for (int seed = 0; seed < options.seeds; ++seed) {
      Scenario s = *base;
      s.seed = static_cast<std::uint64_t>(seed);
      jobs.push_back({s, out_dir / name / ("seed_" + std::to_string(seed))});
    }
  }

  std::vector<SuiteRun> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      SuiteRun& r = results[i];
      r.scenario = job.scenario.name;
      r.seed = job.scenario.seed;
      try {
        const TrainRun trained = run_train(job.scenario, job.dir);
        const TestRun tested = run_test(job.scenario, trained.result.weights, job.dir);
        r.final_error_px = tested.curve.back().error_px;
        r.first_episode_reward = trained.result.episodes.front().mean_reward;
        r.last_episode_reward = trained.result.episodes.back().mean_reward;
        r.completed = true;
      } catch (const std::exception& e) {
        r.failure = e.what();
      }
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        std::ostringstream msg;
        msg << r.scenario << " seed " << r.seed << ": "
            << (r.completed ? "final error " + std::to_string(r.final_error_px) + " px" : "failed: " + r.failure);
        options.progress(msg.str());
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  SuiteSummary summary;
  summary.runs = results;
  for (const std::string& name : options.presets) {
    SuiteRow row;
    row.scenario = name;
    double error_sum = 0;
    int completed = 0;
    for (const SuiteRun& r : results) {
      if (r.scenario != name) continue;
      ++row.runs;
      row.successes += r.success() ? 1 : 0;
      if (r.completed) {
        error_sum += r.final_error_px;
        ++completed;
      }
    }
    row.mean_final_error_px = completed ? error_sum / completed : std::nan("");
    summary.rows.push_back(row);
  }

  {
    csv::Writer w(out_dir / "runs.csv",
                  "scenario,seed,completed,final_error_px,success,first_episode_reward,last_episode_reward");
    for (const SuiteRun& r : results) {
      w.row(r.scenario, r.seed, r.completed ? 1 : 0, csv::number_or_blank(r.final_error_px, r.completed),
            r.success() ? 1 : 0, csv::number_or_blank(r.first_episode_reward, r.completed),
            csv::number_or_blank(r.last_episode_reward, r.completed));
    }
  }
  {
    csv::Writer w(out_dir / "summary.csv", "scenario,runs,successes,success_rate,mean_final_error_px");
    for (const SuiteRow& row : summary.rows) {
      w.row(row.scenario, row.runs, row.successes, row.success_rate(), csv::number_or_blank(row.mean_final_error_px));
    }
  }
  return summary;
}

}  // namespace tql
