#pragma once

// Episodic approximate Q-learning on the simulated tissue, and greedy
// testing rollouts.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tissue_ql/agent.hpp"
#include "tissue_ql/observation.hpp"
#include "tissue_ql/scenario.hpp"
#include "tissue_ql/soft_body.hpp"
#include "tissue_ql/vision.hpp"

namespace tql {

/// Pins a grasper-sized occluder over one TTP for the observations taken at
/// the start of actions [first_action, last_action] of the given episode
/// (every episode when episode < 0). Test-only fault injection.
struct ForcedOcclusion {
  int episode = -1;
  int first_action = 0;
  int last_action = -1;
  int ttp = 1;

  bool covers(int ep, int action) const {
    return (episode < 0 || episode == ep) && action >= first_action && action <= last_action;
  }
};

/// Simulated tissue, camera and TTP tracker for one scenario.
class Environment {
public:
  explicit Environment(Scenario scenario)
      : scenario_(std::move(scenario)), layout_(scene_layout(scenario_)) {
    validate(scenario_);
  }

  /// Rest lattice, graspers above their TGPs, tracker seeded from the true
  /// TTP projections. Throws ConfigError if either TTP starts occluded.
  const Observation& reset() {
    model_ = soft::build_lattice(scenario_.physics, scenario_.tgp1, scenario_.tgp2);
    Observation seed;
    seed.ttp1 = true_projection(0);
    seed.ttp2 = true_projection(1);
    seed.visible1 = seed.visible2 = true;
    obs_ = vision::detect_ttps(render(), scenario_.vision, seed);
    if (!obs_.visible1) throw ConfigError("points.ttp1", "occluded in the initial frame");
    if (!obs_.visible2) throw ConfigError("points.ttp2", "occluded in the initial frame");
    return obs_;
  }

  /// Moves both graspers, runs the settle window, and observes. When
  /// `pinned_ttp` (0 or 1) is set, a grasper-sized occluder is drawn over
  /// that TTP in the observed frame.
  const Observation& step(const agent::JointAction& action, std::optional<int> pinned_ttp = std::nullopt) {
    soft::move_grasper(model_, 1, action.move1());
    soft::move_grasper(model_, 2, action.move2());
    soft::step_n(model_, scenario_.physics.settle_steps);
    std::vector<vision::Circle> occluders;
    if (pinned_ttp) occluders.push_back(occluder_over(*pinned_ttp));
    obs_ = vision::detect_ttps(render(occluders), scenario_.vision, obs_);
    return obs_;
  }

  vision::Image render(std::span<const vision::Circle> occluders = {}) const {
    return vision::render_frame(model_, layout_, scenario_.camera, occluders);
  }

  /// Ground-truth image position of TTP k (0 or 1).
  Pixel true_projection(int k) const {
    const auto p = vision::project(scenario_.camera, model_.nodes.at(layout_.ttp_nodes.at(k)).position);
    if (!p) throw ConfigError(k == 0 ? "points.ttp1" : "points.ttp2", "behind the camera");
    return p->pixel;
  }

  /// A grasper-avatar-sized disk centred on TTP k (0 or 1).
  vision::Circle occluder_over(int k) const {
    const auto p = vision::project(scenario_.camera, model_.nodes.at(layout_.ttp_nodes.at(k)).position);
    if (!p) return {};
    return {p->pixel, scenario_.camera.focal_length_px * scenario_.markers.grasper_radius_m / p->depth};
  }

  const Scenario& scenario() const { return scenario_; }
  const soft::TissueModel& model() const { return model_; }
  const Observation& observation() const { return obs_; }

private:
  Scenario scenario_;
  vision::SceneLayout layout_;
  soft::TissueModel model_;
  Observation obs_;
};

/// Rebuilds the scenario's world and returns it with its first observation.
inline std::pair<soft::TissueModel, Observation> reset_environment(const Scenario& scenario) {
  Environment env(scenario);
  env.reset();
  return {env.model(), env.observation()};
}

struct TrainingCounters {
  int n_episode = 0;
  int n_action = 0;
  long long global_step = 0;
};

struct TransitionRecord {
  int episode = 0;
  int action_index = 0;  // within the episode
  Observation state;
  agent::JointAction action;
  double reward = 0;  // R(s) of the state the action was chosen in
  double epsilon = 0;
  double alpha = 0;
  bool updated = false;
  agent::WeightVector weights_after = agent::WeightVector::Zero();
};

struct EpisodeLog {
  std::vector<TransitionRecord> records;
  double mean_reward = 0;
};

struct TrainingResult {
  agent::WeightVector weights = agent::WeightVector::Zero();
  std::vector<EpisodeLog> episodes;
};

/// Training stopped on a diverged simulation or non-finite weights. Carries
/// the logs recorded up to the failure.
class TrainingAborted : public std::runtime_error {
public:
  TrainingAborted(int episode, int action, const std::string& cause, TrainingResult partial)
      : std::runtime_error("training aborted at episode " + std::to_string(episode) + ", action " +
                           std::to_string(action) + ": " + cause),
        episode_(episode),
        action_(action),
        partial_(std::move(partial)) {}

  int episode() const noexcept { return episode_; }
  int action() const noexcept { return action_; }
  const TrainingResult& partial() const noexcept { return partial_; }

private:
  int episode_;
  int action_;
  TrainingResult partial_;
};

struct TrainingOptions {
  std::optional<ForcedOcclusion> forced_occlusion;
};

inline agent::WeightVector initial_weights(const agent::LearningConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(cfg.weight_init_min, cfg.weight_init_max);
  agent::WeightVector w;
  for (int i = 0; i < agent::kFeatureCount; ++i) w[i] = dist(rng);
  return w;
}

/// Runs n_episode episodes of n_action epsilon-greedy actions each. A TD
/// update is applied only when both TTPs are visible in the observations on
/// either side of the transition; otherwise the weights are held.
inline TrainingResult train(const Scenario& scenario, const TrainingOptions& options = {}) {
  const agent::LearningConfig& cfg = scenario.learning;
  Environment env(scenario);
  std::mt19937_64 rng(scenario.seed);

  TrainingResult result;
  result.weights = initial_weights(cfg, rng);
  TrainingCounters counters;

  for (counters.n_episode = 0; counters.n_episode < cfg.n_episode; ++counters.n_episode) {
    EpisodeLog log;
    log.records.reserve(static_cast<std::size_t>(cfg.n_action));
    Observation state = env.reset();
    double reward_sum = 0;
    for (counters.n_action = 0; counters.n_action < cfg.n_action; ++counters.n_action) {
      counters.global_step = agent::global_step(cfg, counters.n_episode, counters.n_action);
      try {
        TransitionRecord rec;
        rec.episode = counters.n_episode;
        rec.action_index = counters.n_action;
        rec.state = state;
        rec.epsilon = agent::epsilon_schedule(cfg, counters.n_episode, counters.n_action);
        rec.alpha = agent::learning_rate_schedule(cfg, counters.global_step);
        rec.action = agent::select_action(result.weights, state, scenario.targets, cfg, rec.epsilon, rng);

        std::optional<int> pinned;
        const auto& forced = options.forced_occlusion;
        if (forced && forced->covers(counters.n_episode, counters.n_action + 1)) pinned = forced->ttp - 1;
        rec.reward = agent::reward(state, scenario.targets, cfg.eps_s);
        const Observation next = env.step(rec.action, pinned);
        rec.updated = state.both_visible() && next.both_visible();
        if (rec.updated) {
          result.weights = agent::td_update(result.weights, state, rec.action, next, scenario.targets, rec.alpha, cfg);
        }
        rec.weights_after = result.weights;
        reward_sum += rec.reward;
        log.records.push_back(std::move(rec));
        state = next;
      } catch (const std::exception& e) {
        log.mean_reward = log.records.empty() ? 0.0 : reward_sum / static_cast<double>(log.records.size());
        result.episodes.push_back(std::move(log));
        throw TrainingAborted(counters.n_episode, counters.n_action, e.what(), std::move(result));
      }
    }
    log.mean_reward = reward_sum / static_cast<double>(log.records.size());
    result.episodes.push_back(std::move(log));
  }
  return result;
}

struct TestPoint {
  int action = 0;  // actions taken so far; 0 is the initial state
  double error_px = 0;
};

/// Greedy rollout with frozen weights. Records the Euclidean pixel error
/// before the first action and after each one. Stops early once the greedy
/// choice has been all-stay, with the reward above the stop threshold, on two
/// consecutive actions.
/// `on_frame` receives (action count, frame) for every observation.
inline std::vector<TestPoint> test(const agent::WeightVector& weights, const Scenario& scenario, int max_actions,
                                   const std::function<void(int, const vision::Image&)>& on_frame = {}) {
  const agent::LearningConfig& cfg = scenario.learning;
  Environment env(scenario);
  Observation state = env.reset();
  std::vector<TestPoint> curve;
  auto record = [&](int n) {
    curve.push_back({n, agent::error_vector(state, scenario.targets).norm()});
    if (on_frame) on_frame(n, env.render());
  };
  record(0);
  bool confident_stay = false;
  for (int n = 1; n <= max_actions; ++n) {
    const agent::JointAction action = agent::best_action(weights, state, scenario.targets, cfg).action;
    const bool stay = action.all_stay() && agent::reward(state, scenario.targets, cfg.eps_s) > cfg.stop_threshold;
    if (stay && confident_stay) break;
    confident_stay = stay;
    state = env.step(action);
    record(n);
  }
  return curve;
}

}  // namespace tql
