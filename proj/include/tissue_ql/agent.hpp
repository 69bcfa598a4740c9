#pragma once

// Linear approximate Q-learning over 17 handcrafted features: 16 products
// of TTP-to-IDP pixel offsets with grasper action components, plus a
// "task complete" indicator paired with the all-stay action.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>

#include <Eigen/Core>

#include "tissue_ql/errors.hpp"
#include "tissue_ql/observation.hpp"
#include "tissue_ql/soft_body.hpp"

namespace tql::agent {

inline constexpr int kFeatureCount = 17;
inline constexpr int kActionCount = 25;

using WeightVector = Eigen::Matrix<double, kFeatureCount, 1>;
using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;
using ErrorVector = Eigen::Vector4d;

/// One move per grasper; index = 5 * move1 + move2 with moves ordered
/// stay, +x, -x, +y, -y.
struct JointAction {
  int index = 0;
  int a1x = 0, a1y = 0, a2x = 0, a2y = 0;

  constexpr soft::Move move1() const { return soft::kMoves[index / 5]; }
  constexpr soft::Move move2() const { return soft::kMoves[index % 5]; }
  constexpr bool all_stay() const { return index == 0; }

  /// Component a_pq: grasper p in {1, 2}, axis q in {0 = x, 1 = y}.
  constexpr int component(int p, int q) const {
    if (p == 1) return q == 0 ? a1x : a1y;
    return q == 0 ? a2x : a2y;
  }

  friend constexpr bool operator==(const JointAction&, const JointAction&) = default;
};

constexpr JointAction make_action(int index) {
  const auto d1 = soft::move_direction(soft::kMoves[index / 5]);
  const auto d2 = soft::move_direction(soft::kMoves[index % 5]);
  return {index, d1[0], d1[1], d2[0], d2[1]};
}

inline constexpr std::array<JointAction, kActionCount> kActions = [] {
  std::array<JointAction, kActionCount> a{};
  for (int i = 0; i < kActionCount; ++i) a[i] = make_action(i);
  return a;
}();

struct TargetSet {
  Pixel idp1 = Pixel::Zero();
  Pixel idp2 = Pixel::Zero();

  friend bool operator==(const TargetSet&, const TargetSet&) = default;
};

struct LearningConfig {
  double gamma = 0.9;
  double eps_s = 1e-8;
  double stop_threshold = 0.08;
  double K = 200;
  double alpha_floor = 1e-5;
  double alpha_ceiling = 5e-5;
  int cycle_period = 200;
  int n_episode = 10;
  int n_action = 200;
  double eps_min = 0.1;
  double weight_init_min = -0.5;
  double weight_init_max = 0.5;

  friend bool operator==(const LearningConfig&, const LearningConfig&) = default;
};

inline void validate(const LearningConfig& c) {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string("learning.") + field, what);
  };
  require(c.gamma >= 0 && c.gamma < 1, "gamma", "must be in [0, 1)");
  require(c.eps_s > 0, "eps_s", "must be > 0");
  require(c.stop_threshold > 0, "stop_threshold", "must be > 0");
  require(c.K > 0, "K", "must be > 0");
  require(c.alpha_floor > 0, "alpha_floor", "must be > 0");
  require(c.alpha_ceiling >= c.alpha_floor, "alpha_ceiling", "must be >= alpha_floor");
  require(c.cycle_period >= 1, "cycle_period", "must be >= 1");
  require(c.n_episode >= 1, "n_episode", "must be >= 1");
  require(c.n_action >= 1, "n_action", "must be >= 1");
  require(c.eps_min >= 0 && c.eps_min <= 1, "eps_min", "must be in [0, 1]");
  require(c.weight_init_min < c.weight_init_max, "weight_init_max", "must exceed weight_init_min");
}

/// Pixel error (idp1 - ttp1, idp2 - ttp2).
inline ErrorVector error_vector(const Observation& obs, const TargetSet& t) {
  const Pixel e1 = t.idp1 - obs.ttp1;
  const Pixel e2 = t.idp2 - obs.ttp2;
  return {e1.x(), e1.y(), e2.x(), e2.y()};
}

inline double reward(const Observation& obs, const TargetSet& targets, double eps_s) {
  const ErrorVector e = error_vector(obs, targets);
  return 1.0 / std::sqrt(e.squaredNorm() + eps_s);
}

/// 0-based position of f(k, l, p, q) for k, p in {1, 2} and l, q in {0 = x, 1 = y}.
constexpr int feature_index(int k, int l, int p, int q) { return 8 * (k - 1) + 4 * l + 2 * (p - 1) + q; }

inline FeatureVector features(const Observation& obs, const TargetSet& targets, const JointAction& action,
                              const LearningConfig& cfg) {
  const ErrorVector e = error_vector(obs, targets);
  FeatureVector f = FeatureVector::Zero();
  for (int k = 1; k <= 2; ++k) {
    for (int l = 0; l < 2; ++l) {
      const double offset = e[2 * (k - 1) + l];
      for (int p = 1; p <= 2; ++p) {
        for (int q = 0; q < 2; ++q) f[feature_index(k, l, p, q)] = offset * action.component(p, q);
      }
    }
  }
  f[16] = action.all_stay() && reward(obs, targets, cfg.eps_s) > cfg.stop_threshold ? 1.0 : 0.0;
  return f;
}

inline double q_value(const WeightVector& w, const FeatureVector& f) { return w.dot(f); }

struct GreedyChoice {
  JointAction action;
  double q = 0;
};

/// Maximizes Q over all 25 joint actions; ties go to the lowest index.
inline GreedyChoice best_action(const WeightVector& w, const Observation& obs, const TargetSet& targets,
                                const LearningConfig& cfg) {
  GreedyChoice best{kActions[0], q_value(w, features(obs, targets, kActions[0], cfg))};
  for (int i = 1; i < kActionCount; ++i) {
    const double q = q_value(w, features(obs, targets, kActions[i], cfg));
    if (q > best.q) best = {kActions[i], q};
  }
  return best;
}

/// Epsilon-greedy selection. Draws exactly one uniform variate per call, plus
/// one action index when exploring.
template <typename Rng>
JointAction select_action(const WeightVector& w, const Observation& obs, const TargetSet& targets,
                          const LearningConfig& cfg, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, kActionCount - 1);
    return kActions[pick(rng)];
  }
  return best_action(w, obs, targets, cfg).action;
}

/// delta = R(s') + gamma * max_a' Q(s', a') - Q(s, a)
inline double td_error(const WeightVector& w, const Observation& obs, const JointAction& action,
                       const Observation& next_obs, const TargetSet& targets, const LearningConfig& cfg) {
  const double target = reward(next_obs, targets, cfg.eps_s) + cfg.gamma * best_action(w, next_obs, targets, cfg).q;
  return target - q_value(w, features(obs, targets, action, cfg));
}

/// Single-sample gradient step w + alpha * delta * f(s, a).
inline WeightVector td_update(const WeightVector& w, const Observation& obs, const JointAction& action,
                              const Observation& next_obs, const TargetSet& targets, double alpha,
                              const LearningConfig& cfg) {
  const double delta = td_error(w, obs, action, next_obs, targets, cfg);
  if (!std::isfinite(delta)) throw DivergenceError("non-finite TD error");
  WeightVector next = w + alpha * delta * features(obs, targets, action, cfg);
  if (!next.allFinite()) throw DivergenceError("non-finite weights after TD update");
  return next;
}

inline long long global_step(const LearningConfig& cfg, int n_episode, int n_action) {
  return static_cast<long long>(cfg.n_action) * n_episode + n_action;
}

/// Linearly decreasing exploration rate with floor eps_min.
inline double epsilon_schedule(const LearningConfig& cfg, int n_episode, int n_action) {
  const double total = static_cast<double>(cfg.n_episode) * cfg.n_action;
  return std::max(cfg.eps_min, 1.0 - static_cast<double>(global_step(cfg, n_episode, n_action)) / total);
}

/// K / (K + step)
inline double base_learning_rate(double K, long long step) { return K / (K + static_cast<double>(step)); }

/// Cyclical learning rate: the base decay restarted every cycle_period
/// steps and mapped onto [alpha_floor, alpha_ceiling].
inline double learning_rate_schedule(const LearningConfig& cfg, long long step) {
  const double base = base_learning_rate(cfg.K, step % cfg.cycle_period);
  return cfg.alpha_floor + (cfg.alpha_ceiling - cfg.alpha_floor) * base;
}

}  // namespace tql::agent
