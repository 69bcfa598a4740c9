#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tissue_ql/agent.hpp"
#include "tissue_ql/errors.hpp"

using namespace tql;
using namespace tql::agent;

namespace {

/// Observation with error vector e = targets - ttp given targets at the origin.
Observation with_error(double e1x, double e1y, double e2x, double e2y) {
  Observation o;
  o.ttp1 = {-e1x, -e1y};
  o.ttp2 = {-e2x, -e2y};
  o.visible1 = o.visible2 = true;
  return o;
}

const TargetSet kOrigin{};

/// Error vector whose norm gives the requested reward exactly.
Observation with_reward(double r) {
  const double n = std::sqrt(1.0 / (r * r) - 1e-8);
  return with_error(n, 0, 0, 0);
}

WeightVector unit(int i) {
  WeightVector w = WeightVector::Zero();
  w[i] = 1;
  return w;
}

}  // namespace

TEST(Actions, IndexLayout) {
  EXPECT_TRUE(kActions[0].all_stay());
  for (int i = 0; i < kActionCount; ++i) {
    EXPECT_EQ(kActions[i].index, i);
    EXPECT_EQ(static_cast<int>(kActions[i].move1()), i / 5);
    EXPECT_EQ(static_cast<int>(kActions[i].move2()), i % 5);
    const int moved = (kActions[i].a1x != 0) + (kActions[i].a1y != 0) + (kActions[i].a2x != 0) + (kActions[i].a2y != 0);
    EXPECT_EQ(moved, (i / 5 != 0) + (i % 5 != 0));
  }
  EXPECT_EQ(kActions[5].a1x, 1);  // grasper 1 +x, grasper 2 stay
  EXPECT_EQ(kActions[2].a2x, -1);
  EXPECT_EQ(kActions[24].a1y, -1);
  EXPECT_EQ(kActions[24].a2y, -1);
}

TEST(Reward, ZeroError) {
  EXPECT_NEAR(reward(with_error(0, 0, 0, 0), kOrigin, 1e-8), 1e4, 1e4 * 1e-9);
}

TEST(Reward, SuccessBandEdge) {
  const double r = reward(with_error(12.5, 0, 0, 0), kOrigin, 1e-8);
  EXPECT_NEAR(r, 0.08, 1e-9);
}

TEST(Reward, ThreeFourFive) {
  const double expected = 1.0 / std::sqrt(25 + 1e-8);
  EXPECT_LE(oracle::relative_error(reward(with_error(3, 4, 0, 0), kOrigin, 1e-8), expected), 1e-9);
  EXPECT_NEAR(reward(with_error(3, 4, 0, 0), kOrigin, 1e-8), 0.2, 1e-9);
}

TEST(Reward, PositiveAndDecreasingInErrorNorm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dir(0, 1);
  std::uniform_real_distribution<double> len(0, 400);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector4d d(dir(rng), dir(rng), dir(rng), dir(rng));
    d.normalize();
    double a = len(rng), b = len(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    const Eigen::Vector4d ea = a * d, eb = b * d;
    const double ra = reward(with_error(ea[0], ea[1], ea[2], ea[3]), kOrigin, 1e-8);
    const double rb = reward(with_error(eb[0], eb[1], eb[2], eb[3]), kOrigin, 1e-8);
    EXPECT_GT(rb, 0);
    EXPECT_GT(ra, rb);
  }
}

TEST(Features, AllStayFarFromGoalIsZero) {
  const LearningConfig cfg;
  EXPECT_EQ(features(with_reward(0.08), kOrigin, kActions[0], cfg), FeatureVector::Zero());
  EXPECT_EQ(features(with_error(40, -3, 2, 9), kOrigin, kActions[0], cfg), FeatureVector::Zero());
}

TEST(Features, AllStayNearGoalSetsStopFeature) {
  const LearningConfig cfg;
  const FeatureVector f = features(with_reward(0.09), kOrigin, kActions[0], cfg);
  EXPECT_EQ(f.head<16>(), (Eigen::Matrix<double, 16, 1>::Zero()));
  EXPECT_EQ(f[16], 1.0);
}

TEST(Features, HandEnumeratedExample) {
  // e1 = (10, -5), e2 = 0, grasper 1 moves +x only
  const LearningConfig cfg;
  const FeatureVector f = features(with_error(10, -5, 0, 0), kOrigin, kActions[5], cfg);
  FeatureVector expected = FeatureVector::Zero();
  expected[0] = 10;  // k=1, l=x, p=1, q=x
  expected[4] = -5;  // k=1, l=y, p=1, q=x
  EXPECT_EQ(f, expected);
  EXPECT_EQ(f[8], 0.0);
  EXPECT_EQ(f[12], 0.0);
  EXPECT_EQ(feature_index(1, 0, 1, 0), 0);
  EXPECT_EQ(feature_index(1, 1, 1, 0), 4);
  EXPECT_EQ(feature_index(2, 1, 2, 1), 15);
}

TEST(Features, MatchTermByTermDefinition) {
  std::mt19937_64 rng(9);
  const LearningConfig cfg;
  for (int trial = 0; trial < 2000; ++trial) {
    const Observation o = oracle::random_observation(rng, -20, 20);
    const TargetSet t{Pixel(1, 2), Pixel(-3, 0.5)};
    for (const JointAction& a : kActions) {
      ASSERT_EQ(features(o, t, a, cfg), oracle::features_by_hand(o, t, a, cfg.stop_threshold));
    }
  }
}

TEST(Features, Sparsity) {
  std::mt19937_64 rng(13);
  const LearningConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    const Observation o = oracle::random_observation(rng, -30, 30);
    for (const JointAction& a : kActions) {
      const FeatureVector f = features(o, kOrigin, a, cfg);
      int nonzero = 0;
      for (int i = 0; i < 16; ++i) nonzero += f[i] != 0.0;
      const int moving = (a.index / 5 != 0) + (a.index % 5 != 0);
      EXPECT_LE(nonzero, 4 * moving);
      if (f[16] == 1.0) EXPECT_EQ(nonzero, 0);
      if (a.all_stay()) EXPECT_EQ(nonzero, 0);
    }
  }
}

TEST(QValue, Linear) {
  const LearningConfig cfg;
  const FeatureVector f = features(with_error(10, -5, 0, 0), kOrigin, kActions[5], cfg);
  EXPECT_EQ(q_value(WeightVector::Zero(), f), 0.0);
  for (int i = 0; i < kFeatureCount; ++i) EXPECT_EQ(q_value(unit(i), f), f[i]);
  EXPECT_NEAR(q_value(WeightVector::Ones(), f), 5.0, 1e-12);
}

TEST(BestAction, ZeroWeightsPickAllStay) {
  const GreedyChoice c = best_action(WeightVector::Zero(), with_error(30, 1, 2, 3), kOrigin, LearningConfig{});
  EXPECT_EQ(c.action.index, 0);
  EXPECT_EQ(c.q, 0.0);
}

TEST(BestAction, StopWeightNearGoal) {
  const GreedyChoice c = best_action(unit(16), with_reward(0.2), kOrigin, LearningConfig{});
  EXPECT_EQ(c.action.index, 0);
  EXPECT_EQ(c.q, 1.0);
}

TEST(BestAction, MatchesEnumerationOracle) {
  std::mt19937_64 rng(17);
  const LearningConfig cfg;
  const TargetSet t{Pixel(160, 120), Pixel(170, 110)};
  for (int trial = 0; trial < 10000; ++trial) {
    const WeightVector w = oracle::random_weights(rng);
    const Observation o = oracle::random_observation(rng, 150, 180);
    double q = 0;
    const int expected = oracle::argmax_action(w, o, t, cfg.stop_threshold, &q);
    const GreedyChoice c = best_action(w, o, t, cfg);
    ASSERT_EQ(c.action.index, expected);
    ASSERT_EQ(c.q, q);
  }
}

TEST(BestAction, InvariantToPositiveScaling) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  const LearningConfig cfg;
  for (int trial = 0; trial < 2000; ++trial) {
    const WeightVector w = oracle::random_weights(rng);
    const Observation o = oracle::random_observation(rng);
    const TargetSet t{Pixel(100, 100), Pixel(200, 100)};
    EXPECT_EQ(best_action(w, o, t, cfg).action.index, best_action(scale(rng) * w, o, t, cfg).action.index);
  }
}

TEST(SelectAction, GreedyWhenEpsilonZero) {
  std::mt19937_64 rng(23), draws(29);
  const LearningConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    const WeightVector w = oracle::random_weights(rng);
    const Observation o = oracle::random_observation(rng);
    EXPECT_EQ(select_action(w, o, kOrigin, cfg, 0.0, draws), best_action(w, o, kOrigin, cfg).action);
  }
}

TEST(SelectAction, UniformWhenEpsilonOne) {
  std::mt19937_64 rng(31);
  const LearningConfig cfg;
  const WeightVector w = unit(3);
  const Observation o = with_error(5, 5, 5, 5);
  std::array<int, kActionCount> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[select_action(w, o, kOrigin, cfg, 1.0, rng).index];
  double chi2 = 0;
  const double expected = draws / static_cast<double>(kActionCount);
  for (int c : counts) {
    EXPECT_NEAR(c / static_cast<double>(draws), 0.04, 0.005);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  EXPECT_LT(chi2, 51.2);  // 24 degrees of freedom, p = 0.001
}

TEST(SelectAction, DeterministicForASeed) {
  const LearningConfig cfg;
  const WeightVector w = unit(2);
  const Observation o = with_error(5, -5, 1, 2);
  std::mt19937_64 a(41), b(41);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_action(w, o, kOrigin, cfg, 0.3, a), select_action(w, o, kOrigin, cfg, 0.3, b));
}

TEST(TdUpdate, HandEvaluatedStep) {
  // f(s, a) = e1 (first component only), R(s') = 1, every Q(s') = 0
  LearningConfig cfg;
  cfg.gamma = 0.9;
  const Observation s = with_error(1, 0, 0, 0);
  Observation next;
  next.ttp1 = {0, 0};
  next.ttp2 = {-std::sqrt(1 - 1e-8), 0};  // |e'| chosen so that R(s') = 1
  next.visible1 = next.visible2 = true;
  ASSERT_NEAR(reward(next, kOrigin, cfg.eps_s), 1.0, 1e-15);
  const FeatureVector f = features(s, kOrigin, kActions[5], cfg);
  ASSERT_EQ(f, unit(0));
  const WeightVector w = td_update(WeightVector::Zero(), s, kActions[5], next, kOrigin, 0.1, cfg);
  EXPECT_NEAR(w[0], 0.1, 1e-15);
  for (int i = 1; i < kFeatureCount; ++i) EXPECT_EQ(w[i], 0.0);
}

TEST(TdUpdate, ZeroRateOrZeroFeatureLeavesWeights) {
  std::mt19937_64 rng(43);
  const LearningConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const WeightVector w = oracle::random_weights(rng);
    const Observation s = oracle::random_observation(rng, 0, 100);
    const Observation n = oracle::random_observation(rng, 0, 100);
    const TargetSet t{Pixel(300, 300), Pixel(300, 300)};
    EXPECT_EQ(td_update(w, s, kActions[7], n, t, 0.0, cfg), w);
    EXPECT_EQ(td_update(w, s, kActions[0], n, t, 0.5, cfg), w);
  }
}

TEST(TdUpdate, ContractsOnAFrozenTransition) {
  // gamma = 0 freezes the target at R(s'), so delta shrinks by (1 - alpha |f|^2) per update
  std::mt19937_64 rng(53);
  LearningConfig cfg;
  cfg.gamma = 0;
  std::uniform_int_distribution<int> pick(1, kActionCount - 1);
  for (int trial = 0; trial < 50; ++trial) {
    WeightVector w = oracle::random_weights(rng, 0.01);
    const Observation s = oracle::random_observation(rng, 100, 200);
    const Observation n = oracle::random_observation(rng, 100, 200);
    const TargetSet t{Pixel(150, 150), Pixel(160, 140)};
    const JointAction a = kActions[pick(rng)];
    const double f2 = features(s, t, a, cfg).squaredNorm();
    const double alpha = 0.5 / f2;
    double previous = std::abs(td_error(w, s, a, n, t, cfg));
    for (int k = 0; k < 20; ++k) {
      w = td_update(w, s, a, n, t, alpha, cfg);
      const double current = std::abs(td_error(w, s, a, n, t, cfg));
      EXPECT_LE(current, previous) << trial << ' ' << k;
      EXPECT_NEAR(current, 0.5 * previous, 1e-9 * previous + 1e-15);
      previous = current;
    }
  }
}

TEST(TdUpdate, MatchesFiniteDifferenceGradient) {
  std::mt19937_64 rng(47);
  const LearningConfig cfg;
  std::uniform_int_distribution<int> pick(0, kActionCount - 1);
  for (int trial = 0; trial < 100; ++trial) {
    const WeightVector w = oracle::random_weights(rng, 0.01);
    const Observation s = oracle::random_observation(rng, 100, 200);
    const Observation n = oracle::random_observation(rng, 100, 200);
    const TargetSet t{Pixel(150, 150), Pixel(160, 140)};
    const JointAction a = kActions[pick(rng)];
    const double alpha = 1e-4;
    const double target = reward(n, t, cfg.eps_s) + cfg.gamma * best_action(w, n, t, cfg).q;
    auto loss = [&](const WeightVector& v) {
      const double r = target - q_value(v, features(s, t, a, cfg));
      return r * r;
    };
    WeightVector grad;
    for (int i = 0; i < kFeatureCount; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
      WeightVector up = w, down = w;
      up[i] += h;
      down[i] -= h;
      grad[i] = (loss(up) - loss(down)) / (2 * h);
    }
    const WeightVector step = td_update(w, s, a, n, t, alpha, cfg) - w;
    const WeightVector expected = -0.5 * alpha * grad;
    if (expected.norm() == 0) {
      EXPECT_EQ(step.norm(), 0.0);
      continue;
    }
    EXPECT_LE((step - expected).norm() / expected.norm(), 1e-6);
  }
}

TEST(TdUpdate, NonFiniteIsDivergence) {
  const LearningConfig cfg;
  WeightVector w = WeightVector::Zero();
  w[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(td_update(w, with_error(1, 0, 0, 0), kActions[5], with_error(1, 0, 0, 0), kOrigin, 0.1, cfg),
               DivergenceError);
}

TEST(EpsilonSchedule, Endpoints) {
  const LearningConfig cfg;  // 10 x 200
  EXPECT_EQ(epsilon_schedule(cfg, 0, 0), 1.0);
  EXPECT_NEAR(epsilon_schedule(cfg, 5, 0), 0.5, 1e-15);
  EXPECT_EQ(epsilon_schedule(cfg, 9, 199), 0.1);
}

TEST(EpsilonSchedule, BoundedAndNonIncreasing) {
  const LearningConfig cfg;
  double last = 2;
  for (int ep = 0; ep < cfg.n_episode; ++ep) {
    for (int a = 0; a < cfg.n_action; ++a) {
      const double e = epsilon_schedule(cfg, ep, a);
      EXPECT_GE(e, 0.1);
      EXPECT_LE(e, 1.0);
      EXPECT_LE(e, last);
      last = e;
    }
  }
}

TEST(LearningRate, BaseForm) {
  EXPECT_EQ(base_learning_rate(200, 0), 1.0);
  EXPECT_EQ(base_learning_rate(200, 200), 0.5);
  EXPECT_LE(oracle::relative_error(base_learning_rate(37, 11), 37.0 / 48.0), 1e-15);
}

TEST(LearningRate, CyclicalSchedule) {
  LearningConfig cfg;
  cfg.K = 100;
  cfg.cycle_period = 300;
  EXPECT_EQ(learning_rate_schedule(cfg, 0), cfg.alpha_ceiling);
  EXPECT_LE(oracle::relative_error(learning_rate_schedule(cfg, 100),
                                   cfg.alpha_floor + (cfg.alpha_ceiling - cfg.alpha_floor) / 2),
            1e-12);
  EXPECT_EQ(learning_rate_schedule(cfg, 300), cfg.alpha_ceiling);
  EXPECT_EQ(learning_rate_schedule(cfg, 301), learning_rate_schedule(cfg, 1));
}

TEST(LearningRate, WithinBoundsForAFullRun) {
  const LearningConfig cfg;
  for (int ep = 0; ep < cfg.n_episode; ++ep) {
    for (int a = 0; a < cfg.n_action; ++a) {
      const double alpha = learning_rate_schedule(cfg, global_step(cfg, ep, a));
      EXPECT_GE(alpha, cfg.alpha_floor);
      EXPECT_LE(alpha, cfg.alpha_ceiling);
    }
  }
}

TEST(LearningConfig, Validation) {
  LearningConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.gamma = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.alpha_ceiling = cfg.alpha_floor / 2;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.n_action = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
}
