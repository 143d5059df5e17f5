#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include <tiered/errors.hpp>
#include <tiered/reward.hpp>
#include <tiered/rng.hpp>

#include "test_oracles.hpp"

using namespace tiered;

namespace {

NormalizationStats unit_stats() {
  NormalizationStats s;
  s.mean = 0.0;
  s.stddev = 1.0;
  s.sample_count = 2;
  return s;
}

Trajectory tokens_of(std::vector<int> tokens) {
  Trajectory t;
  t.tokens = std::move(tokens);
  t.logprobs.assign(t.tokens.size(), -0.7);
  return t;
}

HierarchicalRewardConfig one_aspect_config(double threshold) {
  HierarchicalRewardConfig cfg;
  cfg.threshold = threshold;
  cfg.holistic_weight = 5.0;
  cfg.aspect_weights["style"] = 1.0;
  cfg.selected_aspects = {"style"};
  cfg.shaping = Shaping::Sigmoid;
  return cfg;
}

}  // namespace

TEST_SUITE("reward combination") {
  TEST_CASE("sigmoid midpoint and reference values") {
    CHECK(shape_sigmoid(0.0) == doctest::Approx(0.5));
    CHECK(shape_sigmoid(-1.0) == doctest::Approx(0.26894142136999510).epsilon(1e-12));
    CHECK(shape_sigmoid(0.5) == doctest::Approx(0.62245933120185459).epsilon(1e-12));
  }

  TEST_CASE("sigmoid maps every finite value into (0, 1) and saturates") {
    for (double raw : {-1e6, -50.0, -1.0, 0.0, 1.0, 50.0, 1e6}) {
      const double s = shape_sigmoid(raw);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      CHECK(std::isfinite(s));
    }
    CHECK(shape_sigmoid(-1e6) == doctest::Approx(0.0));
    CHECK(shape_sigmoid(1e6) == doctest::Approx(1.0));
    CHECK(shape_sigmoid(0.1) > 0.0);
    CHECK(shape_sigmoid(-0.1) < 1.0);
  }

  TEST_CASE("token signal of three zero rewards aggregates to 1.5 under sigmoid") {
    const Trajectory traj = tokens_of({1, 2, 3});
    const RewardSignal sig{"g", Density::Token, {0.0, 0.0, 0.0}};
    CHECK(aggregate_signal(sig, traj, Shaping::Sigmoid) == doctest::Approx(1.5));
  }

  TEST_CASE("sequence signal aggregates to its shaped scalar") {
    const Trajectory traj = tokens_of({1});
    const RewardSignal sig{"s", Density::Sequence, {0.5}};
    CHECK(aggregate_signal(sig, traj, Shaping::Sigmoid) ==
          doctest::Approx(0.62245933120185459).epsilon(1e-12));
  }

  TEST_CASE("unshaped segment values cancel") {
    Trajectory traj = tokens_of({1, 2, 3, 4});
    traj.segments = {{0, 2}, {2, 4}};
    const RewardSignal sig{"seg", Density::Segment, {0.5, -0.5}};
    CHECK(aggregate_signal(sig, traj, Shaping::None) == doctest::Approx(0.0));
  }

  TEST_CASE("aggregate rejects a signal that does not match the trajectory") {
    const Trajectory traj = tokens_of({1, 2});
    const RewardSignal sig{"g", Density::Token, {0.0}};
    CHECK_THROWS_AS(aggregate_signal(sig, traj, Shaping::Sigmoid), Error);
  }

  TEST_CASE("shaped token aggregate of n tokens stays inside (0, n)") {
    Rng rng = make_rng(21, "shaping-positivity");
    for (int rep = 0; rep < 200; ++rep) {
      const int n = 1 + static_cast<int>(rng() % 16);
      Trajectory traj;
      traj.tokens.assign(static_cast<std::size_t>(n), 1);
      RewardSignal sig{"g", Density::Token, {}};
      for (int i = 0; i < n; ++i) sig.values.push_back(gaussian(rng, 20.0));
      const double agg = aggregate_signal(sig, traj, Shaping::Sigmoid);
      CHECK(agg > 0.0);
      CHECK(agg < static_cast<double>(n));
    }
  }

  TEST_CASE("below the threshold only the weighted holistic term remains") {
    const Trajectory traj = tokens_of({1});
    const RewardSignal sig{"style", Density::Sequence, {0.5}};
    const CombinedReward r =
        combine(0.4, std::vector<RewardSignal>{sig}, traj, one_aspect_config(0.6), unit_stats());
    CHECK_FALSE(r.gated);
    CHECK(r.final_reward == doctest::Approx(5.0 * 0.4));
    CHECK(r.aspect_contributions.at("style") == doctest::Approx(0.0));
  }

  TEST_CASE("a score exactly at the threshold is gated") {
    const Trajectory traj = tokens_of({1});
    const RewardSignal sig{"style", Density::Sequence, {0.5}};
    const CombinedReward r =
        combine(0.6, std::vector<RewardSignal>{sig}, traj, one_aspect_config(0.6), unit_stats());
    CHECK(r.gated);
    CHECK(r.aspect_contributions.at("style") > 0.0);
  }

  TEST_CASE("gated combination adds the weighted shaped aspect") {
    const Trajectory traj = tokens_of({1});
    const RewardSignal sig{"style", Density::Sequence, {0.5}};
    const CombinedReward r =
        combine(0.7, std::vector<RewardSignal>{sig}, traj, one_aspect_config(0.6), unit_stats());
    CHECK(r.gated);
    CHECK(r.final_reward == doctest::Approx(5.0 * 0.7 + 0.62245933120185459).epsilon(1e-12));
    CHECK(r.holistic_normalized == doctest::Approx(0.7));
  }

  TEST_CASE("the breakdown always reconciles with the final reward") {
    Rng rng = make_rng(22, "breakdown");
    for (int rep = 0; rep < 300; ++rep) {
      HierarchicalRewardConfig cfg = one_aspect_config(gaussian(rng, 1.0));
      cfg.aspect_weights["density"] = 0.5 + uniform01(rng);
      cfg.selected_aspects.push_back("density");

      Trajectory traj = oracle::random_trajectory(rng, 8, 12, 3);
      std::vector<RewardSignal> signals;
      signals.push_back({"style", Density::Sequence, {gaussian(rng, 2.0)}});
      RewardSignal dense{"density", Density::Token, {}};
      for (std::size_t i = 0; i < traj.tokens.size(); ++i)
        dense.values.push_back(gaussian(rng, 2.0));
      signals.push_back(dense);

      const CombinedReward r = combine(gaussian(rng, 1.5), signals, traj, cfg, unit_stats());
      double sum = cfg.holistic_weight * r.holistic_normalized;
      for (const auto& [name, c] : r.aspect_contributions) {
        sum += c;
        if (!r.gated) CHECK(c == 0.0);
      }
      CHECK(r.final_reward == doctest::Approx(sum).epsilon(1e-12));
      CHECK(r.gated == (r.holistic_normalized >= cfg.threshold));
    }
  }

  TEST_CASE("with no selected aspects the combination is holistic-only scoring") {
    Rng rng = make_rng(23, "holistic-only-equivalence");
    HierarchicalRewardConfig cfg;
    cfg.threshold = 0.3;
    cfg.holistic_weight = 5.0;
    const Trajectory traj = tokens_of({1, 2});
    for (int rep = 0; rep < 200; ++rep) {
      const double raw = gaussian(rng, 2.0);
      const CombinedReward r = combine(raw, {}, traj, cfg, unit_stats());
      CHECK(r.final_reward == doctest::Approx(cfg.holistic_weight * raw).epsilon(1e-12));
      CHECK(r.aspect_contributions.empty());
    }
  }

  TEST_CASE("final reward is nondecreasing in the holistic score with aspects fixed") {
    Rng rng = make_rng(24, "gate-monotonicity");
    const Trajectory traj = tokens_of({1});
    const std::vector<RewardSignal> signals{{"style", Density::Sequence, {0.8}}};
    const HierarchicalRewardConfig cfg = one_aspect_config(0.2);
    double prev = -1e300;
    for (double z = -3.0; z <= 3.0; z += 0.01) {
      const double f = combine(z, signals, traj, cfg, unit_stats()).final_reward;
      CHECK(f >= prev);
      prev = f;
    }
  }

  TEST_CASE("a gated trajectory always beats an ungated one under sigmoid shaping") {
    // Spot check of the ordering guarantee; the acceptance suite runs the
    // full randomized sweep.
    Rng rng = make_rng(25, "dominance");
    for (int rep = 0; rep < 500; ++rep) {
      HierarchicalRewardConfig cfg = one_aspect_config(gaussian(rng, 1.0));
      cfg.aspect_weights["style"] = 0.1 + 4.0 * uniform01(rng);
      Trajectory traj = oracle::random_trajectory(rng, 8, 10, 4);
      const std::vector<RewardSignal> signals{{"style", Density::Sequence, {gaussian(rng, 3.0)}}};

      const double za = cfg.threshold + 2.0 * uniform01(rng);
      const double zb = cfg.threshold - 1e-9 - 2.0 * uniform01(rng);
      const CombinedReward a = combine(za, signals, traj, cfg, unit_stats());
      const CombinedReward b = combine(zb, signals, traj, cfg, unit_stats());
      REQUIRE(a.gated);
      REQUIRE_FALSE(b.gated);
      CHECK(a.final_reward > b.final_reward);
    }
  }

  TEST_CASE("invalid configurations are rejected") {
    HierarchicalRewardConfig cfg = one_aspect_config(0.0);

    SUBCASE("non-positive holistic weight") {
      cfg.holistic_weight = 0.0;
      CHECK_THROWS_AS(validate_reward_config(cfg), ConfigError);
    }
    SUBCASE("non-positive aspect weight") {
      cfg.aspect_weights["style"] = -1.0;
      CHECK_THROWS_AS(validate_reward_config(cfg), ConfigError);
    }
    SUBCASE("selected aspect without a weight") {
      cfg.selected_aspects.push_back("missing");
      CHECK_THROWS_AS(validate_reward_config(cfg), ConfigError);
    }
    SUBCASE("duplicated selected aspect") {
      cfg.selected_aspects.push_back("style");
      CHECK_THROWS_AS(validate_reward_config(cfg), ConfigError);
    }
    SUBCASE("non-finite threshold") {
      cfg.threshold = std::numeric_limits<double>::quiet_NaN();
      CHECK_THROWS_AS(validate_reward_config(cfg), ConfigError);
    }
  }

  TEST_CASE("combine rejects corrupted inputs") {
    const Trajectory traj = tokens_of({1});
    const HierarchicalRewardConfig cfg = one_aspect_config(0.0);
    const std::vector<RewardSignal> signals{{"style", Density::Sequence, {0.5}}};
    CHECK_THROWS_AS(
        combine(std::numeric_limits<double>::quiet_NaN(), signals, traj, cfg, unit_stats()),
        Error);
    CHECK_THROWS_AS(combine(1.0, {}, traj, cfg, unit_stats()), Error);
  }

  TEST_CASE("per-token rewards place token-dense aspects on their own positions") {
    Trajectory traj = tokens_of({1, 2, 3});
    HierarchicalRewardConfig cfg;
    cfg.threshold = -10.0;
    cfg.holistic_weight = 5.0;
    cfg.aspect_weights["dense"] = 2.0;
    cfg.selected_aspects = {"dense"};
    const std::vector<RewardSignal> signals{{"dense", Density::Token, {0.0, -1.0, 0.0}}};

    const CombinedReward combined = combine(1.0, signals, traj, cfg, unit_stats());
    const std::vector<double> per_token = per_token_rewards(combined, signals, traj, cfg);
    REQUIRE(per_token.size() == 3);
    CHECK(per_token[0] == doctest::Approx(2.0 * 0.5));
    CHECK(per_token[1] == doctest::Approx(2.0 * 0.26894142136999510));
    // Terminal token: its own shaped reward plus the holistic term.
    CHECK(per_token[2] ==
          doctest::Approx(combined.final_reward - per_token[0] - per_token[1]));
    const double total = std::accumulate(per_token.begin(), per_token.end(), 0.0);
    CHECK(total == doctest::Approx(combined.final_reward).epsilon(1e-12));
  }

  TEST_CASE("per-token rewards sum to the combined reward across densities") {
    Rng rng = make_rng(26, "per-token-sum");
    for (int rep = 0; rep < 200; ++rep) {
      Trajectory traj = oracle::random_trajectory(rng, 8, 12, 3);
      HierarchicalRewardConfig cfg;
      cfg.threshold = gaussian(rng, 1.0);
      cfg.holistic_weight = 5.0;
      cfg.aspect_weights = {{"dense", 1.5}, {"seg", 0.5}, {"whole", 2.0}};
      cfg.selected_aspects = {"dense", "seg", "whole"};

      std::vector<RewardSignal> signals;
      RewardSignal dense{"dense", Density::Token, {}};
      for (std::size_t i = 0; i < traj.tokens.size(); ++i)
        dense.values.push_back(gaussian(rng, 1.0));
      signals.push_back(dense);
      RewardSignal seg{"seg", Density::Segment, {}};
      for (std::size_t i = 0; i < traj.segments.size(); ++i)
        seg.values.push_back(gaussian(rng, 1.0));
      signals.push_back(seg);
      signals.push_back({"whole", Density::Sequence, {gaussian(rng, 1.0)}});

      const CombinedReward combined =
          combine(gaussian(rng, 1.5), signals, traj, cfg, unit_stats());
      const std::vector<double> per_token = per_token_rewards(combined, signals, traj, cfg);
      REQUIRE(per_token.size() == traj.tokens.size());
      const double total = std::accumulate(per_token.begin(), per_token.end(), 0.0);
      CHECK(total == doctest::Approx(combined.final_reward).epsilon(1e-9));
    }
  }
}
