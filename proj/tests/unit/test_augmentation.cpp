#include "doctest.h"

#include "helpers.hpp"
#include "ra/error.hpp"

using namespace ra;
using testing::aug_id;

TEST_SUITE("augmentation") {
  TEST_CASE("aux update rules") {
    const auto e = example1();
    for (int s = 0; s < 6; ++s) {
      CHECK(aux_update(s, Aux::Goal, e.spec) == Aux::Goal);
      CHECK(aux_update(s, Aux::Unsafe, e.spec) == Aux::Unsafe);
    }
    CHECK(aux_update(1, Aux::Pending, e.spec) == Aux::Pending);
    CHECK(aux_update(3, Aux::Pending, e.spec) == Aux::Pending);
    CHECK(aux_update(4, Aux::Pending, e.spec) == Aux::Goal);
    CHECK(aux_update(2, Aux::Pending, e.spec) == Aux::Unsafe);
    CHECK(aux_update(5, Aux::Pending, e.spec) == Aux::Unsafe);
  }

  TEST_CASE("initial aux") {
    const auto e = example1();
    CHECK(initial_aux(0, e.spec) == Aux::Pending);
    CHECK(initial_aux(4, e.spec) == Aux::Goal);
    CHECK(initial_aux(2, e.spec) == Aux::Unsafe);
  }

  TEST_CASE("valid aux transitions") {
    const auto e = example1();
    CHECK(valid_aux_transition(Aux::Unsafe, Aux::Unsafe, 3, e.spec));
    CHECK_FALSE(valid_aux_transition(Aux::Unsafe, Aux::Pending, 3, e.spec));
    CHECK(valid_aux_transition(Aux::Goal, Aux::Goal, 2, e.spec));
    CHECK_FALSE(valid_aux_transition(Aux::Goal, Aux::Unsafe, 2, e.spec));
    CHECK(valid_aux_transition(Aux::Pending, Aux::Goal, 4, e.spec));
    CHECK_FALSE(valid_aux_transition(Aux::Pending, Aux::Goal, 3, e.spec));
    CHECK(valid_aux_transition(Aux::Pending, Aux::Pending, 3, e.spec));
    CHECK(valid_aux_transition(Aux::Pending, Aux::Unsafe, 2, e.spec));
  }

  TEST_CASE("state ids put the aux component fastest") {
    CHECK(AugState{3, Aux::Pending}.id() == 10);
    CHECK(AugState::from_id(10) == AugState{3, Aux::Pending});
    for (int id = 0; id < 18; ++id) CHECK(AugState::from_id(id).id() == id);
  }

  TEST_CASE("hand-traced rollouts on the example") {
    const auto e = example1();
    const AugmentedEnv env(e.mdp, e.spec);
    MarkovPolicy always_a0(3, 18, 2);
    for (int t = 0; t < 3; ++t)
      for (int id = 0; id < 18; ++id) always_a0.probs(t, id)[0] = 1.0;
    bool saw_s1 = false;
    bool saw_s2 = false;
    for (std::uint64_t seed = 0; seed < 64 && !(saw_s1 && saw_s2); ++seed) {
      RandomStream rng(seed);
      const AugTrajectory traj = augmented_rollout(env, always_a0, rng);
      std::vector<Aux> ys;
      for (const auto& st : traj.states) ys.push_back(st.y);
      if (traj.states[1].s == 1) {
        saw_s1 = true;
        CHECK(ys == std::vector<Aux>{Aux::Pending, Aux::Pending, Aux::Pending, Aux::Goal});
        CHECK(traj.constraint == 1);
      } else {
        saw_s2 = true;
        CHECK(ys == std::vector<Aux>{Aux::Pending, Aux::Unsafe, Aux::Unsafe, Aux::Unsafe});
        CHECK(traj.constraint == 0);
      }
      CHECK(terminal_constraint(traj) == traj.constraint);
    }
    CHECK(saw_s1);
    CHECK(saw_s2);
  }

  TEST_CASE("start in the goal stays satisfied") {
    auto e = example1();
    e.mdp.set_initial_state(4);
    const AugmentedEnv env(e.mdp, e.spec);
    RandomStream rng(3);
    const auto traj = augmented_rollout(env, MarkovPolicy::uniform(3, 18, 2), rng);
    for (const auto& st : traj.states) CHECK(st.y == Aux::Goal);
    CHECK(traj.constraint == 1);
  }

  TEST_CASE("terminal constraint matches the reach-avoid predicate") {
    GridWorldSpec g;
    g.slip = 0.2;
    g.horizon = 8;
    g.goals = {{2, 2}};
    for (const auto& inst : {example1(), gridworld(g)}) {
      const AugmentedEnv env(inst.mdp, inst.spec);
      const auto uniform = MarkovPolicy::uniform(env.horizon(), env.num_aug_states(), env.num_actions());
      int mismatches = 0;
      int satisfied = 0;
      AugTrajectory traj;
      for (int i = 0; i < 10000; ++i) {
        RandomStream rng(derive_seed(99, 0, static_cast<std::uint64_t>(i)));
        augmented_rollout_into(env, uniform, rng, traj);
        const bool sat = satisfies_reach_avoid(traj.base_states(), inst.spec);
        mismatches += (traj.constraint == 1) != sat ? 1 : 0;
        satisfied += sat ? 1 : 0;
      }
      CHECK(mismatches == 0);
      CHECK(satisfied > 0);
      CHECK(satisfied < 10000);
    }
  }

  TEST_CASE("aux absorption along sampled paths") {
    GridWorldSpec g;
    g.slip = 0.2;
    g.horizon = 10;
    const auto inst = gridworld(g);
    const AugmentedEnv env(inst.mdp, inst.spec);
    const auto uniform = MarkovPolicy::uniform(env.horizon(), env.num_aug_states(), env.num_actions());
    for (int i = 0; i < 2000; ++i) {
      RandomStream rng(derive_seed(5, 1, static_cast<std::uint64_t>(i)));
      const auto traj = augmented_rollout(env, uniform, rng);
      for (std::size_t t = 1; t < traj.states.size(); ++t) {
        const Aux prev = traj.states[t - 1].y;
        if (prev != Aux::Pending) REQUIRE(traj.states[t].y == prev);
      }
    }
  }

  TEST_CASE("explicit augmented kernel") {
    const auto e = example1();
    const AugmentedMdp aug = build_augmented_finite(e.mdp, e.spec);
    CHECK(aug.mdp.num_states() == 18);
    CHECK(validate_mdp(aug.mdp, ReachAvoidSpec{std::vector<bool>(18, true), std::vector<bool>(18, false)}).empty());
    CHECK(aug.mdp.transition(aug_id(3, Aux::Pending), 0, aug_id(4, Aux::Goal)) == 1.0);
    CHECK(aug.mdp.transition(aug_id(3, Aux::Pending), 1, aug_id(5, Aux::Unsafe)) == 1.0);
    CHECK(aug.initial_id() == aug_id(0, Aux::Pending));
    for (int s = 0; s < 6; ++s) {
      for (int a = 0; a < 2; ++a) {
        const auto row = aug.mdp.row(aug_id(s, Aux::Unsafe), a);
        for (int j = 0; j < 18; ++j)
          if (row[j] > 0.0) CHECK(AugState::from_id(j).y == Aux::Unsafe);
      }
    }
    for (int id = 0; id < 18; ++id) {
      CHECK(aug.terminal_constraint[id] == (AugState::from_id(id).y == Aux::Goal ? 1.0 : 0.0));
    }
  }

  TEST_CASE("marginalizing the aux component recovers the base kernel") {
    GridWorldSpec g;
    g.slip = 0.3;
    const auto inst = gridworld(g);
    const AugmentedMdp aug = build_augmented_finite(inst.mdp, inst.spec);
    const int S = inst.mdp.num_states();
    for (int s = 0; s < S; ++s) {
      for (int y = 0; y < kAuxCount; ++y) {
        const int from = AugState{s, static_cast<Aux>(y)}.id();
        for (int a = 0; a < 4; ++a) {
          for (int next = 0; next < S; ++next) {
            double total = 0.0;
            for (int yn = 0; yn < kAuxCount; ++yn)
              total += aug.mdp.transition(from, a, AugState{next, static_cast<Aux>(yn)}.id());
            REQUIRE(total == inst.mdp.transition(s, a, next));
          }
        }
      }
    }
  }

  TEST_CASE("lifted policy reads the aux value from the history") {
    const auto e = example1();
    const MarkovPolicy aug_policy = testing::example1_policy(0.8, 0.0);
    const LiftedPolicy lifted = lift_policy(aug_policy, e.spec);
    const std::vector<StateId> via_s1{0, 1, 3};
    const std::vector<StateId> via_s2{0, 2, 3};
    CHECK(lifted.belief(via_s1) == Aux::Pending);
    CHECK(lifted.belief(via_s2) == Aux::Unsafe);
    CHECK(lifted.action_distribution(via_s1)[0] == doctest::Approx(0.8));
    CHECK(lifted.action_distribution(via_s2)[1] == doctest::Approx(1.0));
  }

  TEST_CASE("lifted and augmented simulation share paths seed for seed") {
    const auto e = example1();
    const AugmentedEnv env(e.mdp, e.spec);
    const MarkovPolicy aug_policy = testing::example1_policy(0.3, 0.6);
    const LiftedPolicy lifted = lift_policy(aug_policy, e.spec);
    for (std::uint64_t i = 0; i < 1000; ++i) {
      RandomStream r1(i);
      RandomStream r2(i);
      REQUIRE(augmented_rollout(env, aug_policy, r1).base_states() == lifted_rollout(e.mdp, lifted, r2).states);
    }
  }

  TEST_CASE("lifted and augmented terminal histograms agree within 3 sigma") {
    GridWorldSpec g;
    g.slip = 0.2;
    g.horizon = 5;
    const auto inst = gridworld(g);
    const AugmentedEnv env(inst.mdp, inst.spec);
    MarkovPolicy policy(env.horizon(), env.num_aug_states(), 4);
    RandomStream prng(17);
    for (int t = 0; t < env.horizon(); ++t) {
      for (int id = 0; id < env.num_aug_states(); ++id) {
        auto p = policy.probs(t, id);
        double z = 0.0;
        for (int a = 0; a < 4; ++a) z += p[a] = 0.1 + prng.uniform();
        for (int a = 0; a < 4; ++a) p[a] /= z;
      }
    }
    const LiftedPolicy lifted = lift_policy(policy, inst.spec);
    const int n = 100000;
    const int S = inst.mdp.num_states();
    std::vector<int> h_aug(S, 0);
    std::vector<int> h_lift(S, 0);
    for (int i = 0; i < n; ++i) {
      RandomStream r1(derive_seed(1, 0, static_cast<std::uint64_t>(i)));
      RandomStream r2(derive_seed(2, 0, static_cast<std::uint64_t>(i)));
      ++h_aug[augmented_rollout(env, policy, r1).states.back().s];
      ++h_lift[lifted_rollout(inst.mdp, lifted, r2).states.back()];
    }
    for (int s = 0; s < S; ++s) {
      const double p1 = h_aug[s] / static_cast<double>(n);
      const double p2 = h_lift[s] / static_cast<double>(n);
      const double pooled = 0.5 * (p1 + p2);
      const double sd = std::sqrt(2.0 * pooled * (1.0 - pooled) / n);
      CHECK(std::abs(p1 - p2) <= 3.0 * sd + 1e-12);
    }
  }

  TEST_CASE("policy shape mismatch is rejected") {
    const auto e = example1();
    const AugmentedEnv env(e.mdp, e.spec);
    RandomStream rng(0);
    CHECK_THROWS_AS(augmented_rollout(env, MarkovPolicy::uniform(2, 18, 2), rng), Error);
  }
}
