#include <map>

#include "doctest.h"

#include "helpers.hpp"
#include "ra/error.hpp"

using namespace ra;
using testing::kS3Pending;
using testing::kS3Unsafe;

namespace {

// Exhaustive expectation over base-state paths under the lifted policy,
// independent of the augmented kernel and backward induction.
ValuePair enumerate_paths(const FiniteMdp& mdp, const ReachAvoidSpec& spec, const MarkovPolicy& aug_policy) {
  const LiftedPolicy lifted = lift_policy(aug_policy, spec);
  ValuePair out;
  std::vector<StateId> path{mdp.initial_state()};
  auto rec = [&](auto&& self, double prob, double reward) -> void {
    const int t = static_cast<int>(path.size()) - 1;
    if (t == mdp.horizon()) {
      out.reward += prob * (reward + mdp.terminal_reward(path.back()));
      out.constraint += satisfies_reach_avoid(path, spec) ? prob : 0.0;
      return;
    }
    const auto pi = lifted.action_distribution(path);
    for (int a = 0; a < mdp.num_actions(); ++a) {
      if (pi[a] == 0.0) continue;
      const double r = mdp.stage_reward(t, path.back(), a);
      for (int next = 0; next < mdp.num_states(); ++next) {
        const double p = mdp.transition(path.back(), a, next);
        if (p == 0.0) continue;
        path.push_back(next);
        self(self, prob * pi[a] * p, reward + r);
        path.pop_back();
      }
    }
  };
  rec(rec, 1.0, 0.0);
  return out;
}

MarkovPolicy random_markov(int H, int N, int A, RandomStream& rng) {
  MarkovPolicy p(H, N, A);
  for (int t = 0; t < H; ++t) {
    for (int s = 0; s < N; ++s) {
      auto probs = p.probs(t, s);
      double z = 0.0;
      for (int a = 0; a < A; ++a) z += probs[a] = -std::log(1.0 - rng.uniform());
      for (int a = 0; a < A; ++a) probs[a] /= z;
    }
  }
  return p;
}

GridWorldSpec small_grid() {
  GridWorldSpec g;
  g.width = 3;
  g.height = 2;
  g.slip = 0.2;
  g.horizon = 3;
  g.start = {0, 0};
  g.obstacles = {{1, 1}};
  g.goals = {{1, 2}};
  g.bonus = Cell{0, 2};
  return g;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("policy evaluation on the example") {
    const AugmentedMdp aug = testing::example1_aug();
    const ExactValues v = exact_policy_eval(aug, testing::example1_policy(0.8, 0.0));
    CHECK(v.v_r(0, aug.initial_id()) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(v.v_c(0, aug.initial_id()) == doctest::Approx(0.4).epsilon(1e-14));

    const ValuePair a0 = exact_initial_values(aug, testing::example1_policy(1.0, 1.0));
    CHECK(a0.constraint == 0.5);
    CHECK(a0.reward == 0.0);

    const ValuePair uniform = exact_initial_values(aug, MarkovPolicy::uniform(3, 18, 2));
    CHECK(uniform.constraint == 0.25);
    CHECK(uniform.reward == 0.5);
  }

  TEST_CASE("policy evaluation agrees with path enumeration") {
    RandomStream rng(3);
    const auto e = example1();
    const auto grid = gridworld(small_grid());
    for (const auto* inst : {&e, &grid}) {
      const AugmentedMdp aug = build_augmented_finite(inst->mdp, inst->spec);
      for (int trial = 0; trial < 20; ++trial) {
        const MarkovPolicy p = random_markov(aug.mdp.horizon(), aug.mdp.num_states(), aug.mdp.num_actions(), rng);
        const ValuePair exact = exact_initial_values(aug, p);
        const ValuePair brute = enumerate_paths(inst->mdp, inst->spec, p);
        CHECK(exact.reward == doctest::Approx(brute.reward).epsilon(1e-12));
        CHECK(exact.constraint == doctest::Approx(brute.constraint).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("values average Q and stay in range") {
    RandomStream rng(4);
    const AugmentedMdp aug = build_augmented_finite(gridworld(small_grid()).mdp, gridworld(small_grid()).spec);
    const MarkovPolicy p = random_markov(3, aug.mdp.num_states(), 4, rng);
    const ExactValues v = exact_policy_eval(aug, p);
    for (int t = 0; t < 3; ++t) {
      for (int s = 0; s < aug.mdp.num_states(); ++s) {
        double vr = 0.0;
        double vc = 0.0;
        for (int a = 0; a < 4; ++a) {
          vr += p.probs(t, s)[a] * v.q_r(t, s, a);
          vc += p.probs(t, s)[a] * v.q_c(t, s, a);
          CHECK(v.adv_r(t, s, a) == v.q_r(t, s, a) - v.v_r(t, s));
        }
        CHECK(v.v_r(t, s) == doctest::Approx(vr).epsilon(1e-14));
        CHECK(v.v_c(t, s) == doctest::Approx(vc).epsilon(1e-14));
        CHECK(v.v_c(t, s) >= 0.0);
        CHECK(v.v_c(t, s) <= 1.0 + 1e-15);
      }
    }
  }

  TEST_CASE("dimension mismatch is rejected") {
    const AugmentedMdp aug = testing::example1_aug();
    CHECK_THROWS_AS(exact_policy_eval(aug, MarkovPolicy::uniform(3, 6, 2)), Error);
    const std::vector<double> short_c(5, 0.0);
    CHECK_THROWS_AS(exact_policy_eval(aug.mdp, MarkovPolicy::uniform(3, 18, 2), short_c), Error);
  }

  TEST_CASE("occupancy on the example") {
    const AugmentedMdp aug = testing::example1_aug();
    const MarkovPolicy p = testing::example1_policy(0.8, 0.3);
    const OccupancyMeasure d = exact_occupancy(aug.mdp, p);
    CHECK(d.at(0, aug.initial_id(), 0) == 0.5);
    CHECK(d.at(0, aug.initial_id(), 1) == 0.5);
    CHECK(d.state_mass(2, kS3Pending) == 0.5);
    CHECK(d.state_mass(2, kS3Unsafe) == 0.5);
    CHECK(d.at(2, kS3Pending, 0) == doctest::Approx(0.4));
    CHECK(d.at(2, kS3Unsafe, 1) == doctest::Approx(0.35));
  }

  TEST_CASE("occupancy conserves mass and is consistent with values") {
    RandomStream rng(5);
    const auto grid = gridworld(small_grid());
    const AugmentedMdp aug = build_augmented_finite(grid.mdp, grid.spec);
    const int N = aug.mdp.num_states();
    for (int trial = 0; trial < 5; ++trial) {
      const MarkovPolicy p = random_markov(3, N, 4, rng);
      const OccupancyMeasure d = exact_occupancy(aug.mdp, p);
      const ExactValues v = exact_policy_eval(aug, p);
      double reward_sum = 0.0;
      double q0 = 0.0;
      for (int t = 0; t < 3; ++t) {
        double total = 0.0;
        for (int s = 0; s < N; ++s)
          for (int a = 0; a < 4; ++a) {
            total += d.at(t, s, a);
            reward_sum += d.at(t, s, a) * aug.mdp.stage_reward(t, s, a);
            if (t == 0) q0 += d.at(0, s, a) * v.q_r(0, s, a);
          }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        if (t + 1 < 3) {
          // Flow: next-step state mass equals the pushforward of d_t.
          for (int j = 0; j < N; ++j) {
            double inflow = 0.0;
            for (int s = 0; s < N; ++s)
              for (int a = 0; a < 4; ++a) inflow += d.at(t, s, a) * aug.mdp.transition(s, a, j);
            CHECK(d.state_mass(t + 1, j) == doctest::Approx(inflow).epsilon(1e-12));
          }
        }
      }
      // Terminal term from the final-step pushforward.
      for (int s = 0; s < N; ++s)
        for (int a = 0; a < 4; ++a)
          for (int j = 0; j < N; ++j) reward_sum += d.at(2, s, a) * aug.mdp.transition(s, a, j) * aug.mdp.terminal_reward(j);
      const double v0 = v.v_r(0, aug.initial_id());
      CHECK(std::abs(v0 - q0) <= 1e-10);
      CHECK(std::abs(v0 - reward_sum) <= 1e-10);
    }
  }

  TEST_CASE("exact gradient matches finite differences") {
    const AugmentedMdp aug = testing::example1_aug();
    SoftmaxPolicy p = SoftmaxPolicy::tabular(3, 18, 2);
    RandomStream rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> theta(p.dimension(), 0.0);
      if (trial > 0)
        for (double& x : theta) x = 4.0 * rng.uniform() - 2.0;
      p.set_params(theta);
      const PolicyGradient g = exact_policy_gradient(aug, p);
      const auto fr = [&](const std::vector<double>& x) { return exact_initial_values(aug, p.with_params(x).table()).reward; };
      const auto fc = [&](const std::vector<double>& x) { return exact_initial_values(aug, p.with_params(x).table()).constraint; };
      CHECK(testing::relative_error(g.reward, testing::central_difference(fr, theta, 1e-5)) < 1e-6);
      CHECK(testing::relative_error(g.constraint, testing::central_difference(fc, theta, 1e-5)) < 1e-6);
    }
  }

  TEST_CASE("constant reward channel has zero gradient") {
    auto e = example1();
    for (int s = 0; s < 6; ++s) e.mdp.set_terminal_reward(s, 1.0);
    const AugmentedMdp aug = build_augmented_finite(e.mdp, e.spec);
    SoftmaxPolicy p = SoftmaxPolicy::tabular(3, 18, 2);
    std::vector<double> theta(p.dimension(), 0.3);
    theta[p.param_index(2, kS3Pending, 0)] = 1.1;
    p.set_params(theta);
    for (double x : exact_policy_gradient(aug, p).reward) CHECK(std::abs(x) <= 1e-15);
  }

  TEST_CASE("constrained optimum on the example") {
    const AugmentedMdp aug = testing::example1_aug();
    const CmdpSolution s4 = solve_cmdp(aug, 0.4);
    CHECK(s4.value == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(s4.constraint == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(s4.lambda >= 0.0);
    REQUIRE(s4.policies.size() == 2);
    CHECK(s4.weights[0] + s4.weights[1] == doctest::Approx(1.0));
    CHECK(solve_cmdp(aug, 0.0).value == 1.0);
    const CmdpSolution s5 = solve_cmdp(aug, 0.5);
    CHECK(s5.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s5.constraint >= 0.5 - 1e-9);
    try {
      solve_cmdp(aug, 0.9);
      FAIL("expected infeasibility");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Infeasible);
    }
  }

  TEST_CASE("mixture occupancy induces a Markov policy with the same values") {
    const AugmentedMdp aug = testing::example1_aug();
    for (double delta : {0.1, 0.25, 0.4, 0.45}) {
      const CmdpSolution sol = solve_cmdp(aug, delta);
      const ValuePair v = exact_initial_values(aug, sol.markov_policy(aug));
      CHECK(v.reward == doctest::Approx(sol.value).epsilon(1e-12));
      CHECK(v.constraint == doctest::Approx(sol.constraint).epsilon(1e-12));
      CHECK(v.constraint >= delta - 1e-9);
    }
  }

  TEST_CASE("dual bisection agrees with enumeration of deterministic policies") {
    const auto grid = gridworld(small_grid());
    const AugmentedMdp grid_aug = build_augmented_finite(grid.mdp, grid.spec);
    const AugmentedMdp ex_aug = testing::example1_aug();
    for (const AugmentedMdp* aug : {&ex_aug, &grid_aug}) {
      const double vmax = max_constraint_value(*aug);
      for (double frac : {0.0, 0.3, 0.6, 0.9, 1.0}) {
        const double delta = frac * vmax;
        const CmdpSolution sol = solve_cmdp(*aug, delta);
        const BruteForceResult brute = brute_force_cmdp(*aug, delta);
        REQUIRE(brute.feasible);
        CHECK(sol.value == doctest::Approx(brute.value).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("optimum bounds random feasible policies") {
    const AugmentedMdp aug = testing::example1_aug();
    const double best = solve_cmdp(aug, 0.4).value;
    RandomStream rng(8);
    int feasible = 0;
    for (int i = 0; i < 100000; ++i) {
      const MarkovPolicy p = testing::example1_policy(rng.uniform(), rng.uniform());
      const ValuePair v = exact_initial_values(aug, p);
      if (v.constraint < 0.4) continue;
      ++feasible;
      REQUIRE(v.reward <= best + 1e-9);
    }
    CHECK(feasible > 1000);
  }

  TEST_CASE("maximal reach-avoid probability") {
    const AugmentedMdp aug = testing::example1_aug();
    CHECK(max_constraint_value(aug) == 0.5);
    const SlaterReport ok = slater_check(aug, 0.4);
    CHECK(ok.satisfied);
    CHECK(*ok.margin == doctest::Approx(0.1));
    CHECK_FALSE(slater_check(aug, 0.6).satisfied);
    auto e = example1();
    e.mdp.set_initial_state(4);
    CHECK(max_constraint_value(build_augmented_finite(e.mdp, e.spec)) == 1.0);
  }

  TEST_CASE("greedy policy breaks ties toward the lowest action") {
    const AugmentedMdp aug = testing::example1_aug();
    const DeterministicPolicy p = greedy_lagrangian_policy(aug, 0.0);
    CHECK(p.at(0, aug.initial_id()) == 0);
    CHECK(p.at(2, kS3Pending) == 1);
    const DeterministicPolicy q = greedy_lagrangian_policy(aug, 2.0);
    CHECK(q.at(2, kS3Pending) == 0);
    CHECK(q.at(2, kS3Unsafe) == 1);
  }

  TEST_CASE("state-Markov search on the example") {
    const auto e = example1();
    const StateMarkovSearch r = brute_force_state_markov(e.mdp, e.spec, 0.4, 10);
    REQUIRE(r.best.feasible);
    CHECK(r.best.value == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.best.value < 0.6);
    CHECK(r.best.constraint >= 0.4 - 1e-12);
  }

  TEST_CASE("Fisher matrix of a single visited state") {
    FiniteMdp mdp(1, 2, 1);
    mdp.set_transition(0, 0, 0, 1.0);
    mdp.set_transition(0, 1, 0, 1.0);
    const std::vector<StateId> safe{0};
    const std::vector<StateId> goal;
    const AugmentedMdp aug = build_augmented_finite(mdp, ReachAvoidSpec::from_sets(1, safe, goal));
    const FisherReport r = fisher_report(aug, SoftmaxPolicy::tabular(1, 3, 2));
    REQUIRE(r.mu_f.has_value());
    CHECK(*r.mu_f == doctest::Approx(0.5).epsilon(1e-12));
    const auto& F = r.matrices[0];
    const int B = 6;
    const int v = aug.initial_id();
    CHECK(F[2 * v * B + 2 * v] == doctest::Approx(0.25));
    CHECK(F[2 * v * B + 2 * v + 1] == doctest::Approx(-0.25));
    for (int i = 0; i < B; ++i) {
      if (i / 2 == v) continue;
      for (int j = 0; j < B; ++j) {
        CHECK(F[i * B + j] == 0.0);
        CHECK(F[j * B + i] == 0.0);
      }
    }
  }

  TEST_CASE("Fisher matrices are positive semidefinite") {
    RandomStream rng(9);
    const auto grid = gridworld(small_grid());
    const AugmentedMdp aug = build_augmented_finite(grid.mdp, grid.spec);
    SoftmaxPolicy p = SoftmaxPolicy::tabular(3, aug.mdp.num_states(), 4);
    std::vector<double> theta(p.dimension());
    for (double& x : theta) x = 2.0 * rng.uniform() - 1.0;
    p.set_params(theta);
    const FisherReport r = fisher_report(aug, p);
    for (const auto& ev : r.eigenvalues)
      for (double x : ev) CHECK(x >= -1e-12);
    CHECK(r.mu_f.has_value());
  }

  TEST_CASE("transfer error of the tabular class vanishes") {
    const AugmentedMdp aug = testing::example1_aug();
    const OccupancyMeasure d_star = solve_cmdp(aug, 0.4).occupancy(aug);
    RandomStream rng(10);
    SoftmaxPolicy p = SoftmaxPolicy::tabular(3, 18, 2);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> theta(p.dimension());
      for (double& x : theta) x = 3.0 * rng.uniform() - 1.5;
      p.set_params(theta);
      const TransferErrorReport r = transfer_error_report(aug, p, d_star);
      CHECK(r.max_residual <= 1e-8);
      for (const auto& row : r.residual)
        for (double x : row) CHECK(x >= 0.0);
    }
    const TransferBiasEstimate est = estimate_transfer_bias(aug, p, d_star, 0.4, 20, 1);
    CHECK(est.samples == 20);
    CHECK(est.epsilon_bias <= 1e-8);
  }

  TEST_CASE("zero advantage gives zero residual") {
    auto e = example1();
    e.mdp.set_transition(3, 1, 5, 0.0);
    e.mdp.set_transition(3, 1, 4, 1.0);
    e.mdp.set_terminal_reward(5, 0.0);
    const AugmentedMdp aug = build_augmented_finite(e.mdp, e.spec);
    const SoftmaxPolicy tied = SoftmaxPolicy::tied(3, std::vector<int>(18, 0), 2);
    const OccupancyMeasure d = exact_occupancy(aug.mdp, MarkovPolicy::uniform(3, 18, 2));
    CHECK(transfer_error_report(aug, tied, d).max_residual == 0.0);
  }

  TEST_CASE("tying parameters across the aux component leaves a positive residual") {
    const AugmentedMdp aug = testing::example1_aug();
    const OccupancyMeasure d_star = solve_cmdp(aug, 0.4).occupancy(aug);
    std::vector<int> groups(18);
    for (int id = 0; id < 18; ++id) groups[id] = id / kAuxCount;
    const SoftmaxPolicy tied = SoftmaxPolicy::tied(3, groups, 2);
    CHECK(transfer_error_report(aug, tied, d_star).max_residual > 1e-3);
  }
}
