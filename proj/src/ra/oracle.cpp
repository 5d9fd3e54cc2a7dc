#include "ra/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "ra/error.hpp"

namespace ra {

namespace {

/// Nonzero transitions of every (s, a) row.
struct SparseKernel {
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> start;  // (S*A + 1) offsets
  std::vector<int> next;
  std::vector<double> prob;

  explicit SparseKernel(const FiniteMdp& mdp) : num_states(mdp.num_states()), num_actions(mdp.num_actions()) {
    start.reserve(static_cast<std::size_t>(num_states) * num_actions + 1);
    start.push_back(0);
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) {
        const auto row = mdp.row(s, a);
        for (int j = 0; j < num_states; ++j) {
          if (row[j] != 0.0) {
            next.push_back(j);
            prob.push_back(row[j]);
          }
        }
        start.push_back(static_cast<int>(next.size()));
      }
    }
  }

  template <class Fn>
  double expect(int s, int a, Fn&& value_of) const {
    const int row = s * num_actions + a;
    double acc = 0.0;
    for (int k = start[row]; k < start[row + 1]; ++k) acc += prob[k] * value_of(next[k]);
    return acc;
  }

  template <class Fn>
  void for_each_successor(int s, int a, Fn&& fn) const {
    const int row = s * num_actions + a;
    for (int k = start[row]; k < start[row + 1]; ++k) fn(next[k], prob[k]);
  }
};

void check_policy_shape(const FiniteMdp& mdp, const MarkovPolicy& policy) {
  if (policy.horizon() != mdp.horizon() || policy.num_aug_states() != mdp.num_states() ||
      policy.num_actions() != mdp.num_actions()) {
    fail(ErrorCode::InvalidArgument, "policy dimensions do not match the MDP");
  }
}

ExactValues evaluate(const FiniteMdp& mdp, const SparseKernel& kernel, const MarkovPolicy& policy,
                     std::span<const double> terminal_constraint) {
  const int H = mdp.horizon();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  ExactValues values(H, S, A);
  for (int s = 0; s < S; ++s) {
    values.v_r(H, s) = mdp.terminal_reward(s);
    values.v_c(H, s) = terminal_constraint[s];
  }
  for (int t = H - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      const auto pi = policy.probs(t, s);
      double vr = 0.0;
      double vc = 0.0;
      for (int a = 0; a < A; ++a) {
        const double qr =
            mdp.stage_reward(t, s, a) + kernel.expect(s, a, [&](int j) { return values.v_r(t + 1, j); });
        const double qc = kernel.expect(s, a, [&](int j) { return values.v_c(t + 1, j); });
        values.q_r(t, s, a) = qr;
        values.q_c(t, s, a) = qc;
        vr += pi[a] * qr;
        vc += pi[a] * qc;
      }
      values.v_r(t, s) = vr;
      values.v_c(t, s) = vc;
    }
  }
  return values;
}

// Values at the initial state only, without storing Q.
ValuePair evaluate_initial(const FiniteMdp& mdp, const SparseKernel& kernel, const MarkovPolicy& policy,
                           std::span<const double> terminal_constraint, std::vector<double>& vr,
                           std::vector<double>& vc, std::vector<double>& nr, std::vector<double>& nc) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  vr.assign(S, 0.0);
  vc.assign(S, 0.0);
  for (int s = 0; s < S; ++s) {
    vr[s] = mdp.terminal_reward(s);
    vc[s] = terminal_constraint[s];
  }
  nr.assign(S, 0.0);
  nc.assign(S, 0.0);
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      const auto pi = policy.probs(t, s);
      double r = 0.0;
      double c = 0.0;
      for (int a = 0; a < A; ++a) {
        if (pi[a] == 0.0) continue;
        r += pi[a] * (mdp.stage_reward(t, s, a) + kernel.expect(s, a, [&](int j) { return vr[j]; }));
        c += pi[a] * kernel.expect(s, a, [&](int j) { return vc[j]; });
      }
      nr[s] = r;
      nc[s] = c;
    }
    std::swap(vr, nr);
    std::swap(vc, nc);
  }
  return {vr[mdp.initial_state()], vc[mdp.initial_state()]};
}

OccupancyMeasure occupancy(const FiniteMdp& mdp, const SparseKernel& kernel, const MarkovPolicy& policy) {
  const int H = mdp.horizon();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  OccupancyMeasure d(H, S, A);
  std::vector<double> mass(S, 0.0);
  std::vector<double> next_mass(S, 0.0);
  mass[mdp.initial_state()] = 1.0;
  for (int t = 0; t < H; ++t) {
    std::fill(next_mass.begin(), next_mass.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      if (mass[s] == 0.0) continue;
      const auto pi = policy.probs(t, s);
      for (int a = 0; a < A; ++a) {
        const double m = mass[s] * pi[a];
        d.at(t, s, a) = m;
        if (m == 0.0) continue;
        kernel.for_each_successor(s, a, [&](int j, double p) { next_mass[j] += m * p; });
      }
    }
    std::swap(mass, next_mass);
  }
  return d;
}

// Score of log pi_t(a|s) restricted to block t, as (local index, value)
// pairs; local indices are relative to the block offset.
void block_score(const SoftmaxPolicy& policy, int t, int s, int a, std::span<const double> probs,
                 std::vector<std::pair<int, double>>& out) {
  out.clear();
  const int offset = policy.layout().offset(t);
  for (int b = 0; b < policy.num_actions(); ++b) {
    out.emplace_back(policy.param_index(t, s, b) - offset, (b == a ? 1.0 : 0.0) - probs[b]);
  }
}

Eigen::MatrixXd fisher_block(const SoftmaxPolicy& policy, const MarkovPolicy& table, const OccupancyMeasure& d,
                             int t) {
  const int B = policy.layout().size(t);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(B, B);
  std::vector<std::pair<int, double>> g;
  for (int s = 0; s < d.num_states(); ++s) {
    for (int a = 0; a < d.num_actions(); ++a) {
      const double w = d.at(t, s, a);
      if (w == 0.0) continue;
      block_score(policy, t, s, a, table.probs(t, s), g);
      for (const auto& [i, gi] : g)
        for (const auto& [j, gj] : g) F(i, j) += w * gi * gj;
    }
  }
  return F;
}

std::vector<std::vector<int>> reachable_states(const FiniteMdp& mdp, const SparseKernel& kernel) {
  const int S = mdp.num_states();
  std::vector<std::vector<int>> reach(mdp.horizon());
  std::vector<char> cur(S, 0);
  cur[mdp.initial_state()] = 1;
  for (int t = 0; t < mdp.horizon(); ++t) {
    std::vector<char> nxt(S, 0);
    for (int s = 0; s < S; ++s) {
      if (!cur[s]) continue;
      reach[t].push_back(s);
      for (int a = 0; a < mdp.num_actions(); ++a) kernel.for_each_successor(s, a, [&](int j, double) { nxt[j] = 1; });
    }
    cur.swap(nxt);
  }
  return reach;
}

// Best value of a mixture of (constraint, reward) points subject to
// constraint >= delta: the upper concave envelope maximized over [delta, inf).
BruteForceResult best_mixture(std::vector<std::pair<double, double>> points, double delta) {
  BruteForceResult res;
  res.policies_evaluated = points.size();
  std::sort(points.begin(), points.end());
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : points) {
    while (!hull.empty() && hull.back().first == p.first && hull.back().second <= p.second) hull.pop_back();
    if (!hull.empty() && hull.back().first == p.first) continue;
    while (hull.size() >= 2) {
      const auto& o = hull[hull.size() - 2];
      const auto& m = hull.back();
      const double cross = (m.first - o.first) * (p.second - o.second) - (m.second - o.second) * (p.first - o.first);
      if (cross >= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(p);
  }
  constexpr double tol = 1e-12;
  double best = -INFINITY;
  double best_c = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (hull[i].first >= delta - tol && hull[i].second > best) {
      best = hull[i].second;
      best_c = hull[i].first;
    }
    if (i + 1 < hull.size() && hull[i].first < delta - tol && hull[i + 1].first > delta) {
      const double w = (delta - hull[i].first) / (hull[i + 1].first - hull[i].first);
      const double v = w * hull[i + 1].second + (1.0 - w) * hull[i].second;
      if (v > best) {
        best = v;
        best_c = delta;
      }
    }
  }
  if (std::isfinite(best)) {
    res.feasible = true;
    res.value = best;
    res.constraint = best_c;
  }
  return res;
}

double standard_normal(RandomStream& rng) {
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

ExactValues::ExactValues(int horizon, int num_states, int num_actions)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      v_r_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0),
      v_c_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0),
      q_r_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0),
      q_c_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0) {}

ExactValues exact_policy_eval(const FiniteMdp& mdp, const MarkovPolicy& policy,
                              std::span<const double> terminal_constraint) {
  check_policy_shape(mdp, policy);
  if (static_cast<int>(terminal_constraint.size()) != mdp.num_states()) {
    fail(ErrorCode::InvalidArgument, "terminal constraint vector does not match the MDP");
  }
  return evaluate(mdp, SparseKernel(mdp), policy, terminal_constraint);
}

OccupancyMeasure::OccupancyMeasure(int horizon, int num_states, int num_actions)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      d_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0) {}

double OccupancyMeasure::state_mass(int t, int s) const {
  double m = 0.0;
  for (int a = 0; a < num_actions_; ++a) m += at(t, s, a);
  return m;
}

OccupancyMeasure OccupancyMeasure::blend(const OccupancyMeasure& other, double w) const {
  OccupancyMeasure out = *this;
  for (std::size_t i = 0; i < d_.size(); ++i) out.d_[i] = w * d_[i] + (1.0 - w) * other.d_[i];
  return out;
}

OccupancyMeasure exact_occupancy(const FiniteMdp& mdp, const MarkovPolicy& policy) {
  check_policy_shape(mdp, policy);
  return occupancy(mdp, SparseKernel(mdp), policy);
}

ValuePair exact_initial_values(const AugmentedMdp& aug, const MarkovPolicy& policy) {
  check_policy_shape(aug.mdp, policy);
  std::vector<double> a, b, c, d;
  return evaluate_initial(aug.mdp, SparseKernel(aug.mdp), policy, aug.terminal_constraint, a, b, c, d);
}

PolicyGradient exact_policy_gradient(const AugmentedMdp& aug, const SoftmaxPolicy& policy) {
  const MarkovPolicy table = policy.table();
  check_policy_shape(aug.mdp, table);
  const SparseKernel kernel(aug.mdp);
  const ExactValues values = evaluate(aug.mdp, kernel, table, aug.terminal_constraint);
  const OccupancyMeasure d = occupancy(aug.mdp, kernel, table);

  PolicyGradient grad{std::vector<double>(policy.dimension(), 0.0), std::vector<double>(policy.dimension(), 0.0)};
  for (int t = 0; t < aug.mdp.horizon(); ++t) {
    for (int s = 0; s < aug.mdp.num_states(); ++s) {
      const auto probs = table.probs(t, s);
      for (int a = 0; a < aug.mdp.num_actions(); ++a) {
        const double w = d.at(t, s, a);
        if (w == 0.0) continue;
        policy.add_score(t, s, a, probs, w * values.q_r(t, s, a), grad.reward);
        policy.add_score(t, s, a, probs, w * values.q_c(t, s, a), grad.constraint);
      }
    }
  }
  return grad;
}

MarkovPolicy DeterministicPolicy::to_markov(int num_actions) const {
  MarkovPolicy p(horizon, num_states, num_actions);
  for (int t = 0; t < horizon; ++t)
    for (int s = 0; s < num_states; ++s) p.probs(t, s)[at(t, s)] = 1.0;
  return p;
}

OccupancyMeasure CmdpSolution::occupancy(const AugmentedMdp& aug) const {
  if (policies.empty()) fail(ErrorCode::InvalidArgument, "empty CMDP solution");
  const SparseKernel kernel(aug.mdp);
  const int A = aug.mdp.num_actions();
  OccupancyMeasure d = ra::occupancy(aug.mdp, kernel, policies[0].to_markov(A));
  if (policies.size() == 2) {
    d = d.blend(ra::occupancy(aug.mdp, kernel, policies[1].to_markov(A)), weights[0]);
  }
  return d;
}

MarkovPolicy CmdpSolution::markov_policy(const AugmentedMdp& aug) const {
  const OccupancyMeasure d = occupancy(aug);
  const int H = aug.mdp.horizon();
  const int S = aug.mdp.num_states();
  const int A = aug.mdp.num_actions();
  MarkovPolicy p(H, S, A);
  for (int t = 0; t < H; ++t) {
    for (int s = 0; s < S; ++s) {
      const double m = d.state_mass(t, s);
      auto out = p.probs(t, s);
      if (m > 0.0) {
        for (int a = 0; a < A; ++a) out[a] = d.at(t, s, a) / m;
      } else {
        // Unreachable under the mixture; fall back to the first component.
        out[policies[0].at(t, s)] = 1.0;
      }
    }
  }
  return p;
}

DeterministicPolicy greedy_lagrangian_policy(const AugmentedMdp& aug, double lambda) {
  const FiniteMdp& mdp = aug.mdp;
  const SparseKernel kernel(mdp);
  const int H = mdp.horizon();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  DeterministicPolicy pol{H, S, std::vector<ActionId>(static_cast<std::size_t>(H) * S, 0)};
  std::vector<double> w(S);
  std::vector<double> nw(S);
  for (int s = 0; s < S; ++s) w[s] = mdp.terminal_reward(s) + lambda * aug.terminal_constraint[s];
  for (int t = H - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double best = -INFINITY;
      ActionId arg = 0;
      for (int a = 0; a < A; ++a) {
        const double q = mdp.stage_reward(t, s, a) + kernel.expect(s, a, [&](int j) { return w[j]; });
        if (q > best) {
          best = q;
          arg = a;
        }
      }
      nw[s] = best;
      pol.action[static_cast<std::size_t>(t) * S + s] = arg;
    }
    std::swap(w, nw);
  }
  return pol;
}

double max_constraint_value(const AugmentedMdp& aug) {
  const FiniteMdp& mdp = aug.mdp;
  const SparseKernel kernel(mdp);
  const int S = mdp.num_states();
  std::vector<double> u(aug.terminal_constraint.begin(), aug.terminal_constraint.end());
  std::vector<double> nu(S);
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double best = 0.0;
      for (int a = 0; a < mdp.num_actions(); ++a)
        best = std::max(best, kernel.expect(s, a, [&](int j) { return u[j]; }));
      nu[s] = best;
    }
    std::swap(u, nu);
  }
  return u[mdp.initial_state()];
}

SlaterReport slater_check(const AugmentedMdp& aug, double delta) {
  SlaterReport report;
  report.max_value = max_constraint_value(aug);
  report.margin = report.max_value - delta;
  report.satisfied = *report.margin > 0.0;
  return report;
}

CmdpSolution solve_cmdp(const AugmentedMdp& aug, double delta, const DualSettings& settings) {
  constexpr double tol = 1e-12;
  const double vmax = max_constraint_value(aug);
  if (vmax < delta - tol) {
    fail(ErrorCode::Infeasible, "constraint threshold exceeds the maximal reach-avoid probability");
  }
  const int A = aug.mdp.num_actions();
  auto values_of = [&](const DeterministicPolicy& p) { return exact_initial_values(aug, p.to_markov(A)); };

  CmdpSolution sol;
  DeterministicPolicy unconstrained = greedy_lagrangian_policy(aug, 0.0);
  ValuePair v0 = values_of(unconstrained);
  if (v0.constraint >= delta - tol) {
    sol.value = v0.reward;
    sol.constraint = v0.constraint;
    sol.lambda = 0.0;
    sol.policies = {std::move(unconstrained)};
    sol.weights = {1.0};
    sol.component_values = {v0};
    return sol;
  }

  double lo = 0.0;
  double hi = settings.lambda_max > 0.0 ? settings.lambda_max : aug.mdp.horizon() + 1.0;
  // The multiplier can exceed the reward scale when a small gain in the
  // constraint costs a lot of reward; widen until the greedy policy is feasible.
  for (int k = 0; values_of(greedy_lagrangian_policy(aug, hi)).constraint < delta - tol; ++k) {
    if (k > 200) fail(ErrorCode::Internal, "dual bracket did not reach feasibility");
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < settings.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (values_of(greedy_lagrangian_policy(aug, mid)).constraint >= delta - tol) hi = mid;
    else lo = mid;
  }

  DeterministicPolicy p_lo = greedy_lagrangian_policy(aug, lo);
  DeterministicPolicy p_hi = greedy_lagrangian_policy(aug, hi);
  const ValuePair v_lo = values_of(p_lo);
  const ValuePair v_hi = values_of(p_hi);
  sol.lambda = hi;
  if (v_hi.constraint <= delta + tol || v_lo.constraint >= v_hi.constraint) {
    sol.value = v_hi.reward;
    sol.constraint = v_hi.constraint;
    sol.policies = {std::move(p_hi)};
    sol.weights = {1.0};
    sol.component_values = {v_hi};
    return sol;
  }
  const double w = (delta - v_lo.constraint) / (v_hi.constraint - v_lo.constraint);
  sol.value = w * v_hi.reward + (1.0 - w) * v_lo.reward;
  sol.constraint = w * v_hi.constraint + (1.0 - w) * v_lo.constraint;
  sol.policies = {std::move(p_hi), std::move(p_lo)};
  sol.weights = {w, 1.0 - w};
  sol.component_values = {v_hi, v_lo};
  return sol;
}

BruteForceResult brute_force_cmdp(const AugmentedMdp& aug, double delta, std::uint64_t max_policies) {
  const FiniteMdp& mdp = aug.mdp;
  const SparseKernel kernel(mdp);
  const int A = mdp.num_actions();
  const auto reach = reachable_states(mdp, kernel);
  std::vector<std::pair<int, int>> points;
  for (int t = 0; t < mdp.horizon(); ++t)
    for (int s : reach[t]) points.emplace_back(t, s);

  std::uint64_t total = 1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (total > max_policies / static_cast<std::uint64_t>(A)) {
      fail(ErrorCode::Unsupported, "too many deterministic policies to enumerate");
    }
    total *= static_cast<std::uint64_t>(A);
  }

  MarkovPolicy table(mdp.horizon(), mdp.num_states(), A);
  for (int t = 0; t < mdp.horizon(); ++t)
    for (int s = 0; s < mdp.num_states(); ++s) table.probs(t, s)[0] = 1.0;
  std::vector<int> digits(points.size(), 0);
  std::vector<std::pair<double, double>> values;
  values.reserve(total);
  std::vector<double> b1, b2, b3, b4;
  for (std::uint64_t k = 0; k < total; ++k) {
    const ValuePair v = evaluate_initial(mdp, kernel, table, aug.terminal_constraint, b1, b2, b3, b4);
    values.emplace_back(v.constraint, v.reward);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto probs = table.probs(points[i].first, points[i].second);
      probs[digits[i]] = 0.0;
      digits[i] = (digits[i] + 1) % A;
      probs[digits[i]] = 1.0;
      if (digits[i] != 0) break;
    }
  }
  return best_mixture(std::move(values), delta);
}

StateMarkovSearch brute_force_state_markov(const FiniteMdp& mdp, const ReachAvoidSpec& spec, double delta,
                                           int resolution, std::uint64_t max_policies) {
  if (resolution < 1) fail(ErrorCode::InvalidArgument, "grid resolution must be positive");
  const AugmentedMdp aug = build_augmented_finite(mdp, spec);
  const SparseKernel base_kernel(mdp);
  const SparseKernel aug_kernel(aug.mdp);
  const int A = mdp.num_actions();
  const auto reach = reachable_states(mdp, base_kernel);

  // All points of the simplex grid with spacing 1/resolution.
  std::vector<std::vector<double>> grid;
  std::vector<int> counts(A, 0);
  auto compose = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == A - 1) {
      counts[pos] = remaining;
      std::vector<double> p(A);
      for (int a = 0; a < A; ++a) p[a] = static_cast<double>(counts[a]) / resolution;
      grid.push_back(std::move(p));
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  compose(compose, 0, resolution);

  std::vector<std::pair<int, int>> points;
  for (int t = 0; t < mdp.horizon(); ++t)
    for (int s : reach[t]) points.emplace_back(t, s);
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (total > max_policies / grid.size()) fail(ErrorCode::Unsupported, "policy grid too large");
    total *= grid.size();
  }

  MarkovPolicy table(aug.mdp.horizon(), aug.mdp.num_states(), A);
  auto assign = [&](int t, int s, const std::vector<double>& p) {
    for (int y = 0; y < kAuxCount; ++y) {
      auto out = table.probs(t, AugState{s, static_cast<Aux>(y)}.id());
      std::copy(p.begin(), p.end(), out.begin());
    }
  };
  for (int t = 0; t < mdp.horizon(); ++t)
    for (int s = 0; s < mdp.num_states(); ++s) assign(t, s, grid[0]);

  StateMarkovSearch out;
  out.best.value = -INFINITY;
  std::vector<std::size_t> digits(points.size(), 0);
  std::vector<double> b1, b2, b3, b4;
  constexpr double tol = 1e-12;
  for (std::uint64_t k = 0; k < total; ++k) {
    const ValuePair v = evaluate_initial(aug.mdp, aug_kernel, table, aug.terminal_constraint, b1, b2, b3, b4);
    ++out.best.policies_evaluated;
    if (v.constraint >= delta - tol && v.reward > out.best.value) {
      out.best.value = v.reward;
      out.best.constraint = v.constraint;
      out.best.feasible = true;
      out.policy = table;
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      digits[i] = (digits[i] + 1) % grid.size();
      assign(points[i].first, points[i].second, grid[digits[i]]);
      if (digits[i] != 0) break;
    }
  }
  if (!out.best.feasible) out.best.value = 0.0;
  return out;
}

FisherReport fisher_report(const AugmentedMdp& aug, const SoftmaxPolicy& policy) {
  const MarkovPolicy table = policy.table();
  check_policy_shape(aug.mdp, table);
  const OccupancyMeasure d = occupancy(aug.mdp, SparseKernel(aug.mdp), table);
  FisherReport report;
  for (int t = 0; t < policy.horizon(); ++t) {
    const Eigen::MatrixXd F = fisher_block(policy, table, d, t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(F, Eigen::EigenvaluesOnly);
    std::vector<double> ev(eig.eigenvalues().data(), eig.eigenvalues().data() + eig.eigenvalues().size());
    std::optional<double> min_nz;
    for (double v : ev)
      if (v > kEigenCutoff) min_nz = min_nz ? std::min(*min_nz, v) : v;
    if (min_nz) report.mu_f = report.mu_f ? std::min(*report.mu_f, *min_nz) : *min_nz;
    report.matrices.emplace_back(F.data(), F.data() + F.size());
    report.eigenvalues.push_back(std::move(ev));
    report.min_nonzero_eigenvalue.push_back(min_nz);
  }
  return report;
}

TransferErrorReport transfer_error_report(const AugmentedMdp& aug, const SoftmaxPolicy& policy,
                                          const OccupancyMeasure& optimal_occupancy) {
  const MarkovPolicy table = policy.table();
  check_policy_shape(aug.mdp, table);
  const SparseKernel kernel(aug.mdp);
  const ExactValues values = evaluate(aug.mdp, kernel, table, aug.terminal_constraint);
  const OccupancyMeasure d = occupancy(aug.mdp, kernel, table);
  const int S = aug.mdp.num_states();
  const int A = aug.mdp.num_actions();

  TransferErrorReport report;
  report.residual.assign(2, std::vector<double>(policy.horizon(), 0.0));
  std::vector<std::pair<int, double>> g;
  for (int t = 0; t < policy.horizon(); ++t) {
    const Eigen::MatrixXd F = fisher_block(policy, table, d, t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(F);
    Eigen::VectorXd inv = eig.eigenvalues();
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > kEigenCutoff ? 1.0 / inv(i) : 0.0;
    const Eigen::MatrixXd pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();

    for (int k = 0; k < 2; ++k) {
      auto adv = [&](int s, int a) { return k == 0 ? values.adv_r(t, s, a) : values.adv_c(t, s, a); };
      Eigen::VectorXd b = Eigen::VectorXd::Zero(F.rows());
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const double w = d.at(t, s, a);
          if (w == 0.0) continue;
          block_score(policy, t, s, a, table.probs(t, s), g);
          for (const auto& [i, gi] : g) b(i) += w * gi * adv(s, a);
        }
      }
      const Eigen::VectorXd mu = pinv * b;
      double residual = 0.0;
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const double w = optimal_occupancy.at(t, s, a);
          if (w == 0.0) continue;
          block_score(policy, t, s, a, table.probs(t, s), g);
          double fit = 0.0;
          for (const auto& [i, gi] : g) fit += mu(i) * gi;
          const double e = adv(s, a) - fit;
          residual += w * e * e;
        }
      }
      report.residual[k][t] = residual;
      report.max_residual = std::max(report.max_residual, residual);
    }
  }
  return report;
}

TransferBiasEstimate estimate_transfer_bias(const AugmentedMdp& aug, const SoftmaxPolicy& policy_class,
                                            const OccupancyMeasure& optimal_occupancy, double delta, int samples,
                                            std::uint64_t seed, double scale) {
  TransferBiasEstimate est;
  RandomStream rng(seed);
  SoftmaxPolicy policy = policy_class;
  const int max_attempts = std::max(1, samples) * 100;
  while (est.samples < samples && est.attempts < max_attempts) {
    ++est.attempts;
    std::vector<double> theta(policy.dimension());
    for (double& x : theta) x = scale * standard_normal(rng);
    policy.set_params(std::move(theta));
    if (exact_initial_values(aug, policy.table()).constraint < delta) continue;
    ++est.samples;
    est.epsilon_bias =
        std::max(est.epsilon_bias, transfer_error_report(aug, policy, optimal_occupancy).max_residual);
  }
  return est;
}

}  // namespace ra
