#include "ra/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ra/error.hpp"

namespace ra {

namespace {

struct ChunkSums {
  long double constraint = 0.0L;
  std::vector<long double> grad_r;
  std::vector<long double> grad_c;
};

int resolve_workers(int requested, int num_chunks) {
  int w = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(w, 1, std::max(1, num_chunks));
}

// Runs fn(chunk_index) for every chunk. Work assignment never affects the
// result because each chunk writes only its own slot.
template <class Fn>
void for_each_chunk(int num_chunks, int workers, Fn&& fn) {
  workers = resolve_workers(workers, num_chunks);
  if (workers == 1) {
    for (int c = 0; c < num_chunks; ++c) fn(c);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int c = w; c < num_chunks; c += workers) fn(c);
    });
  }
}

void add_into(ChunkSums& dst, const ChunkSums& src) {
  dst.constraint += src.constraint;
  for (std::size_t i = 0; i < dst.grad_r.size(); ++i) dst.grad_r[i] += src.grad_r[i];
  for (std::size_t i = 0; i < dst.grad_c.size(); ++i) dst.grad_c[i] += src.grad_c[i];
}

// Pairwise tree over chunk results; the tree shape depends only on the
// number of chunks.
ChunkSums reduce_pairwise(std::vector<ChunkSums>& chunks, int lo, int hi) {
  if (hi - lo == 1) return std::move(chunks[lo]);
  const int mid = lo + (hi - lo) / 2;
  ChunkSums left = reduce_pairwise(chunks, lo, mid);
  const ChunkSums right = reduce_pairwise(chunks, mid, hi);
  add_into(left, right);
  return left;
}

class Accumulator {
 public:
  Accumulator(const SoftmaxPolicy& policy, const MarkovPolicy& table, bool want_r, bool want_c)
      : policy_(policy), table_(table), want_r_(want_r), want_c_(want_c) {}

  void reset(ChunkSums& sums) const {
    sums.constraint = 0.0L;
    sums.grad_r.assign(want_r_ ? policy_.dimension() : 0, 0.0L);
    sums.grad_c.assign(want_c_ ? policy_.dimension() : 0, 0.0L);
  }

  void add(const AugTrajectory& traj, ChunkSums& sums) {
    const int H = policy_.horizon();
    if (static_cast<int>(traj.actions.size()) != H) {
      fail(ErrorCode::InvalidArgument, "trajectory horizon does not match the policy");
    }
    sums.constraint += traj.constraint;
    if (!want_r_ && !want_c_) return;

    reward_to_go_.resize(H);
    double tail = traj.terminal_reward;
    for (int t = H - 1; t >= 0; --t) {
      tail += traj.stage_rewards[t];
      reward_to_go_[t] = tail;
    }
    const double c = traj.constraint;
    const int A = policy_.num_actions();
    for (int t = 0; t < H; ++t) {
      const int sid = traj.states[t].id();
      if (sid < 0 || sid >= policy_.num_aug_states()) {
        fail(ErrorCode::InvalidArgument, "trajectory state outside the policy's domain");
      }
      const auto probs = table_.probs(t, sid);
      const ActionId a = traj.actions[t];
      for (int b = 0; b < A; ++b) {
        const double score = (b == a ? 1.0 : 0.0) - probs[b];
        const int k = policy_.param_index(t, sid, b);
        if (want_r_) sums.grad_r[k] += static_cast<long double>(score * reward_to_go_[t]);
        if (want_c_) sums.grad_c[k] += static_cast<long double>(score * c);
      }
    }
  }

 private:
  const SoftmaxPolicy& policy_;
  const MarkovPolicy& table_;
  bool want_r_;
  bool want_c_;
  std::vector<double> reward_to_go_;
};

int chunk_count(int n) { return (n + kReductionChunk - 1) / kReductionChunk; }

ChunkSums reduce_batch(const RolloutBatch& batch, const SoftmaxPolicy& policy, bool want_r, bool want_c) {
  if (batch.size() == 0) fail(ErrorCode::InvalidArgument, "empty rollout batch");
  if (batch.theta.size() != policy.params().size() ||
      !std::equal(batch.theta.begin(), batch.theta.end(), policy.params().begin())) {
    fail(ErrorCode::InvalidArgument, "batch was not generated by these policy parameters");
  }
  const MarkovPolicy table = policy.table();
  const int n = batch.size();
  const int chunks = chunk_count(n);
  std::vector<ChunkSums> sums(chunks);
  for (int c = 0; c < chunks; ++c) {
    Accumulator acc(policy, table, want_r, want_c);
    acc.reset(sums[c]);
    const int end = std::min(n, (c + 1) * kReductionChunk);
    for (int i = c * kReductionChunk; i < end; ++i) acc.add(batch.trajectories[i], sums[c]);
  }
  return reduce_pairwise(sums, 0, chunks);
}

std::vector<double> finish_mean(const std::vector<long double>& sum, int n) {
  std::vector<double> out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = static_cast<double>(sum[i] / n);
  return out;
}

}  // namespace

RolloutBatch collect_batch(const AugmentedEnv& env, const SoftmaxPolicy& policy, int n,
                           const SamplingOptions& options) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "batch size must be positive");
  const MarkovPolicy table = policy.table();
  RolloutBatch batch;
  batch.trajectories.resize(n);
  batch.theta.assign(policy.params().begin(), policy.params().end());
  const int chunks = chunk_count(n);
  for_each_chunk(chunks, options.workers, [&](int c) {
    const int end = std::min(n, (c + 1) * kReductionChunk);
    for (int i = c * kReductionChunk; i < end; ++i) {
      RandomStream rng(derive_seed(options.master_seed, options.family, static_cast<std::uint64_t>(i)));
      augmented_rollout_into(env, table, rng, batch.trajectories[i]);
    }
  });
  return batch;
}

double estimate_constraint_value(const RolloutBatch& batch) {
  if (batch.size() == 0) fail(ErrorCode::InvalidArgument, "empty rollout batch");
  const int n = batch.size();
  const int chunks = chunk_count(n);
  std::vector<ChunkSums> sums(chunks);
  for (int c = 0; c < chunks; ++c) {
    const int end = std::min(n, (c + 1) * kReductionChunk);
    for (int i = c * kReductionChunk; i < end; ++i) sums[c].constraint += batch.trajectories[i].constraint;
  }
  return static_cast<double>(reduce_pairwise(sums, 0, chunks).constraint / n);
}

std::vector<double> estimate_reward_gradient(const RolloutBatch& batch, const SoftmaxPolicy& policy) {
  return finish_mean(reduce_batch(batch, policy, true, false).grad_r, batch.size());
}

std::vector<double> estimate_constraint_gradient(const RolloutBatch& batch, const SoftmaxPolicy& policy) {
  return finish_mean(reduce_batch(batch, policy, false, true).grad_c, batch.size());
}

BatchEstimates sample_estimates(const AugmentedEnv& env, const SoftmaxPolicy& policy, int n,
                                const SamplingOptions& options) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "batch size must be positive");
  const MarkovPolicy table = policy.table();
  const int chunks = chunk_count(n);
  std::vector<ChunkSums> sums(chunks);
  for_each_chunk(chunks, options.workers, [&](int c) {
    Accumulator acc(policy, table, true, true);
    acc.reset(sums[c]);
    AugTrajectory traj;
    const int end = std::min(n, (c + 1) * kReductionChunk);
    for (int i = c * kReductionChunk; i < end; ++i) {
      RandomStream rng(derive_seed(options.master_seed, options.family, static_cast<std::uint64_t>(i)));
      augmented_rollout_into(env, table, rng, traj);
      acc.add(traj, sums[c]);
    }
  });
  ChunkSums total = reduce_pairwise(sums, 0, chunks);
  return {static_cast<double>(total.constraint / n), finish_mean(total.grad_r, n), finish_mean(total.grad_c, n)};
}

std::vector<double> barrier_gradient(std::span<const double> grad_r, std::span<const double> grad_c,
                                     double vc_hat, double eta, double delta) {
  if (grad_r.size() != grad_c.size()) fail(ErrorCode::InvalidArgument, "gradient dimensions differ");
  if (!(vc_hat > delta)) {
    fail(ErrorCode::BarrierDomain, "estimated constraint value is not above the threshold");
  }
  const double scale = eta / (vc_hat - delta);
  std::vector<double> out(grad_r.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_r[i] + scale * grad_c[i];
  return out;
}

SmoothnessConstants smoothness_constants(const ScoreBounds& bounds, int horizon) {
  if (horizon < 1) fail(ErrorCode::InvalidArgument, "horizon must be at least 1");
  const double H = horizon;
  const double mg = bounds.gradient;
  const double mh = bounds.hessian;
  return {mg * std::pow(H, 1.5), std::sqrt(H) * mg, mh * H + mg * mg * H * H, mh + mg * mg * H};
}

int min_batch_size(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorCode::InvalidArgument, "beta must lie in (0,1)");
  return static_cast<int>(std::ceil(8.0 * (0.25 - std::log(beta))));
}

ConcentrationWidths concentration_widths(int n, double beta, const SmoothnessConstants& consts) {
  const int min_n = min_batch_size(beta);
  if (n < min_n) {
    fail(ErrorCode::InsufficientBatch,
         "batch size " + std::to_string(n) + " is below the minimum " + std::to_string(min_n));
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  return {1.0 / std::sqrt(2.0 * n), 2.0 * std::sqrt(2.0) * consts.lipschitz_reward / root_n,
          2.0 * std::sqrt(2.0) * consts.lipschitz_constraint / root_n, min_n};
}

}  // namespace ra
