#pragma once

#include <span>
#include <vector>

#include "json.hpp"

#include "ra/augmentation.hpp"
#include "ra/rng.hpp"

namespace ra {

/// Uniform bounds on the score norm and the log-policy Hessian norm.
struct ScoreBounds {
  double gradient = 0.0;  // M_g
  double hessian = 0.0;   // M_h
};

/// Per-timestep parameter blocks stored flat: block t occupies
/// [offset(t), offset(t) + size(t)).
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<int> block_sizes);

  int horizon() const { return static_cast<int>(sizes_.size()); }
  int dimension() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int offset(int t) const { return offsets_[t]; }
  int size(int t) const { return sizes_[t]; }
  const std::vector<int>& sizes() const { return sizes_; }
  // Block that owns flat index i.
  int block_of(int i) const;

  bool operator==(const BlockLayout&) const = default;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;  // horizon + 1 entries
};

/// Softmax policy on the augmented space with logits f(t, s~, a) = theta[k]
/// where k = index(t, s~, a). The tabular class gives every (t, s~, a) its
/// own parameter; tied classes share parameters across augmented states of
/// one group, e.g. grouping by base state yields policies that ignore y.
class SoftmaxPolicy {
 public:
  static SoftmaxPolicy tabular(int horizon, int num_aug_states, int num_actions);
  // group_of[s~] in [0, num_groups); states in one group share logits.
  static SoftmaxPolicy tied(int horizon, std::vector<int> group_of, int num_actions);

  int horizon() const { return layout_.horizon(); }
  int num_aug_states() const { return num_aug_states_; }
  int num_actions() const { return num_actions_; }
  int dimension() const { return layout_.dimension(); }
  const BlockLayout& layout() const { return layout_; }
  bool is_tabular() const { return groups_.empty(); }
  const std::vector<int>& groups() const { return groups_; }

  std::span<const double> params() const { return theta_; }
  SoftmaxPolicy with_params(std::vector<double> theta) const;
  void set_params(std::vector<double> theta);

  int param_index(int t, int aug_id, ActionId a) const {
    return index_[(static_cast<std::size_t>(t) * num_aug_states_ + aug_id) * num_actions_ + a];
  }

  void action_distribution(int t, int aug_id, std::span<double> out) const;
  std::vector<double> action_distribution(int t, int aug_id) const;
  ActionId sample_action(int t, int aug_id, RandomStream& rng) const;

  // Probabilities for every (t, s~), for rollouts and the exact oracle.
  MarkovPolicy table() const;

  // out += weight * grad_theta log pi_t(a | s~), given the slice probabilities.
  void add_score(int t, int aug_id, ActionId a, std::span<const double> probs, double weight,
                 std::span<double> out) const;
  // Dense gradient of log pi_t(a|s~) over the full theta; nonzero only in block t.
  std::vector<double> log_prob_grad(int t, int aug_id, ActionId a) const;

  ScoreBounds score_bounds() const;

  nlohmann::json to_json() const;
  static SoftmaxPolicy from_json(const nlohmann::json& doc);

 private:
  SoftmaxPolicy(int num_aug_states, int num_actions, std::vector<int> index, BlockLayout layout,
                std::vector<int> groups);

  int num_aug_states_ = 0;
  int num_actions_ = 0;
  std::vector<int> index_;
  BlockLayout layout_;
  std::vector<int> groups_;
  std::vector<double> theta_;
};

/// Continuous-action policy: a Gaussian with state-dependent mean
/// theta[t * num_states + s] and fixed sigma, truncated to [lo, hi].
class TruncatedGaussianPolicy {
 public:
  TruncatedGaussianPolicy(int horizon, int num_states, double sigma, double lo, double hi);

  int dimension() const { return static_cast<int>(theta_.size()); }
  double sigma() const { return sigma_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  double mean(int t, int s) const { return theta_[index(t, s)]; }
  std::span<const double> params() const { return theta_; }
  void set_params(std::vector<double> theta);

  double density(int t, int s, double action) const;
  double log_density(int t, int s, double action) const;
  double sample_action(int t, int s, RandomStream& rng) const;
  // d/d mean of log density; the only nonzero entry of the full gradient.
  double log_prob_grad_mean(int t, int s, double action) const;
  std::vector<double> log_prob_grad(int t, int s, double action) const;

  ScoreBounds score_bounds() const;

 private:
  std::size_t index(int t, int s) const { return static_cast<std::size_t>(t) * num_states_ + s; }
  double normalizer(double mu) const;

  int horizon_;
  int num_states_;
  double sigma_;
  double lo_;
  double hi_;
  std::vector<double> theta_;
};

double standard_normal_cdf(double x);
double standard_normal_pdf(double x);

}  // namespace ra
