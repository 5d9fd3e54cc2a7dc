#include "ra/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ra/error.hpp"

namespace ra {

using nlohmann::json;

BlockLayout::BlockLayout(std::vector<int> block_sizes) : sizes_(std::move(block_sizes)) {
  offsets_.reserve(sizes_.size() + 1);
  offsets_.push_back(0);
  for (int s : sizes_) {
    if (s < 0) fail(ErrorCode::InvalidArgument, "negative block size");
    offsets_.push_back(offsets_.back() + s);
  }
}

int BlockLayout::block_of(int i) const {
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), i);
  return static_cast<int>(it - offsets_.begin()) - 1;
}

SoftmaxPolicy::SoftmaxPolicy(int num_aug_states, int num_actions, std::vector<int> index, BlockLayout layout,
                             std::vector<int> groups)
    : num_aug_states_(num_aug_states),
      num_actions_(num_actions),
      index_(std::move(index)),
      layout_(std::move(layout)),
      groups_(std::move(groups)),
      theta_(static_cast<std::size_t>(layout_.dimension()), 0.0) {}

SoftmaxPolicy SoftmaxPolicy::tabular(int horizon, int num_aug_states, int num_actions) {
  if (horizon < 1 || num_aug_states < 1 || num_actions < 1) {
    fail(ErrorCode::InvalidArgument, "softmax policy needs positive dimensions");
  }
  std::vector<int> index(static_cast<std::size_t>(horizon) * num_aug_states * num_actions);
  for (std::size_t k = 0; k < index.size(); ++k) index[k] = static_cast<int>(k);
  return SoftmaxPolicy(num_aug_states, num_actions, std::move(index),
                       BlockLayout(std::vector<int>(horizon, num_aug_states * num_actions)), {});
}

SoftmaxPolicy SoftmaxPolicy::tied(int horizon, std::vector<int> group_of, int num_actions) {
  if (horizon < 1 || group_of.empty() || num_actions < 1) {
    fail(ErrorCode::InvalidArgument, "softmax policy needs positive dimensions");
  }
  const int num_groups = *std::max_element(group_of.begin(), group_of.end()) + 1;
  if (*std::min_element(group_of.begin(), group_of.end()) < 0) {
    fail(ErrorCode::InvalidArgument, "negative group id");
  }
  const int N = static_cast<int>(group_of.size());
  const int block = num_groups * num_actions;
  std::vector<int> index(static_cast<std::size_t>(horizon) * N * num_actions);
  for (int t = 0; t < horizon; ++t)
    for (int s = 0; s < N; ++s)
      for (int a = 0; a < num_actions; ++a)
        index[(static_cast<std::size_t>(t) * N + s) * num_actions + a] = t * block + group_of[s] * num_actions + a;
  return SoftmaxPolicy(N, num_actions, std::move(index), BlockLayout(std::vector<int>(horizon, block)),
                       std::move(group_of));
}

SoftmaxPolicy SoftmaxPolicy::with_params(std::vector<double> theta) const {
  SoftmaxPolicy copy = *this;
  copy.set_params(std::move(theta));
  return copy;
}

void SoftmaxPolicy::set_params(std::vector<double> theta) {
  if (static_cast<int>(theta.size()) != dimension()) {
    fail(ErrorCode::InvalidArgument, "parameter vector has the wrong dimension");
  }
  theta_ = std::move(theta);
}

void SoftmaxPolicy::action_distribution(int t, int aug_id, std::span<double> out) const {
  const std::size_t base = (static_cast<std::size_t>(t) * num_aug_states_ + aug_id) * num_actions_;
  double max_logit = -INFINITY;
  for (int a = 0; a < num_actions_; ++a) {
    out[a] = theta_[index_[base + a]];
    max_logit = std::max(max_logit, out[a]);
  }
  double z = 0.0;
  for (int a = 0; a < num_actions_; ++a) {
    out[a] = std::exp(out[a] - max_logit);
    z += out[a];
  }
  for (int a = 0; a < num_actions_; ++a) out[a] /= z;
}

std::vector<double> SoftmaxPolicy::action_distribution(int t, int aug_id) const {
  std::vector<double> p(num_actions_);
  action_distribution(t, aug_id, p);
  return p;
}

ActionId SoftmaxPolicy::sample_action(int t, int aug_id, RandomStream& rng) const {
  const auto p = action_distribution(t, aug_id);
  return static_cast<ActionId>(rng.categorical(p));
}

MarkovPolicy SoftmaxPolicy::table() const {
  MarkovPolicy table(horizon(), num_aug_states_, num_actions_);
  for (int t = 0; t < horizon(); ++t)
    for (int s = 0; s < num_aug_states_; ++s) action_distribution(t, s, table.probs(t, s));
  return table;
}

void SoftmaxPolicy::add_score(int t, int aug_id, ActionId a, std::span<const double> probs, double weight,
                              std::span<double> out) const {
  const std::size_t base = (static_cast<std::size_t>(t) * num_aug_states_ + aug_id) * num_actions_;
  for (int b = 0; b < num_actions_; ++b) {
    const double indicator = b == a ? 1.0 : 0.0;
    out[index_[base + b]] += weight * (indicator - probs[b]);
  }
}

std::vector<double> SoftmaxPolicy::log_prob_grad(int t, int aug_id, ActionId a) const {
  std::vector<double> g(dimension(), 0.0);
  const auto p = action_distribution(t, aug_id);
  add_score(t, aug_id, a, p, 1.0, g);
  return g;
}

ScoreBounds SoftmaxPolicy::score_bounds() const {
  // ||e_a - pi||^2 = (1 - pi_a)^2 + sum_{b != a} pi_b^2 <= 2, and the
  // log-softmax Hessian diag(pi) - pi pi^T has operator norm below 1.
  return {std::numbers::sqrt2, 1.0};
}

json SoftmaxPolicy::to_json() const {
  json doc;
  doc["kind"] = is_tabular() ? "tabular_softmax" : "tied_softmax";
  doc["horizon"] = horizon();
  doc["num_aug_states"] = num_aug_states_;
  doc["num_actions"] = num_actions_;
  doc["block_sizes"] = layout_.sizes();
  if (!is_tabular()) doc["groups"] = groups_;
  doc["theta"] = theta_;
  return doc;
}

SoftmaxPolicy SoftmaxPolicy::from_json(const json& doc) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    const int H = doc.at("horizon").get<int>();
    const int N = doc.at("num_aug_states").get<int>();
    const int A = doc.at("num_actions").get<int>();
    SoftmaxPolicy policy = [&] {
      if (kind == "tabular_softmax") return tabular(H, N, A);
      if (kind == "tied_softmax") return tied(H, doc.at("groups").get<std::vector<int>>(), A);
      fail(ErrorCode::Parse, "unknown policy kind '" + kind + "'");
    }();
    if (doc.at("block_sizes").get<std::vector<int>>() != policy.layout().sizes()) {
      fail(ErrorCode::Parse, "block_sizes do not match the policy shape");
    }
    policy.set_params(doc.at("theta").get<std::vector<double>>());
    return policy;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("policy parameters: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::Parse, e.what());
  }
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double standard_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

TruncatedGaussianPolicy::TruncatedGaussianPolicy(int horizon, int num_states, double sigma, double lo, double hi)
    : horizon_(horizon),
      num_states_(num_states),
      sigma_(sigma),
      lo_(lo),
      hi_(hi),
      theta_(static_cast<std::size_t>(horizon) * num_states, 0.5 * (lo + hi)) {
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be positive");
  if (!(hi > lo)) fail(ErrorCode::InvalidArgument, "support must have positive width");
  if (horizon < 1 || num_states < 1) fail(ErrorCode::InvalidArgument, "policy needs positive dimensions");
}

void TruncatedGaussianPolicy::set_params(std::vector<double> theta) {
  if (theta.size() != theta_.size()) fail(ErrorCode::InvalidArgument, "parameter vector has the wrong dimension");
  theta_ = std::move(theta);
}

double TruncatedGaussianPolicy::normalizer(double mu) const {
  const double z = standard_normal_cdf((hi_ - mu) / sigma_) - standard_normal_cdf((lo_ - mu) / sigma_);
  if (!(z > 0.0)) fail(ErrorCode::InvalidArgument, "mean too far outside the support to normalize");
  return z;
}

double TruncatedGaussianPolicy::density(int t, int s, double action) const {
  if (action < lo_ || action > hi_) return 0.0;
  const double mu = mean(t, s);
  return standard_normal_pdf((action - mu) / sigma_) / (sigma_ * normalizer(mu));
}

double TruncatedGaussianPolicy::log_density(int t, int s, double action) const {
  if (action < lo_ || action > hi_) return -INFINITY;
  const double mu = mean(t, s);
  const double u = (action - mu) / sigma_;
  return -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma_ * normalizer(mu));
}

double TruncatedGaussianPolicy::sample_action(int t, int s, RandomStream& rng) const {
  const double mu = mean(t, s);
  const double c_lo = standard_normal_cdf((lo_ - mu) / sigma_);
  const double c_hi = standard_normal_cdf((hi_ - mu) / sigma_);
  const double target = c_lo + rng.uniform() * (c_hi - c_lo);
  // Inverse CDF by bisection; the CDF is monotone on [lo, hi].
  double a = lo_;
  double b = hi_;
  for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    if (standard_normal_cdf((m - mu) / sigma_) < target) a = m;
    else b = m;
  }
  return std::clamp(0.5 * (a + b), lo_, hi_);
}

double TruncatedGaussianPolicy::log_prob_grad_mean(int t, int s, double action) const {
  const double mu = mean(t, s);
  const double alpha = (lo_ - mu) / sigma_;
  const double beta = (hi_ - mu) / sigma_;
  const double z = normalizer(mu);
  return (action - mu) / (sigma_ * sigma_) -
         (standard_normal_pdf(alpha) - standard_normal_pdf(beta)) / (sigma_ * z);
}

std::vector<double> TruncatedGaussianPolicy::log_prob_grad(int t, int s, double action) const {
  std::vector<double> g(theta_.size(), 0.0);
  g[index(t, s)] = log_prob_grad_mean(t, s, action);
  return g;
}

ScoreBounds TruncatedGaussianPolicy::score_bounds() const {
  // The score is (a - E[a]) / sigma^2 and the Hessian is -Var[a] / sigma^4,
  // with |a - E[a]| <= w and Var[a] <= min(sigma^2, w^2 / 4).
  const double w = hi_ - lo_;
  const double s2 = sigma_ * sigma_;
  return {w / s2, std::min(1.0 / s2, w * w / (4.0 * s2 * s2))};
}

}  // namespace ra
