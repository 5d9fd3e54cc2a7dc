#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ra/augmentation.hpp"
#include "ra/envs.hpp"
#include "ra/oracle.hpp"
#include "ra/policy.hpp"

namespace testing {

// Augmented ids on the six-state example.
inline int aug_id(int s, ra::Aux y) { return ra::AugState{s, y}.id(); }
inline const int kS3Pending = aug_id(3, ra::Aux::Pending);
inline const int kS3Unsafe = aug_id(3, ra::Aux::Unsafe);

inline ra::AugmentedMdp example1_aug() {
  const auto e = ra::example1();
  return ra::build_augmented_finite(e.mdp, e.spec);
}

// Uniform except at t = 2 on s3: a0 with probability q on the pending branch
// and a0 with probability q0 on the unsafe branch.
inline ra::MarkovPolicy example1_policy(double q, double q0) {
  ra::MarkovPolicy p = ra::MarkovPolicy::uniform(3, 18, 2);
  p.probs(2, kS3Pending)[0] = q;
  p.probs(2, kS3Pending)[1] = 1.0 - q;
  p.probs(2, kS3Unsafe)[0] = q0;
  p.probs(2, kS3Unsafe)[1] = 1.0 - q0;
  return p;
}

inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d) / std::max(norm(b), 1e-12);
}

}  // namespace testing
