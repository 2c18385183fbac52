#pragma once

#include "aiseval/rng.hpp"
#include "aiseval/types.hpp"

#include <cmath>
#include <functional>
#include <utility>

namespace aiseval {

inline constexpr double kMinStepSize = 1e-8;
inline constexpr double kMaxStepSize = 1e2;

struct HmcParams {
  double step_size = 0.1;   // initial value when adapting
  int n_leapfrog = 10;
  double target_accept = 0.65;
  double adapt_factor = 1.02;
  bool adapt = true;
  /// Each transition uses step_size * U(1 - j, 1 + j). Breaks up trajectories
  /// that return to their start when epsilon * L lands near a period of the target.
  double step_jitter = 0.2;

  void validate() const;
};

struct HmcStats {
  long long proposals = 0;
  long long accepts = 0;
  long long divergences = 0;
  double sum_abs_delta_h = 0.0;

  double acceptance_rate() const {
    return proposals ? static_cast<double>(accepts) / static_cast<double>(proposals) : 0.0;
  }
  double mean_abs_delta_h() const {
    const long long finite = proposals - divergences;
    return finite ? sum_abs_delta_h / static_cast<double>(finite) : 0.0;
  }
};

/// Multiplicative step-size update driven by a single accept/reject outcome:
/// accept scales by f^(1-a), reject by f^(-a), where a is the target
/// acceptance rate. The long-run acceptance settles at a. The result is
/// clamped to [kMinStepSize, kMaxStepSize].
double adapt_step_size(double step_size, bool accepted, const HmcParams& params);

/// Log density plus gradient at one point. Targets used with the templates
/// below return this or any type exposing the same two members.
struct Evaluation {
  double log_density = 0.0;
  Vector gradient;
};

/// Adapts a pair of callables into a target.
class FunctionTarget {
 public:
  FunctionTarget(std::function<double(const Vector&)> logf,
                 std::function<Vector(const Vector&)> grad)
      : logf_(std::move(logf)), grad_(std::move(grad)) {}

  Evaluation evaluate(const Vector& z) const { return {logf_(z), grad_(z)}; }

 private:
  std::function<double(const Vector&)> logf_;
  std::function<Vector(const Vector&)> grad_;
};

template <typename Point>
struct LeapfrogResult {
  Vector z;
  Vector r;
  Point point;
  bool diverged = false;
};

template <typename Point>
bool is_finite_point(const Point& p) {
  return std::isfinite(p.log_density) && p.gradient.allFinite();
}

/// L leapfrog steps of size eps for H(z, r) = -log f(z) + |r|^2 / 2:
/// a half momentum kick, L-1 alternating full drifts and kicks, a final drift
/// and half kick. `start` must be the evaluation at z. Stops early and flags
/// divergence when the density or gradient stops being finite.
template <typename Target, typename Point>
LeapfrogResult<Point> leapfrog(Target& target, Vector z, Vector r, const Point& start,
                               double eps, int n_steps) {
  LeapfrogResult<Point> out;
  r += 0.5 * eps * start.gradient;
  for (int i = 1; i <= n_steps; ++i) {
    z += eps * r;
    out.point = target.evaluate(z);
    if (!is_finite_point(out.point) || !r.allFinite()) {
      out.diverged = true;
      break;
    }
    r += (i < n_steps ? eps : 0.5 * eps) * out.point.gradient;
  }
  out.z = std::move(z);
  out.r = std::move(r);
  return out;
}

template <typename Point>
struct HmcTransition {
  Vector z;
  Point point;
  bool accepted = false;
  bool diverged = false;
  double delta_h = 0.0;
};

/// One HMC transition: draw r ~ N(0, I), integrate, accept with probability
/// min(1, exp(-dH)). A rejected or divergent proposal returns the input state
/// unchanged. Always consumes the same number of random draws.
template <typename Target, typename Point>
HmcTransition<Point> hmc_step(Target& target, const Vector& z, const Point& current,
                              double eps, int n_leapfrog, Rng& rng) {
  const Vector r0 = standard_normal(rng, static_cast<int>(z.size()));
  auto traj = leapfrog(target, z, r0, current, eps, n_leapfrog);
  const double log_u = std::log(uniform01(rng));

  HmcTransition<Point> out;
  if (!traj.diverged) {
    const double h0 = -current.log_density + 0.5 * r0.squaredNorm();
    const double h1 = -traj.point.log_density + 0.5 * traj.r.squaredNorm();
    out.delta_h = h1 - h0;
    if (!std::isfinite(out.delta_h)) {
      out.diverged = true;
    } else if (log_u < -out.delta_h) {
      out.accepted = true;
      out.z = std::move(traj.z);
      out.point = std::move(traj.point);
      return out;
    }
  } else {
    out.diverged = true;
  }
  out.z = z;
  out.point = current;
  return out;
}

/// Per-chain sampler state: position, cached evaluation, adapted step size
/// and counters. Chains never share one.
template <typename Point>
struct HmcChain {
  Vector z;
  Point point;
  double step_size = 0.1;
  HmcStats stats;

  template <typename Target>
  bool step(Target& target, const HmcParams& params, Rng& rng) {
    double eps = step_size;
    if (params.step_jitter > 0.0) eps *= 1.0 + params.step_jitter * (2.0 * uniform01(rng) - 1.0);
    auto t = hmc_step(target, z, point, eps, params.n_leapfrog, rng);
    ++stats.proposals;
    if (t.accepted) ++stats.accepts;
    if (t.diverged) {
      ++stats.divergences;
    } else {
      stats.sum_abs_delta_h += std::abs(t.delta_h);
    }
    if (params.adapt) step_size = adapt_step_size(step_size, t.accepted, params);
    z = std::move(t.z);
    point = std::move(t.point);
    return t.accepted;
  }
};

}  // namespace aiseval
