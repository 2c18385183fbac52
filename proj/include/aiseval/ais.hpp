#pragma once

#include "aiseval/hmc.hpp"
#include "aiseval/prob_model.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace aiseval {

enum class ScheduleKind { linear, sigmoid };

std::string_view to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Annealing temperatures beta_1 = 0 <= ... <= beta_T = 1.
struct Schedule {
  std::vector<double> betas;
  ScheduleKind kind = ScheduleKind::linear;

  int size() const { return static_cast<int>(betas.size()); }
};

/// Linear: beta_t = (t-1)/(T-1). Sigmoid: a logistic curve over [-4, 4],
/// affinely rescaled so the endpoints are exactly 0 and 1; it spends more
/// steps near both ends. Throws ContractError for T < 2.
Schedule make_schedule(int n_steps, ScheduleKind kind = ScheduleKind::linear);

struct AisConfig {
  int n_chains = 16;
  Schedule schedule = make_schedule(10000);
  HmcParams hmc;
  std::uint64_t seed = 0;
  /// Threads used to run the chains of one call.
  std::size_t workers = 1;

  void validate() const;
};

struct ChainRun {
  double log_weight = 0.0;
  Vector final_z;
  HmcStats hmc_stats;
  double final_step_size = 0.0;
  /// Set when a weight update stopped being finite; log_weight is then -inf.
  bool diverged = false;
};

/// One forward AIS chain. Chain k of example e always draws from the same
/// random stream, so results do not depend on which thread runs it.
ChainRun run_forward_chain(const AnnealingPath& path, const AisConfig& cfg,
                           std::uint64_t example, int chain);

/// One reverse chain started at an exact posterior sample.
ChainRun run_reverse_chain(const AnnealingPath& path, const Vector& z_exact,
                           const AisConfig& cfg, std::uint64_t example, int chain);

/// Forward AIS: each chain samples the initial distribution, then for
/// t = 2..T adds log f_t(z) - log f_{t-1}(z) at the current state and moves
/// with one HMC transition targeting f_t. The transition after the final
/// weight update is skipped since it cannot change the weight.
/// E[exp(log_weight)] = p(x).
std::vector<ChainRun> forward_ais(const AnnealingPath& path, const AisConfig& cfg,
                                  std::uint64_t example = 0);

/// Reverse AIS from z_exact with the schedule run from beta = 1 down to 0.
/// E[exp(log_weight)] = 1 / p(x). Only prior-initial paths are accepted.
std::vector<ChainRun> reverse_ais(const AnnealingPath& path, const Vector& z_exact,
                                  const AisConfig& cfg, std::uint64_t example = 0);

enum class BoundDirection { lower, upper };

struct ChainEstimate {
  double estimate = 0.0;  // nats
  /// Delta-method standard error from the spread of the weights. A rough
  /// per-example figure; the cross-example spread is the headline number.
  double std_error = 0.0;
};

/// lower: log mean exp(w). upper: -log mean exp(w) for reverse weights.
/// Throws EstimationError when no weight is finite.
ChainEstimate combine_chains(std::span<const double> log_weights, BoundDirection direction);

std::vector<double> log_weights(std::span<const ChainRun> chains);

struct BdmcExample {
  std::uint64_t example = 0;
  Vector z_exact;
  Vector x;
  double forward_lower = 0.0;
  double reverse_upper = 0.0;
  double gap = 0.0;  // reverse_upper - forward_lower; may be negative
  std::vector<ChainRun> forward_chains;
  std::vector<ChainRun> reverse_chains;
};

struct BdmcReport {
  std::vector<BdmcExample> examples;
  double mean_lower = 0.0;
  double mean_upper = 0.0;
  double mean_gap = 0.0;
};

/// Simulates n_examples (z*, x*) pairs from the model, then runs forward AIS
/// on x* and reverse AIS from z*. Every chain of every example is an
/// independent task spread over cfg.workers threads.
BdmcReport bdmc(const GenerativeModel& model, const AisConfig& cfg, int n_examples);

/// Same, for pairs the caller already simulated.
BdmcReport bdmc(const GenerativeModel& model, const AisConfig& cfg,
                std::span<const JointSample> samples);

struct PosteriorDraw {
  int chosen_chain = 0;
  Vector z;
  Vector decoded;
  std::vector<Vector> chain_z;
  std::vector<Vector> chain_decoded;
};

/// Resamples one chain with probability proportional to exp(log_weight) and
/// decodes its final state; also decodes every chain's final state.
PosteriorDraw posterior_decode(const GenerativeModel& model, std::span<const ChainRun> chains,
                               Rng& rng);

}  // namespace aiseval
