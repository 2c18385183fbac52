#pragma once

#include "aiseval/ais.hpp"
#include "aiseval/prob_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace aiseval {

// Estimators that AIS is benchmarked against. All of them return stochastic
// lower bounds on log p(x).

struct KdeConfig {
  long long n_samples = 1'000'000;
  /// Overrides the model's Gaussian sigma when set.
  std::optional<double> sigma;
  /// Reuse one bank of prior samples for every example instead of fresh
  /// draws per example.
  bool share_samples = false;
};

/// log p(x|z_k) for K prior draws. Sample k uses the stream of forward AIS
/// chain k for the same (seed, example), so these match a T=2 AIS run bit
/// for bit.
std::vector<double> kde_log_weights(const Vector& x, const GenerativeModel& model,
                                    const KdeConfig& cfg, std::uint64_t seed,
                                    std::uint64_t example);

/// Likelihood weighting with prior samples: log mean_k p(x|z_k). Runs in
/// constant memory for any K.
double kde_estimate(const Vector& x, const GenerativeModel& model, const KdeConfig& cfg,
                    std::uint64_t seed, std::uint64_t example);

/// E_q[log p(x|z)] - KL(q || p), with the expectation over n_samples
/// reparametrized draws and the KL term in closed form.
double elbo(const Vector& x, const GenerativeModel& model, const EncoderProposal& q,
            int n_samples, Rng& rng);

/// log p(z) + log p(x|z) - log q(z|x).
double importance_log_weight(const Vector& x, const GenerativeModel& model,
                             const DiagonalGaussian& q, const Vector& z);

/// log mean_k exp(importance_log_weight(z_k)) with z_k ~ q(z|x), accumulated
/// in batches so memory stays flat for K in the hundreds of thousands.
double iwae_bound(const Vector& x, const GenerativeModel& model, const EncoderProposal& q,
                  long long n_samples, Rng& rng);

/// Strictly increasing list of observation sigmas.
struct SigmaGrid {
  std::vector<double> values;

  void validate() const;
  bool contains(double sigma) const;
};

/// Per-example sigma grids used for the 50-dimensional and 10-dimensional
/// continuous-MNIST models respectively.
SigmaGrid large_model_sigma_grid();
SigmaGrid small_model_sigma_grid();

enum class SigmaEstimator { ais, kde };

std::string_view to_string(SigmaEstimator e);
SigmaEstimator parse_sigma_estimator(std::string_view name);

struct SigmaEvalConfig {
  AisConfig ais;
  KdeConfig kde;
  /// The shared sigma the per-example optimum is compared against.
  double fixed_sigma = 0.02;
  std::size_t workers = 1;
};

struct OptimalSigmaRow {
  std::uint64_t example = 0;
  std::vector<double> nats_per_sigma;  // aligned with the grid
  double best_sigma = 0.0;
  double best_nats = 0.0;
  double fixed_nats = 0.0;
  double improvement = 0.0;  // best_nats - fixed_nats
};

struct OptimalSigmaResult {
  std::vector<OptimalSigmaRow> rows;
  double mean_best = 0.0;
  double mean_fixed = 0.0;
  double mean_improvement = 0.0;
};

/// Evaluates every example at every grid sigma and keeps the per-example
/// maximum. Example ids default to positions in `xs`. All sigmas reuse the
/// same random streams, so the comparison across sigma is paired.
OptimalSigmaResult optimal_sigma_eval(std::span<const Vector> xs, const GenerativeModel& model,
                                      const SigmaGrid& grid, SigmaEstimator estimator,
                                      const SigmaEvalConfig& cfg,
                                      std::span<const std::uint64_t> ids = {});

struct SweepPoint {
  double sigma = 0.0;
  double mean_ais = 0.0;
  double stderr_ais = 0.0;
  double mean_kde = 0.0;
  double stderr_kde = 0.0;
};

/// AIS and KDE curves of mean log-likelihood against sigma.
std::vector<SweepPoint> sigma_sweep(std::span<const Vector> xs, const GenerativeModel& model,
                                    const SigmaGrid& grid, const SigmaEvalConfig& cfg,
                                    std::span<const std::uint64_t> ids = {});

/// One example's estimate under one observation sigma.
double estimate_at_sigma(const Vector& x, const GenerativeModel& model, double sigma,
                         SigmaEstimator estimator, const SigmaEvalConfig& cfg,
                         std::uint64_t example);

}  // namespace aiseval
