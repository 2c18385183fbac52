#include "aiseval/baselines.hpp"

#include "aiseval/logmath.hpp"
#include "aiseval/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace aiseval {

namespace {

GenerativeModel kde_model(const GenerativeModel& model, const KdeConfig& cfg) {
  if (!cfg.sigma) return model;
  if (model.obs().kind != ObservationKind::gaussian) {
    throw ContractError("KDE sigma override needs a Gaussian observation model");
  }
  return model.with_observation(ObservationModel::gaussian(*cfg.sigma));
}

template <typename Sink>
void for_each_kde_weight(const Vector& x, const GenerativeModel& model, const KdeConfig& cfg,
                         std::uint64_t seed, std::uint64_t example, Sink&& sink) {
  if (cfg.n_samples < 1) throw ContractError("KDE needs at least one sample");
  const GenerativeModel m = kde_model(model, cfg);
  if (x.size() != m.data_dim()) throw ContractError("observation has the wrong dimension");
  const std::uint64_t key = cfg.share_samples ? 0 : example;
  ForwardTape tape(m.decoder());
  for (long long k = 0; k < cfg.n_samples; ++k) {
    Rng rng = make_stream(seed, key, static_cast<std::uint64_t>(k), StreamKind::forward);
    const Vector z = standard_normal(rng, m.latent_dim());
    sink(log_obs(x, tape.forward(z), m.obs()));
  }
}

}  // namespace

std::vector<double> kde_log_weights(const Vector& x, const GenerativeModel& model,
                                    const KdeConfig& cfg, std::uint64_t seed,
                                    std::uint64_t example) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(0LL, cfg.n_samples)));
  for_each_kde_weight(x, model, cfg, seed, example, [&](double lw) { out.push_back(lw); });
  return out;
}

double kde_estimate(const Vector& x, const GenerativeModel& model, const KdeConfig& cfg,
                    std::uint64_t seed, std::uint64_t example) {
  RunningLogSumExp acc;
  for_each_kde_weight(x, model, cfg, seed, example, [&](double lw) { acc.add(lw); });
  return acc.log_mean();
}

double elbo(const Vector& x, const GenerativeModel& model, const EncoderProposal& q,
            int n_samples, Rng& rng) {
  if (n_samples < 1) throw ContractError("ELBO needs at least one sample");
  const DiagonalGaussian dist = q.distribution(x);
  double expected_loglik = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    expected_loglik += model.log_likelihood(x, dist.sample(rng));
  }
  expected_loglik /= n_samples;
  return expected_loglik - dist.kl_to_standard_normal();
}

double importance_log_weight(const Vector& x, const GenerativeModel& model,
                             const DiagonalGaussian& q, const Vector& z) {
  return model.log_joint(x, z) - q.log_density(z);
}

double iwae_bound(const Vector& x, const GenerativeModel& model, const EncoderProposal& q,
                  long long n_samples, Rng& rng) {
  if (n_samples < 1) throw ContractError("IWAE bound needs at least one sample");
  constexpr long long kBatch = 10'000;
  const DiagonalGaussian dist = q.distribution(x);
  ForwardTape tape(model.decoder());
  RunningLogSumExp total;
  std::vector<double> batch;
  batch.reserve(static_cast<std::size_t>(std::min(n_samples, kBatch)));
  long long done = 0;
  while (done < n_samples) {
    const long long n = std::min(kBatch, n_samples - done);
    batch.clear();
    for (long long k = 0; k < n; ++k) {
      const Vector z = dist.sample(rng);
      batch.push_back(log_prior(z) + log_obs(x, tape.forward(z), model.obs()) -
                      dist.log_density(z));
    }
    total.add(log_sum_exp(batch));
    done += n;
  }
  return total.log_sum() - std::log(static_cast<double>(n_samples));
}

void SigmaGrid::validate() const {
  if (values.empty()) throw ContractError("sigma grid is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) throw ContractError("sigma grid values must be positive");
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw ContractError("sigma grid must be strictly increasing");
    }
  }
}

bool SigmaGrid::contains(double sigma) const {
  return std::find(values.begin(), values.end(), sigma) != values.end();
}

SigmaGrid large_model_sigma_grid() { return {{0.005, 0.01, 0.015, 0.02, 0.025}}; }
SigmaGrid small_model_sigma_grid() { return {{0.015, 0.02, 0.025, 0.03, 0.035}}; }

std::string_view to_string(SigmaEstimator e) { return e == SigmaEstimator::ais ? "ais" : "kde"; }

SigmaEstimator parse_sigma_estimator(std::string_view name) {
  if (name == "ais") return SigmaEstimator::ais;
  if (name == "kde") return SigmaEstimator::kde;
  throw ContractError("unknown sigma estimator '" + std::string(name) + "'");
}

double estimate_at_sigma(const Vector& x, const GenerativeModel& model, double sigma,
                         SigmaEstimator estimator, const SigmaEvalConfig& cfg,
                         std::uint64_t example) {
  if (model.obs().kind != ObservationKind::gaussian) {
    throw ContractError("sigma evaluation needs a Gaussian observation model");
  }
  const GenerativeModel m = model.with_observation(ObservationModel::gaussian(sigma));
  if (estimator == SigmaEstimator::kde) {
    KdeConfig kde = cfg.kde;
    kde.sigma.reset();
    return kde_estimate(x, m, kde, cfg.ais.seed, example);
  }
  AisConfig ais = cfg.ais;
  ais.workers = 1;
  const auto path = AnnealingPath::from_prior(m, x);
  const auto chains = forward_ais(path, ais, example);
  return combine_chains(log_weights(chains), BoundDirection::lower).estimate;
}

namespace {

std::uint64_t id_of(std::span<const std::uint64_t> ids, std::size_t i) {
  return ids.empty() ? static_cast<std::uint64_t>(i) : ids[i];
}

void check_ids(std::span<const Vector> xs, std::span<const std::uint64_t> ids) {
  if (!ids.empty() && ids.size() != xs.size()) {
    throw ContractError("example id list must match the example list");
  }
}

}  // namespace

OptimalSigmaResult optimal_sigma_eval(std::span<const Vector> xs, const GenerativeModel& model,
                                      const SigmaGrid& grid, SigmaEstimator estimator,
                                      const SigmaEvalConfig& cfg,
                                      std::span<const std::uint64_t> ids) {
  grid.validate();
  check_ids(xs, ids);
  if (xs.empty()) throw ContractError("optimal sigma evaluation needs examples");

  // Extra column for the fixed sigma when it is not a grid member.
  const bool fixed_in_grid = grid.contains(cfg.fixed_sigma);
  std::vector<double> sigmas = grid.values;
  if (!fixed_in_grid) sigmas.push_back(cfg.fixed_sigma);
  const std::size_t ns = sigmas.size();

  std::vector<double> nats(xs.size() * ns);
  parallel_for(
      nats.size(),
      [&](std::size_t task) {
        const std::size_t i = task / ns;
        nats[task] = estimate_at_sigma(xs[i], model, sigmas[task % ns], estimator, cfg,
                                       id_of(ids, i));
      },
      cfg.workers);

  OptimalSigmaResult out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    OptimalSigmaRow row;
    row.example = id_of(ids, i);
    const auto first = nats.begin() + static_cast<std::ptrdiff_t>(i * ns);
    row.nats_per_sigma.assign(first, first + static_cast<std::ptrdiff_t>(grid.values.size()));
    const auto best = std::max_element(row.nats_per_sigma.begin(), row.nats_per_sigma.end());
    row.best_nats = *best;
    row.best_sigma = grid.values[static_cast<std::size_t>(best - row.nats_per_sigma.begin())];
    if (fixed_in_grid) {
      const auto pos = std::find(grid.values.begin(), grid.values.end(), cfg.fixed_sigma);
      row.fixed_nats = row.nats_per_sigma[static_cast<std::size_t>(pos - grid.values.begin())];
    } else {
      row.fixed_nats = *(first + static_cast<std::ptrdiff_t>(ns - 1));
    }
    row.improvement = row.best_nats - row.fixed_nats;
    out.mean_best += row.best_nats;
    out.mean_fixed += row.fixed_nats;
    out.mean_improvement += row.improvement;
    out.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(xs.size());
  out.mean_best /= n;
  out.mean_fixed /= n;
  out.mean_improvement /= n;
  return out;
}

std::vector<SweepPoint> sigma_sweep(std::span<const Vector> xs, const GenerativeModel& model,
                                    const SigmaGrid& grid, const SigmaEvalConfig& cfg,
                                    std::span<const std::uint64_t> ids) {
  grid.validate();
  check_ids(xs, ids);
  if (xs.empty()) throw ContractError("sigma sweep needs examples");
  const std::size_t ns = grid.values.size();
  const std::size_t nx = xs.size();

  // Task layout: [estimator][sigma][example].
  std::vector<double> nats(2 * ns * nx);
  parallel_for(
      nats.size(),
      [&](std::size_t task) {
        const auto est = task / (ns * nx) == 0 ? SigmaEstimator::ais : SigmaEstimator::kde;
        const std::size_t s = (task / nx) % ns;
        const std::size_t i = task % nx;
        nats[task] = estimate_at_sigma(xs[i], model, grid.values[s], est, cfg, id_of(ids, i));
      },
      cfg.workers);

  std::vector<SweepPoint> out;
  for (std::size_t s = 0; s < ns; ++s) {
    const std::span<const double> ais(nats.data() + s * nx, nx);
    const std::span<const double> kde(nats.data() + (ns + s) * nx, nx);
    const auto a = mean_and_stderr(ais);
    const auto k = mean_and_stderr(kde);
    out.push_back({grid.values[s], a.mean, a.std_error, k.mean, k.std_error});
  }
  return out;
}

}  // namespace aiseval
