#include "aiseval/ais.hpp"

#include "aiseval/logmath.hpp"
#include "aiseval/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace aiseval {

std::string_view to_string(ScheduleKind k) {
  return k == ScheduleKind::sigmoid ? "sigmoid" : "linear";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "sigmoid") return ScheduleKind::sigmoid;
  throw ContractError("unknown schedule kind '" + std::string(name) + "'");
}

Schedule make_schedule(int n_steps, ScheduleKind kind) {
  if (n_steps < 2) throw ContractError("an annealing schedule needs T >= 2");
  Schedule s;
  s.kind = kind;
  s.betas.resize(n_steps);
  const double last = static_cast<double>(n_steps - 1);
  if (kind == ScheduleKind::linear) {
    for (int t = 0; t < n_steps; ++t) s.betas[t] = static_cast<double>(t) / last;
  } else {
    constexpr double kScale = 4.0;
    auto logistic = [](double u) { return 1.0 / (1.0 + std::exp(-u)); };
    const double lo = logistic(-kScale);
    const double hi = logistic(kScale);
    for (int t = 0; t < n_steps; ++t) {
      const double u = kScale * (2.0 * static_cast<double>(t) / last - 1.0);
      s.betas[t] = (logistic(u) - lo) / (hi - lo);
    }
  }
  s.betas.front() = 0.0;
  s.betas.back() = 1.0;
  return s;
}

void AisConfig::validate() const {
  if (n_chains < 1) throw ContractError("AIS needs at least one chain");
  if (schedule.size() < 2) throw ContractError("AIS schedule needs T >= 2");
  if (schedule.betas.front() != 0.0 || schedule.betas.back() != 1.0) {
    throw ContractError("AIS schedule must start at 0 and end at 1");
  }
  for (int t = 1; t < schedule.size(); ++t) {
    if (schedule.betas[t] < schedule.betas[t - 1]) {
      throw ContractError("AIS schedule must be nondecreasing");
    }
  }
  hmc.validate();
}

namespace {

HmcChain<PathPoint> start_chain(AnnealedTarget& target, Vector z, const AisConfig& cfg) {
  HmcChain<PathPoint> chain;
  chain.point = target.evaluate(z);
  chain.z = std::move(z);
  chain.step_size = cfg.hmc.step_size;
  return chain;
}

ChainRun finish(HmcChain<PathPoint>&& chain, double log_weight) {
  ChainRun run;
  run.diverged = !std::isfinite(log_weight);
  run.log_weight = run.diverged ? kNegInf : log_weight;
  run.final_z = std::move(chain.z);
  run.hmc_stats = chain.stats;
  run.final_step_size = chain.step_size;
  return run;
}

}  // namespace

ChainRun run_forward_chain(const AnnealingPath& path, const AisConfig& cfg,
                           std::uint64_t example, int chain_index) {
  const auto& betas = cfg.schedule.betas;
  Rng rng = make_stream(cfg.seed, example, static_cast<std::uint64_t>(chain_index),
                        StreamKind::forward);
  AnnealedTarget target(path, betas.front());
  auto chain = start_chain(target, path.sample_initial(rng), cfg);

  double log_weight = 0.0;
  const std::size_t n = betas.size();
  for (std::size_t t = 1; t < n; ++t) {
    const double dbeta = betas[t] - betas[t - 1];
    if (dbeta != 0.0) log_weight += dbeta * chain.point.log_ratio;
    if (!std::isfinite(log_weight)) break;
    if (t + 1 == n) break;
    target.set_beta(betas[t]);
    chain.point.set_beta(betas[t]);
    chain.step(target, cfg.hmc, rng);
  }
  return finish(std::move(chain), log_weight);
}

ChainRun run_reverse_chain(const AnnealingPath& path, const Vector& z_exact,
                           const AisConfig& cfg, std::uint64_t example, int chain_index) {
  if (path.uses_encoder()) {
    throw ContractError("reverse AIS is defined here for prior-initial paths only");
  }
  if (z_exact.size() != path.model().latent_dim()) {
    throw ContractError("exact latent sample has the wrong dimension");
  }
  const auto& betas = cfg.schedule.betas;
  Rng rng = make_stream(cfg.seed, example, static_cast<std::uint64_t>(chain_index),
                        StreamKind::reverse);
  AnnealedTarget target(path, betas.back());
  auto chain = start_chain(target, z_exact, cfg);

  double log_weight = 0.0;
  for (std::size_t t = betas.size() - 1; t >= 1; --t) {
    const double dbeta = betas[t] - betas[t - 1];
    if (dbeta != 0.0) log_weight -= dbeta * chain.point.log_ratio;
    if (!std::isfinite(log_weight)) break;
    if (t == 1) break;
    target.set_beta(betas[t - 1]);
    chain.point.set_beta(betas[t - 1]);
    chain.step(target, cfg.hmc, rng);
  }
  return finish(std::move(chain), log_weight);
}

std::vector<ChainRun> forward_ais(const AnnealingPath& path, const AisConfig& cfg,
                                  std::uint64_t example) {
  cfg.validate();
  return parallel_map<ChainRun>(
      static_cast<std::size_t>(cfg.n_chains),
      [&](std::size_t k) { return run_forward_chain(path, cfg, example, static_cast<int>(k)); },
      cfg.workers);
}

std::vector<ChainRun> reverse_ais(const AnnealingPath& path, const Vector& z_exact,
                                  const AisConfig& cfg, std::uint64_t example) {
  cfg.validate();
  return parallel_map<ChainRun>(
      static_cast<std::size_t>(cfg.n_chains),
      [&](std::size_t k) {
        return run_reverse_chain(path, z_exact, cfg, example, static_cast<int>(k));
      },
      cfg.workers);
}

ChainEstimate combine_chains(std::span<const double> log_weights, BoundDirection direction) {
  if (log_weights.empty()) throw EstimationError("no chains to combine");
  const double lme = log_mean_exp(log_weights);
  if (!std::isfinite(lme)) {
    throw EstimationError("every importance weight is zero (log weight -inf)");
  }
  const double n = static_cast<double>(log_weights.size());
  double var = 0.0;
  if (log_weights.size() > 1) {
    // Weights relative to their mean, so the mean is exactly 1.
    for (double lw : log_weights) {
      const double w = std::exp(lw - lme);
      var += (w - 1.0) * (w - 1.0);
    }
    var /= n - 1.0;
  }
  ChainEstimate out;
  out.estimate = direction == BoundDirection::lower ? lme : -lme;
  out.std_error = std::sqrt(var / n);
  return out;
}

std::vector<double> log_weights(std::span<const ChainRun> chains) {
  std::vector<double> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.log_weight);
  return out;
}

BdmcReport bdmc(const GenerativeModel& model, const AisConfig& cfg, int n_examples) {
  if (n_examples < 1) throw ContractError("BDMC needs at least one example");
  std::vector<JointSample> samples;
  samples.reserve(n_examples);
  for (int e = 0; e < n_examples; ++e) {
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(e), 0, StreamKind::simulate);
    samples.push_back(simulate(model, rng));
  }
  return bdmc(model, cfg, samples);
}

BdmcReport bdmc(const GenerativeModel& model, const AisConfig& cfg,
                std::span<const JointSample> samples) {
  cfg.validate();
  const std::size_t n = samples.size();
  const std::size_t k = static_cast<std::size_t>(cfg.n_chains);

  std::vector<AnnealingPath> paths;
  paths.reserve(n);
  for (const auto& s : samples) paths.push_back(AnnealingPath::from_prior(model, s.x));

  // Task layout: [example][direction][chain].
  std::vector<ChainRun> runs(n * 2 * k);
  parallel_for(
      runs.size(),
      [&](std::size_t task) {
        const std::size_t e = task / (2 * k);
        const std::size_t dir = (task / k) % 2;
        const int c = static_cast<int>(task % k);
        runs[task] = dir == 0 ? run_forward_chain(paths[e], cfg, e, c)
                              : run_reverse_chain(paths[e], samples[e].z, cfg, e, c);
      },
      cfg.workers);

  BdmcReport report;
  report.examples.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    BdmcExample& ex = report.examples[e];
    ex.example = e;
    ex.z_exact = samples[e].z;
    ex.x = samples[e].x;
    const auto first = runs.begin() + static_cast<std::ptrdiff_t>(e * 2 * k);
    ex.forward_chains.assign(first, first + static_cast<std::ptrdiff_t>(k));
    ex.reverse_chains.assign(first + static_cast<std::ptrdiff_t>(k),
                             first + static_cast<std::ptrdiff_t>(2 * k));
    ex.forward_lower =
        combine_chains(log_weights(ex.forward_chains), BoundDirection::lower).estimate;
    ex.reverse_upper =
        combine_chains(log_weights(ex.reverse_chains), BoundDirection::upper).estimate;
    ex.gap = ex.reverse_upper - ex.forward_lower;
    report.mean_lower += ex.forward_lower;
    report.mean_upper += ex.reverse_upper;
    report.mean_gap += ex.gap;
  }
  const double dn = static_cast<double>(n);
  report.mean_lower /= dn;
  report.mean_upper /= dn;
  report.mean_gap /= dn;
  return report;
}

PosteriorDraw posterior_decode(const GenerativeModel& model, std::span<const ChainRun> chains,
                               Rng& rng) {
  if (chains.empty()) throw ContractError("posterior_decode needs at least one chain");
  const auto lw = log_weights(chains);
  const double top = *std::max_element(lw.begin(), lw.end());
  if (!std::isfinite(top)) throw EstimationError("every chain has zero weight");

  std::vector<double> w;
  w.reserve(lw.size());
  for (double v : lw) w.push_back(std::exp(v - top));
  std::discrete_distribution<int> pick(w.begin(), w.end());

  PosteriorDraw out;
  out.chosen_chain = pick(rng);
  for (const auto& c : chains) {
    out.chain_z.push_back(c.final_z);
    out.chain_decoded.push_back(model.decoder().forward(c.final_z));
  }
  out.z = out.chain_z[out.chosen_chain];
  out.decoded = out.chain_decoded[out.chosen_chain];
  return out;
}

}  // namespace aiseval
