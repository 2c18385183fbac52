#include "aiseval/prob_model.hpp"

#include <algorithm>
#include <cmath>

namespace aiseval {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

void check_same_size(const Vector& x, const Vector& mean) {
  if (x.size() != mean.size()) {
    throw ContractError("observation has " + std::to_string(x.size()) +
                        " entries but mean has " + std::to_string(mean.size()));
  }
}

void check_binary(const Vector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) != 0.0 && x(i) != 1.0) {
      throw ContractError("Bernoulli observation model needs binary data; entry " +
                          std::to_string(i) + " is " + std::to_string(x(i)));
    }
  }
}

// Fused log p(x|mean) and its mean-gradient for the hot path.
double log_obs_and_grad(const Vector& x, const Vector& mean, const ObservationModel& obs,
                        Vector& grad) {
  check_same_size(x, mean);
  const auto n = x.size();
  grad.resize(n);
  if (obs.kind == ObservationKind::gaussian) {
    const double inv_var = 1.0 / (obs.sigma * obs.sigma);
    grad = (x - mean) * inv_var;
    const double sq = (x - mean).squaredNorm();
    return -0.5 * static_cast<double>(n) * (kLog2Pi + 2.0 * std::log(obs.sigma)) -
           0.5 * sq * inv_var;
  }
  check_binary(x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double raw = mean(i);
    const bool clamped = raw < kBernoulliClamp || raw > 1.0 - kBernoulliClamp;
    const double m = std::clamp(raw, kBernoulliClamp, 1.0 - kBernoulliClamp);
    if (x(i) == 1.0) {
      total += std::log(m);
      grad(i) = clamped ? 0.0 : 1.0 / m;
    } else {
      total += std::log1p(-m);
      grad(i) = clamped ? 0.0 : -1.0 / (1.0 - m);
    }
  }
  return total;
}

}  // namespace

ObservationModel ObservationModel::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ContractError("observation sigma must be positive and finite");
  }
  return {ObservationKind::gaussian, sigma};
}

ObservationModel ObservationModel::bernoulli() { return {ObservationKind::bernoulli, 1.0}; }

double log_prior(const Vector& z) {
  return -0.5 * static_cast<double>(z.size()) * kLog2Pi - 0.5 * z.squaredNorm();
}

Vector grad_log_prior(const Vector& z) { return -z; }

double log_obs(const Vector& x, const Vector& mean, const ObservationModel& obs) {
  Vector unused;
  return log_obs_and_grad(x, mean, obs, unused);
}

Vector grad_log_obs(const Vector& x, const Vector& mean, const ObservationModel& obs) {
  Vector g;
  log_obs_and_grad(x, mean, obs, g);
  return g;
}

GenerativeModel::GenerativeModel(MlpNetwork decoder, ObservationModel obs)
    : decoder_(std::move(decoder)), obs_(obs) {
  if (obs_.kind == ObservationKind::gaussian && !(obs_.sigma > 0.0)) {
    throw ContractError("observation sigma must be positive");
  }
}

GenerativeModel GenerativeModel::with_observation(ObservationModel obs) const {
  return GenerativeModel(decoder_, obs);
}

double GenerativeModel::log_likelihood(const Vector& x, const Vector& z) const {
  return log_obs(x, decoder_.forward(z), obs_);
}

double GenerativeModel::log_joint(const Vector& x, const Vector& z) const {
  return log_prior(z) + log_likelihood(x, z);
}

JointSample simulate(const GenerativeModel& model, Rng& rng) {
  JointSample s;
  s.z = standard_normal(rng, model.latent_dim());
  const Vector mean = model.decoder().forward(s.z);
  if (model.obs().kind == ObservationKind::gaussian) {
    s.x = mean + model.obs().sigma * standard_normal(rng, model.data_dim());
  } else {
    s.x.resize(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      s.x(i) = uniform01(rng) < mean(i) ? 1.0 : 0.0;
    }
  }
  return s;
}

double DiagonalGaussian::log_density(const Vector& z) const {
  const auto u = ((z - mean).array() * (-log_std.array()).exp());
  return -0.5 * static_cast<double>(z.size()) * kLog2Pi - log_std.sum() -
         0.5 * u.square().sum();
}

Vector DiagonalGaussian::grad_log_density(const Vector& z) const {
  return -(z - mean).cwiseProduct((-2.0 * log_std.array()).exp().matrix());
}

Vector DiagonalGaussian::sample(Rng& rng) const {
  const Vector eps = standard_normal(rng, static_cast<int>(mean.size()));
  return mean + eps.cwiseProduct(log_std.array().exp().matrix());
}

double DiagonalGaussian::kl_to_standard_normal() const {
  const auto var = (2.0 * log_std.array()).exp();
  return 0.5 * (mean.array().square() + var - 1.0).sum() - log_std.sum();
}

EncoderProposal::EncoderProposal(MlpNetwork encoder) : encoder_(std::move(encoder)) {
  if (encoder_.role() != NetRole::encoder) {
    throw ContractError("encoder proposal needs a network with role=encoder");
  }
  if (encoder_.output_dim() % 2 != 0) {
    throw ContractError("encoder output must hold mean and log-std halves (even size)");
  }
}

DiagonalGaussian EncoderProposal::distribution(const Vector& x) const {
  const Vector out = encoder_.forward(x);
  const int d = latent_dim();
  return {out.head(d), out.tail(d)};
}

double EncoderProposal::log_q(const Vector& x, const Vector& z) const {
  return distribution(x).log_density(z);
}

Vector EncoderProposal::sample(const Vector& x, Rng& rng) const {
  return distribution(x).sample(rng);
}

AnnealingPath::AnnealingPath(const GenerativeModel& model, Vector x,
                             std::optional<DiagonalGaussian> init)
    : model_(&model), x_(std::move(x)), initial_(std::move(init)) {
  if (x_.size() != model.data_dim()) {
    throw ContractError("observation has " + std::to_string(x_.size()) +
                        " entries, model data_dim is " + std::to_string(model.data_dim()));
  }
  if (model.obs().kind == ObservationKind::bernoulli) check_binary(x_);
}

AnnealingPath AnnealingPath::from_prior(const GenerativeModel& model, Vector x) {
  return AnnealingPath(model, std::move(x), std::nullopt);
}

AnnealingPath AnnealingPath::from_encoder(const GenerativeModel& model,
                                          const EncoderProposal& q, Vector x) {
  if (q.latent_dim() != model.latent_dim() || q.data_dim() != model.data_dim()) {
    throw ContractError("encoder dimensions do not match the generative model");
  }
  auto init = q.distribution(x);
  return AnnealingPath(model, std::move(x), std::move(init));
}

Vector AnnealingPath::sample_initial(Rng& rng) const {
  if (initial_) return initial_->sample(rng);
  return standard_normal(rng, model_->latent_dim());
}

double AnnealingPath::log_initial(const Vector& z) const {
  return initial_ ? initial_->log_density(z) : log_prior(z);
}

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ContractError("beta must lie in [0, 1], got " + std::to_string(beta));
  }
}

double AnnealingPath::annealed_logf(const Vector& z, double beta) const {
  AnnealedTarget target(*this, beta);
  return target.evaluate(z).log_density;
}

Vector AnnealingPath::annealed_grad(const Vector& z, double beta) const {
  AnnealedTarget target(*this, beta);
  return target.evaluate(z).gradient;
}

void PathPoint::set_beta(double beta) {
  log_density = log_initial + beta * log_ratio;
  gradient = grad_initial + beta * grad_ratio;
}

AnnealedTarget::AnnealedTarget(const AnnealingPath& path, double beta)
    : path_(&path), beta_(beta), tape_(path.model().decoder()) {
  check_beta(beta);
}

void AnnealedTarget::set_beta(double beta) {
  check_beta(beta);
  beta_ = beta;
}

PathPoint AnnealedTarget::evaluate(const Vector& z) {
  const GenerativeModel& model = path_->model();
  const Vector& mean = tape_.forward(z);
  const double loglik = log_obs_and_grad(path_->x(), mean, model.obs(), grad_mean_);
  tape_.backward(grad_mean_, grad_z_);

  PathPoint p;
  if (const auto& q = path_->initial_distribution()) {
    p.log_initial = q->log_density(z);
    p.grad_initial = q->grad_log_density(z);
    p.log_ratio = log_prior(z) + loglik - p.log_initial;
    p.grad_ratio = grad_z_ - z - p.grad_initial;
  } else {
    // Prior path: the ratio is exactly the log-likelihood, kept as its own
    // term so a T=2 run reproduces likelihood weighting bit for bit.
    p.log_initial = log_prior(z);
    p.grad_initial = -z;
    p.log_ratio = loglik;
    p.grad_ratio = grad_z_;
  }
  p.set_beta(beta_);
  return p;
}

}  // namespace aiseval
