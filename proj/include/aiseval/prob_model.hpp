#pragma once

#include "aiseval/net.hpp"
#include "aiseval/rng.hpp"
#include "aiseval/types.hpp"

#include <optional>

namespace aiseval {

enum class ObservationKind { gaussian, bernoulli };

/// Bernoulli means are clamped to [eps, 1-eps] before taking logs.
inline constexpr double kBernoulliClamp = 1e-7;

/// p(x|mean). Gaussian sigma is a pixel-intensity standard deviation in the
/// same [0,1] units as the data.
struct ObservationModel {
  ObservationKind kind = ObservationKind::gaussian;
  double sigma = 1.0;

  static ObservationModel gaussian(double sigma);
  static ObservationModel bernoulli();
};

double log_prior(const Vector& z);
Vector grad_log_prior(const Vector& z);

/// Throws ContractError on dimension mismatch, or on non-binary x under the
/// Bernoulli model.
double log_obs(const Vector& x, const Vector& mean, const ObservationModel& obs);
/// d log_obs / d mean.
Vector grad_log_obs(const Vector& x, const Vector& mean, const ObservationModel& obs);

/// p(z) p(x|z) with a standard normal prior and a decoder network for the mean.
class GenerativeModel {
 public:
  GenerativeModel(MlpNetwork decoder, ObservationModel obs);

  int latent_dim() const { return decoder_.input_dim(); }
  int data_dim() const { return decoder_.output_dim(); }
  const MlpNetwork& decoder() const { return decoder_; }
  const ObservationModel& obs() const { return obs_; }

  GenerativeModel with_observation(ObservationModel obs) const;

  double log_likelihood(const Vector& x, const Vector& z) const;
  double log_joint(const Vector& x, const Vector& z) const;

 private:
  MlpNetwork decoder_;
  ObservationModel obs_;
};

struct JointSample {
  Vector z;
  Vector x;
};

/// Draws z ~ N(0, I) and then x ~ p(x|z). The returned z is an exact
/// posterior sample for x, which reverse AIS starts from.
JointSample simulate(const GenerativeModel& model, Rng& rng);

struct DiagonalGaussian {
  Vector mean;
  Vector log_std;

  double log_density(const Vector& z) const;
  Vector grad_log_density(const Vector& z) const;
  /// mean + exp(log_std) * eps.
  Vector sample(Rng& rng) const;
  /// KL(this || N(0, I)), closed form.
  double kl_to_standard_normal() const;
};

/// q(z|x) given by an encoder network emitting (mean, log_std).
class EncoderProposal {
 public:
  explicit EncoderProposal(MlpNetwork encoder);

  int latent_dim() const { return encoder_.output_dim() / 2; }
  int data_dim() const { return encoder_.input_dim(); }
  const MlpNetwork& encoder() const { return encoder_; }

  DiagonalGaussian distribution(const Vector& x) const;
  double log_q(const Vector& x, const Vector& z) const;
  Vector sample(const Vector& x, Rng& rng) const;

 private:
  MlpNetwork encoder_;
};

/// Geometric bridge f_beta = f_init^(1-beta) * p(z, x)^beta between a
/// normalized initial density (prior or encoder) and the joint.
///
/// The path references its model; the model must outlive it.
class AnnealingPath {
 public:
  static AnnealingPath from_prior(const GenerativeModel& model, Vector x);
  static AnnealingPath from_encoder(const GenerativeModel& model, const EncoderProposal& q,
                                    Vector x);

  bool uses_encoder() const { return initial_.has_value(); }
  const GenerativeModel& model() const { return *model_; }
  const Vector& x() const { return x_; }
  /// q(z|x) for encoder paths.
  const std::optional<DiagonalGaussian>& initial_distribution() const { return initial_; }

  Vector sample_initial(Rng& rng) const;
  double log_initial(const Vector& z) const;

  double annealed_logf(const Vector& z, double beta) const;
  Vector annealed_grad(const Vector& z, double beta) const;

 private:
  AnnealingPath(const GenerativeModel& model, Vector x, std::optional<DiagonalGaussian> init);

  const GenerativeModel* model_;
  Vector x_;
  std::optional<DiagonalGaussian> initial_;
};

/// Everything known about one latent state on an annealing path. The
/// log_density and gradient fields are for the beta of the last evaluation
/// or set_beta() call; the split into initial and ratio parts lets a state
/// be re-targeted to a new beta without another network pass.
struct PathPoint {
  double log_initial = 0.0;  // log f_1(z)
  double log_ratio = 0.0;    // log f_T(z) - log f_1(z)
  Vector grad_initial;
  Vector grad_ratio;
  double log_density = 0.0;
  Vector gradient;

  void set_beta(double beta);
};

/// Stateful evaluator for one chain; owns scratch buffers, so it must not be
/// shared across threads.
class AnnealedTarget {
 public:
  explicit AnnealedTarget(const AnnealingPath& path, double beta = 0.0);

  void set_beta(double beta);
  double beta() const { return beta_; }
  const AnnealingPath& path() const { return *path_; }

  PathPoint evaluate(const Vector& z);

 private:
  const AnnealingPath* path_;
  double beta_;
  ForwardTape tape_;
  Vector grad_mean_;
  Vector grad_z_;
};

void check_beta(double beta);

}  // namespace aiseval
