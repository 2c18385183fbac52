#include "aiseval/prob_model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace aiseval;

namespace {

constexpr double kPi = std::numbers::pi;

// Scalar-loop reimplementation of the Gaussian observation density.
double gaussian_loop(const Vector& x, const Vector& m, double sigma) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double r = x(i) - m(i);
    s += -0.5 * std::log(2.0 * kPi * sigma * sigma) - r * r / (2.0 * sigma * sigma);
  }
  return s;
}

GenerativeModel small_model(std::mt19937_64& rng, ObservationModel obs) {
  return GenerativeModel(
      oracle::random_net({3, 6, 5}, {Activation::tanh, Activation::sigmoid}, rng), obs);
}

Vector binary_vector(int n, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.5);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = b(rng) ? 1.0 : 0.0;
  return v;
}

}  // namespace

TEST_SUITE("prob_model") {
  TEST_CASE("log prior values and gradient") {
    CHECK(log_prior(Vector::Zero(1)) == doctest::Approx(-0.918938533204673).epsilon(1e-12));
    CHECK(log_prior(Vector::Ones(2)) == doctest::Approx(-2.837877066409345).epsilon(1e-12));
    Vector z(2);
    z << 3.0, -2.0;
    const Vector g = grad_log_prior(z);
    CHECK(g(0) == -3.0);
    CHECK(g(1) == 2.0);
  }

  TEST_CASE("gaussian density at zero residual") {
    const Vector x = Vector::Constant(4, 0.3);
    const double want = -2.0 * std::log(2.0 * kPi * 0.01);
    CHECK(log_obs(x, x, ObservationModel::gaussian(0.1)) == doctest::Approx(want).epsilon(1e-14));
    CHECK(want == doctest::Approx(5.534586).epsilon(1e-6));
  }

  TEST_CASE("bernoulli density at mean one half") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 5; ++k) {
      const Vector x = binary_vector(8, rng);
      CHECK(log_obs(x, Vector::Constant(8, 0.5), ObservationModel::bernoulli()) ==
            doctest::Approx(8.0 * std::log(0.5)).epsilon(1e-14));
    }
  }

  TEST_CASE("gaussian density matches a scalar loop") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
      const Vector x = oracle::random_vector(30, rng);
      const Vector m = oracle::random_vector(30, rng);
      const double sigma = 0.05 + 0.1 * k;
      const double want = gaussian_loop(x, m, sigma);
      CHECK(std::abs(log_obs(x, m, ObservationModel::gaussian(sigma)) - want) <=
            1e-10 * std::abs(want));
    }
  }

  TEST_CASE("bernoulli rejects non-binary data") {
    Vector x = Vector::Zero(3);
    x(1) = 0.4;
    CHECK_THROWS_AS(log_obs(x, Vector::Constant(3, 0.5), ObservationModel::bernoulli()),
                    ContractError);
  }

  TEST_CASE("bernoulli clamp keeps the density finite") {
    Vector x(4), m(4);
    x << 1, 0, 1, 0;
    m << 0.0, 1.0, 1.0, 0.0;
    const double lp = log_obs(x, m, ObservationModel::bernoulli());
    CHECK(std::isfinite(lp));
    CHECK(lp == doctest::Approx(2.0 * std::log(kBernoulliClamp) + 2.0 * std::log1p(-kBernoulliClamp)));
  }

  TEST_CASE("observation contract errors") {
    CHECK_THROWS_AS(ObservationModel::gaussian(0.0), ContractError);
    CHECK_THROWS_AS(ObservationModel::gaussian(-1.0), ContractError);
    CHECK_THROWS_AS(log_obs(Vector::Zero(3), Vector::Zero(4), ObservationModel::gaussian(1.0)),
                    ContractError);
  }

  TEST_CASE("observation gradient matches finite differences") {
    std::mt19937_64 rng(3);
    const Vector x = oracle::random_vector(10, rng);
    const Vector m = oracle::random_vector(10, rng);
    const auto obs = ObservationModel::gaussian(0.3);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return log_obs(x, v, obs); }, m);
    CHECK(oracle::rel_err(grad_log_obs(x, m, obs), fd) <= 1e-4);

    const Vector xb = binary_vector(10, rng);
    Vector mb(10);
    for (int i = 0; i < 10; ++i) mb(i) = 0.1 + 0.08 * i;
    const auto bern = ObservationModel::bernoulli();
    const Vector fdb =
        oracle::fd_gradient([&](const Vector& v) { return log_obs(xb, v, bern); }, mb, 1e-6);
    CHECK(oracle::rel_err(grad_log_obs(xb, mb, bern), fdb) <= 1e-4);
  }

  TEST_CASE("joint is prior plus likelihood") {
    std::mt19937_64 rng(4);
    const auto model = small_model(rng, ObservationModel::gaussian(0.2));
    const Vector z = oracle::random_vector(3, rng);
    const Vector x = oracle::random_vector(5, rng);
    CHECK(model.log_joint(x, z) ==
          doctest::Approx(log_prior(z) + log_obs(x, model.decoder().forward(z), model.obs())));
    CHECK(model.latent_dim() == 3);
    CHECK(model.data_dim() == 5);
  }

  TEST_CASE("annealed endpoints") {
    std::mt19937_64 rng(5);
    const auto model = small_model(rng, ObservationModel::gaussian(0.2));
    const Vector x = oracle::random_vector(5, rng);
    const auto path = AnnealingPath::from_prior(model, x);
    const Vector z = oracle::random_vector(3, rng);
    CHECK(path.annealed_logf(z, 0.0) == log_prior(z));
    CHECK(path.annealed_logf(z, 1.0) == doctest::Approx(model.log_joint(x, z)).epsilon(1e-14));

    const EncoderProposal q(
        oracle::random_net({5, 6}, {Activation::linear}, rng, NetRole::encoder));
    const auto enc = AnnealingPath::from_encoder(model, q, x);
    CHECK(enc.annealed_logf(z, 0.0) == doctest::Approx(q.log_q(x, z)).epsilon(1e-14));
    CHECK(enc.annealed_logf(z, 1.0) == doctest::Approx(model.log_joint(x, z)).epsilon(1e-12));
  }

  TEST_CASE("annealed density is the geometric bridge") {
    std::mt19937_64 rng(6);
    const auto model = small_model(rng, ObservationModel::gaussian(0.2));
    const Vector x = oracle::random_vector(5, rng);
    const EncoderProposal q(
        oracle::random_net({5, 6}, {Activation::linear}, rng, NetRole::encoder));
    const auto enc = AnnealingPath::from_encoder(model, q, x);
    const Vector z = oracle::random_vector(3, rng);
    const double beta = 0.37;
    const double want = (1.0 - beta) * q.log_q(x, z) + beta * model.log_joint(x, z);
    CHECK(enc.annealed_logf(z, beta) == doctest::Approx(want).epsilon(1e-12));
    const auto prior = AnnealingPath::from_prior(model, x);
    CHECK(prior.annealed_logf(z, beta) ==
          doctest::Approx(log_prior(z) + beta * model.log_likelihood(x, z)).epsilon(1e-12));
  }

  TEST_CASE("annealed gradients match finite differences") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const bool bern = trial % 2 == 1;
      const auto model =
          small_model(rng, bern ? ObservationModel::bernoulli() : ObservationModel::gaussian(0.3));
      const Vector x = bern ? binary_vector(5, rng) : oracle::random_vector(5, rng, 0.5);
      const EncoderProposal q(
          oracle::random_net({5, 6}, {Activation::tanh}, rng, NetRole::encoder));
      const Vector z = oracle::random_vector(3, rng);
      for (double beta : {0.0, 0.37, 1.0}) {
        const auto prior = AnnealingPath::from_prior(model, x);
        const auto enc = AnnealingPath::from_encoder(model, q, x);
        for (const AnnealingPath* p : {&prior, &enc}) {
          const Vector fd = oracle::fd_gradient(
              [&](const Vector& v) { return p->annealed_logf(v, beta); }, z);
          CHECK(oracle::rel_err(p->annealed_grad(z, beta), fd) <= 1e-4);
        }
      }
    }
  }

  TEST_CASE("beta outside [0, 1] is rejected") {
    std::mt19937_64 rng(8);
    const auto model = small_model(rng, ObservationModel::gaussian(0.2));
    const auto path = AnnealingPath::from_prior(model, Vector::Zero(5));
    CHECK_THROWS_AS(path.annealed_logf(Vector::Zero(3), 1.5), ContractError);
    CHECK_THROWS_AS(path.annealed_logf(Vector::Zero(3), -0.1), ContractError);
    CHECK_THROWS_AS(AnnealingPath::from_prior(model, Vector::Zero(4)), ContractError);
  }

  TEST_CASE("path point re-targets without another network pass") {
    std::mt19937_64 rng(9);
    const auto model = small_model(rng, ObservationModel::gaussian(0.2));
    const Vector x = oracle::random_vector(5, rng);
    const auto path = AnnealingPath::from_prior(model, x);
    AnnealedTarget target(path, 0.2);
    const Vector z = oracle::random_vector(3, rng);
    PathPoint p = target.evaluate(z);
    p.set_beta(0.8);
    target.set_beta(0.8);
    const PathPoint fresh = target.evaluate(z);
    CHECK(p.log_density == fresh.log_density);
    CHECK(p.gradient == fresh.gradient);
  }

  TEST_CASE("simulate with tiny sigma reproduces the decoder") {
    std::mt19937_64 rng(10);
    const auto model = small_model(rng, ObservationModel::gaussian(1e-6));
    Rng r(11);
    for (int k = 0; k < 50; ++k) {
      const auto s = simulate(model, r);
      const Vector m = model.decoder().forward(s.z);
      CHECK((s.x - m).cwiseAbs().maxCoeff() <= 6e-6);
    }
  }

  TEST_CASE("simulated latents are standard normal") {
    std::mt19937_64 rng(12);
    const auto model = small_model(rng, ObservationModel::gaussian(0.1));
    Rng r(13);
    Vector sum = Vector::Zero(3);
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += simulate(model, r).z;
    CHECK((sum / n).cwiseAbs().maxCoeff() < 0.02);
  }

  TEST_CASE("bernoulli simulation at constant mean one half") {
    const GenerativeModel model(
        oracle::single_layer(Matrix::Zero(4, 2), Vector::Zero(4), Activation::sigmoid),
        ObservationModel::bernoulli());
    Rng r(14);
    Vector sum = Vector::Zero(4);
    const int n = 100000;
    bool binary = true;
    for (int k = 0; k < n; ++k) {
      const Vector x = simulate(model, r).x;
      binary = binary && ((x.array() == 0.0) || (x.array() == 1.0)).all();
      sum += x;
    }
    CHECK(binary);
    CHECK(((sum / n).array() - 0.5).abs().maxCoeff() < 0.01);
  }

  TEST_CASE("standard encoder matches the prior") {
    const EncoderProposal q(oracle::single_layer(Matrix::Zero(4, 3), Vector::Zero(4),
                                                 Activation::linear, NetRole::encoder));
    std::mt19937_64 rng(15);
    const Vector x = oracle::random_vector(3, rng);
    const Vector z = oracle::random_vector(2, rng);
    CHECK(q.log_q(x, z) == doctest::Approx(log_prior(z)).epsilon(1e-14));
    CHECK(q.distribution(x).kl_to_standard_normal() == 0.0);
  }

  TEST_CASE("encoder mode value and sample mean") {
    std::mt19937_64 rng(16);
    const auto net = oracle::random_net({4, 6}, {Activation::tanh}, rng, NetRole::encoder);
    const EncoderProposal q(net);
    const Vector x = oracle::random_vector(4, rng);
    const auto dist = q.distribution(x);
    CHECK(q.log_q(x, dist.mean) ==
          doctest::Approx(-dist.log_std.sum() - 1.5 * std::log(2.0 * kPi)).epsilon(1e-13));

    Rng r(17);
    const int n = 100000;
    Vector sum = Vector::Zero(3);
    for (int k = 0; k < n; ++k) sum += q.sample(x, r);
    const Vector mean = sum / n;
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(mean(i) - dist.mean(i)) <= 4.0 * std::exp(dist.log_std(i)) / std::sqrt(n));
    }
  }

  TEST_CASE("diagonal gaussian KL matches a Monte Carlo estimate") {
    DiagonalGaussian d{Vector::Constant(2, 0.5), Vector::Constant(2, -0.3)};
    Rng r(18);
    double acc = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const Vector z = d.sample(r);
      acc += d.log_density(z) - log_prior(z);
    }
    CHECK(acc / n == doctest::Approx(d.kl_to_standard_normal()).epsilon(0.02));
    const Vector z = Vector::Constant(2, 0.1);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return d.log_density(v); }, z);
    CHECK(oracle::rel_err(d.grad_log_density(z), fd) <= 1e-6);
  }

  TEST_CASE("encoder proposal contract") {
    std::mt19937_64 rng(19);
    CHECK_THROWS_AS(EncoderProposal(oracle::random_net({3, 4}, {Activation::linear}, rng)),
                    ContractError);
    CHECK_THROWS_AS(EncoderProposal(oracle::random_net({3, 5}, {Activation::linear}, rng,
                                                       NetRole::encoder)),
                    ContractError);
    const auto model = small_model(rng, ObservationModel::gaussian(0.1));
    const EncoderProposal wrong(
        oracle::random_net({4, 6}, {Activation::linear}, rng, NetRole::encoder));
    CHECK_THROWS_AS(AnnealingPath::from_encoder(model, wrong, Vector::Zero(5)), ContractError);
  }

  TEST_CASE("linear-gaussian joint integrates to the closed form") {
    // Importance sampling from the exact posterior has zero-variance weights.
    std::mt19937_64 rng(20);
    const auto lg = oracle::random_linear_gaussian(3, 8, 0.3, rng);
    const auto model = lg.model();
    const Vector x = lg.sample_x(rng);
    const Eigen::MatrixXd cov = lg.posterior_cov();
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd l = llt.matrixL();
    const Vector mu = lg.posterior_mean(x);
    for (int k = 0; k < 5; ++k) {
      const Vector e = oracle::random_vector(3, rng);
      const Vector z = mu + l * e;
      const double log_post = -1.5 * std::log(2.0 * kPi) -
                              l.diagonal().array().log().sum() - 0.5 * e.squaredNorm();
      CHECK(model.log_joint(x, z) - log_post ==
            doctest::Approx(lg.log_marginal(x)).epsilon(1e-10));
    }
  }
}
