#pragma once

// On-disk experiment fixtures: a linear-Gaussian decoder/encoder pair plus
// simulated data with exact latents.

#include "aiseval/harness.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <string>

namespace fixture {

struct ExperimentFiles {
  std::filesystem::path dir;
  std::filesystem::path decoder;
  std::filesystem::path encoder;
  std::filesystem::path data;
  std::filesystem::path latents;
  oracle::LinearGaussian lg;
};

inline ExperimentFiles linear_gaussian_experiment(const std::string& name, int n_rows = 12,
                                                  int latent = 2, int data = 6,
                                                  double sigma = 0.3) {
  ExperimentFiles f;
  f.dir = oracle::scratch_dir(name);
  std::mt19937_64 g(101);
  f.lg = oracle::orthogonal_linear_gaussian(latent, data, sigma, g);
  f.decoder = f.dir / "decoder.json";
  f.encoder = f.dir / "encoder.json";
  f.data = f.dir / "x.txt";
  f.latents = f.dir / "z.txt";
  aiseval::save_model_file(f.lg.model().decoder(), f.decoder);
  aiseval::save_model_file(oracle::perturbed_encoder(f.lg, 0.2, 0.2), f.encoder);
  aiseval::Matrix x(n_rows, data), z(n_rows, latent);
  for (int i = 0; i < n_rows; ++i) {
    const aiseval::Vector zi = oracle::random_vector(latent, g);
    z.row(i) = zi.transpose();
    x.row(i) = (f.lg.w * zi + f.lg.b + oracle::random_vector(data, g, sigma)).transpose();
  }
  aiseval::save_text_matrix(x, f.data);
  aiseval::save_text_matrix(z, f.latents);
  return f;
}

/// Small-budget config over the fixture files.
inline aiseval::ExperimentConfig small_config(const ExperimentFiles& f) {
  aiseval::ExperimentConfig cfg;
  cfg.decoder = f.decoder.string();
  cfg.encoder = f.encoder.string();
  cfg.obs = aiseval::ObservationModel::gaussian(f.lg.sigma);
  cfg.estimators = {aiseval::Estimator::ais, aiseval::Estimator::kde};
  cfg.ais_steps = 50;
  cfg.ais_chains = 4;
  cfg.kde_samples = 200;
  cfg.iwae_samples = 100;
  cfg.elbo_samples = 20;
  cfg.data.path = f.data.string();
  cfg.data.format = aiseval::DataFormat::text;
  cfg.data.n_examples = 0;
  cfg.seed = 7;
  cfg.output_dir = (f.dir / "out").string();
  return cfg;
}

}  // namespace fixture
