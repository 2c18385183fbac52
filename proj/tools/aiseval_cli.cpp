// Command-line front end for the evaluation engine.
//
// Exit status: 0 on success, 1 when every example of a run failed, 2 on bad
// arguments, bad config or unreadable inputs.

#include "aiseval/harness.hpp"
#include "aiseval/logmath.hpp"
#include "aiseval/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace aiseval;

namespace {

// Every ExperimentConfig field as an optional flag. Flags given on the
// command line override the --config file, which overrides the defaults.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> decoder, encoder, obs, estimators, schedule;
  std::optional<double> sigma, step_size, target_accept, adapt_factor, step_jitter;
  std::optional<int> ais_steps, ais_chains, leapfrog, elbo_samples;
  std::optional<long long> kde_samples, iwae_samples;
  bool kde_share = false;
  std::optional<std::string> data, format, labels, latents, split, preprocess;
  std::optional<int> valid_start, n_examples, digit;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

void add_model_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment config");
  app->add_option("--decoder", o.decoder, "decoder model file");
  app->add_option("--obs", o.obs, "observation model: gaussian or bernoulli");
  app->add_option("--sigma", o.sigma, "Gaussian observation sigma");
  app->add_option("--ais-steps", o.ais_steps, "number of annealing distributions T");
  app->add_option("--ais-chains", o.ais_chains, "AIS chains per example");
  app->add_option("--schedule", o.schedule, "linear or sigmoid");
  app->add_option("--leapfrog", o.leapfrog, "leapfrog steps per HMC transition");
  app->add_option("--step-size", o.step_size, "initial HMC step size");
  app->add_option("--target-accept", o.target_accept, "HMC target acceptance rate");
  app->add_option("--adapt-factor", o.adapt_factor, "HMC step-size adaptation factor");
  app->add_option("--step-jitter", o.step_jitter, "relative HMC step-size jitter per transition");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--output-dir", o.output_dir, "directory for report files");
  app->add_option("--n-examples", o.n_examples, "examples to evaluate (0 = all)");
}

void add_data_options(CLI::App* app, Overrides& o) {
  app->add_option("--encoder", o.encoder, "encoder model file");
  app->add_option("--estimators", o.estimators,
                  "comma list of ais, ais_encoder, kde, elbo, iwae, bdmc");
  app->add_option("--kde-samples", o.kde_samples, "KDE prior samples");
  app->add_flag("--kde-share", o.kde_share, "reuse one KDE sample bank for all examples");
  app->add_option("--iwae-samples", o.iwae_samples, "IWAE importance samples");
  app->add_option("--elbo-samples", o.elbo_samples, "ELBO Monte Carlo samples");
  app->add_option("--data", o.data, "dataset file");
  app->add_option("--format", o.format, "idx, text or binarized-text");
  app->add_option("--labels", o.labels, "IDX label file");
  app->add_option("--latents", o.latents, "exact latents for simulated data");
  app->add_option("--split", o.split, "train, valid or test");
  app->add_option("--valid-start", o.valid_start, "first validation row of a training file");
  app->add_option("--digit", o.digit, "keep only this label");
  app->add_option("--preprocess", o.preprocess,
                  "none, dequantize, binarize-threshold or binarize-stochastic");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig cfg = o.config ? load_config_file(*o.config) : ExperimentConfig{};
  if (o.decoder) cfg.decoder = *o.decoder;
  if (o.encoder) cfg.encoder = *o.encoder;
  if (o.obs) {
    if (*o.obs == "bernoulli") {
      cfg.obs = ObservationModel::bernoulli();
    } else if (*o.obs == "gaussian") {
      cfg.obs = ObservationModel::gaussian(o.sigma.value_or(
          cfg.obs.kind == ObservationKind::gaussian ? cfg.obs.sigma : 0.02));
    } else {
      throw ParseError("unknown observation model '" + *o.obs + "'");
    }
  }
  if (o.sigma) {
    if (cfg.obs.kind != ObservationKind::gaussian) {
      throw ContractError("--sigma needs the gaussian observation model");
    }
    cfg.obs = ObservationModel::gaussian(*o.sigma);
  }
  if (o.estimators) {
    cfg.estimators.clear();
    for (const auto& name : split_commas(*o.estimators)) {
      cfg.estimators.push_back(parse_estimator(name));
    }
  }
  if (o.ais_steps) cfg.ais_steps = *o.ais_steps;
  if (o.ais_chains) cfg.ais_chains = *o.ais_chains;
  if (o.schedule) cfg.schedule = parse_schedule_kind(*o.schedule);
  if (o.leapfrog) cfg.hmc.n_leapfrog = *o.leapfrog;
  if (o.step_size) cfg.hmc.step_size = *o.step_size;
  if (o.step_jitter) cfg.hmc.step_jitter = *o.step_jitter;
  if (o.target_accept) cfg.hmc.target_accept = *o.target_accept;
  if (o.adapt_factor) cfg.hmc.adapt_factor = *o.adapt_factor;
  if (o.kde_samples) cfg.kde_samples = *o.kde_samples;
  if (o.kde_share) cfg.kde_share_samples = true;
  if (o.iwae_samples) cfg.iwae_samples = *o.iwae_samples;
  if (o.elbo_samples) cfg.elbo_samples = *o.elbo_samples;
  if (o.data) cfg.data.path = *o.data;
  if (o.format) cfg.data.format = parse_data_format(*o.format);
  if (o.labels) cfg.data.labels = *o.labels;
  if (o.latents) cfg.data.latents = *o.latents;
  if (o.split) cfg.data.split = parse_split(*o.split);
  if (o.valid_start) cfg.data.valid_start = *o.valid_start;
  if (o.n_examples) cfg.data.n_examples = *o.n_examples;
  if (o.digit) cfg.data.digit = *o.digit;
  if (o.preprocess) cfg.data.preprocess = parse_preprocess(*o.preprocess);
  if (o.seed) cfg.seed = *o.seed;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  cfg.workers = default_workers();
  return cfg;
}

AisConfig ais_config(const ExperimentConfig& cfg) {
  AisConfig a;
  a.n_chains = cfg.ais_chains;
  a.schedule = make_schedule(cfg.ais_steps, cfg.schedule);
  a.hmc = cfg.hmc;
  a.seed = cfg.seed.value_or(0);
  a.workers = cfg.workers;
  a.validate();
  return a;
}

fs::path output_dir(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output_dir.empty() ? fs::path(".") : fs::path(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Vector> rows_of(const Dataset& ds) {
  std::vector<Vector> out;
  for (int i = 0; i < ds.size(); ++i) out.push_back(ds.row(i));
  return out;
}

int cmd_eval(const Overrides& o) {
  const ExperimentConfig cfg = build_config(o);
  const auto report = run_experiment(cfg);
  const fs::path dir = output_dir(cfg);
  write_report(report, cfg.estimators, dir);
  for (const auto& s : report.summaries) {
    std::printf("%-12s %12.4f +- %.4f  (n=%d, %.1fs)\n", std::string(to_string(s.estimator)).c_str(),
                s.mean, s.std_error, s.n, s.runtime_seconds);
  }
  if (cfg.wants(Estimator::bdmc)) std::printf("mean BDMC gap %.4f\n", report.mean_bdmc_gap);
  for (const auto& r : report.rows) {
    if (!r.error.empty()) std::fprintf(stderr, "example %llu failed: %s\n",
                                       static_cast<unsigned long long>(r.id), r.error.c_str());
  }
  std::printf("wrote %s\n", (dir / "report.csv").string().c_str());
  return report.all_failed() ? 1 : 0;
}

int cmd_bdmc(const Overrides& o) {
  ExperimentConfig cfg = build_config(o);
  if (!cfg.seed) throw ContractError("--seed is required");
  const int n = o.n_examples.value_or(20);
  const GenerativeModel model(load_model_file(cfg.decoder), cfg.obs);
  const auto report = bdmc(model, ais_config(cfg), n);

  std::ostringstream csv;
  csv << "# seed=" << *cfg.seed << " steps=" << cfg.ais_steps << " chains=" << cfg.ais_chains
      << '\n';
  csv << "example,forward_lower,reverse_upper,gap\n";
  std::vector<double> gaps;
  for (const auto& e : report.examples) {
    csv << e.example << ',' << num(e.forward_lower) << ',' << num(e.reverse_upper) << ','
        << num(e.gap) << '\n';
    gaps.push_back(e.gap);
  }
  const auto gap = mean_and_stderr(gaps);
  const nlohmann::json summary = {{"seed", *cfg.seed},
                                  {"n_examples", n},
                                  {"mean_lower", report.mean_lower},
                                  {"mean_upper", report.mean_upper},
                                  {"mean_gap", gap.mean},
                                  {"gap_stderr", gap.std_error},
                                  {"config", to_json(cfg)}};
  const fs::path dir = output_dir(cfg);
  write_file(dir / "bdmc.csv", csv.str());
  write_file(dir / "bdmc_summary.json", summary.dump(2) + "\n");
  std::printf("lower %.4f  upper %.4f  gap %.4f +- %.4f\n", report.mean_lower, report.mean_upper,
              gap.mean, gap.std_error);
  return 0;
}

struct SigmaOptions {
  std::optional<std::string> grid;
  std::string preset = "large";
  double fixed_sigma = 0.02;
  std::string estimator = "ais";
};

SigmaGrid pick_grid(const SigmaOptions& s) {
  if (s.grid) {
    SigmaGrid g;
    for (const auto& v : split_commas(*s.grid)) g.values.push_back(std::stod(v));
    g.validate();
    return g;
  }
  if (s.preset == "large") return large_model_sigma_grid();
  if (s.preset == "small") return small_model_sigma_grid();
  throw ContractError("unknown grid preset '" + s.preset + "' (expected large or small)");
}

SigmaEvalConfig sigma_config(const ExperimentConfig& cfg, double fixed_sigma) {
  SigmaEvalConfig s;
  s.ais = ais_config(cfg);
  s.ais.workers = 1;
  s.kde.n_samples = cfg.kde_samples;
  s.kde.share_samples = cfg.kde_share_samples;
  s.fixed_sigma = fixed_sigma;
  s.workers = cfg.workers;
  return s;
}

int cmd_sweep(const Overrides& o, const SigmaOptions& so) {
  const ExperimentConfig cfg = build_config(o);
  if (!cfg.seed) throw ContractError("--seed is required");
  const GenerativeModel model(load_model_file(cfg.decoder), cfg.obs);
  const Dataset ds = prepare_dataset(cfg);
  const auto xs = rows_of(ds);
  const auto points = sigma_sweep(xs, model, pick_grid(so), sigma_config(cfg, so.fixed_sigma),
                                  ds.ids);
  std::ostringstream csv;
  csv << "# config_hash=" << config_hash(cfg) << " seed=" << *cfg.seed << '\n';
  csv << "sigma,mean_ais,stderr_ais,mean_kde,stderr_kde\n";
  for (const auto& p : points) {
    csv << num(p.sigma) << ',' << num(p.mean_ais) << ',' << num(p.stderr_ais) << ','
        << num(p.mean_kde) << ',' << num(p.stderr_kde) << '\n';
    std::printf("sigma %.4f  ais %.3f +- %.3f  kde %.3f +- %.3f\n", p.sigma, p.mean_ais,
                p.stderr_ais, p.mean_kde, p.stderr_kde);
  }
  write_file(output_dir(cfg) / "sigma_sweep.csv", csv.str());
  return 0;
}

int cmd_optimal(const Overrides& o, const SigmaOptions& so) {
  const ExperimentConfig cfg = build_config(o);
  if (!cfg.seed) throw ContractError("--seed is required");
  const GenerativeModel model(load_model_file(cfg.decoder), cfg.obs);
  const Dataset ds = prepare_dataset(cfg);
  const auto xs = rows_of(ds);
  const SigmaGrid grid = pick_grid(so);
  const auto result =
      optimal_sigma_eval(xs, model, grid, parse_sigma_estimator(so.estimator),
                         sigma_config(cfg, so.fixed_sigma), ds.ids);
  std::ostringstream csv;
  csv << "# config_hash=" << config_hash(cfg) << " seed=" << *cfg.seed
      << " estimator=" << so.estimator << '\n';
  csv << "example";
  for (double s : grid.values) csv << ",sigma_" << num(s);
  csv << ",best_sigma,best_nats,fixed_nats,improvement\n";
  for (const auto& r : result.rows) {
    csv << r.example;
    for (double v : r.nats_per_sigma) csv << ',' << num(v);
    csv << ',' << num(r.best_sigma) << ',' << num(r.best_nats) << ',' << num(r.fixed_nats) << ','
        << num(r.improvement) << '\n';
  }
  const nlohmann::json summary = {{"mean_best", result.mean_best},
                                  {"mean_fixed", result.mean_fixed},
                                  {"mean_improvement", result.mean_improvement},
                                  {"fixed_sigma", so.fixed_sigma},
                                  {"grid", grid.values},
                                  {"config", to_json(cfg)}};
  const fs::path dir = output_dir(cfg);
  write_file(dir / "optimal_sigma.csv", csv.str());
  write_file(dir / "optimal_sigma.json", summary.dump(2) + "\n");
  std::printf("best %.4f  fixed %.4f  improvement %.4f\n", result.mean_best, result.mean_fixed,
              result.mean_improvement);
  return 0;
}

int cmd_curve(const Overrides& o, const std::string& checkpoints) {
  const ExperimentConfig cfg = build_config(o);
  if (!cfg.seed) throw ContractError("--seed is required");
  const auto curve = checkpoint_curve(cfg, checkpoints);
  for (const auto& w : curve.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_file(output_dir(cfg) / "curve.csv", curve_csv(curve, cfg.estimators));
  std::printf("%zu checkpoints evaluated\n", curve.entries.size());
  return curve.entries.empty() ? 1 : 0;
}

int cmd_posterior(const Overrides& o, int height, int width) {
  ExperimentConfig cfg = build_config(o);
  if (!cfg.seed) throw ContractError("--seed is required");
  const GenerativeModel model(load_model_file(cfg.decoder), cfg.obs);
  const Dataset ds = prepare_dataset(cfg);
  if (height == 0 && width == 0) {
    height = ds.height;
    width = ds.width;
  }
  if (height * width != model.data_dim()) {
    throw ContractError("--height x --width must equal the data dimension " +
                        std::to_string(model.data_dim()));
  }
  AisConfig ais = ais_config(cfg);
  ais.workers = 1;

  struct Result {
    PosteriorDraw draw;
    double lower = 0.0;
    std::optional<double> upper;
  };
  const auto results = parallel_map<Result>(
      static_cast<std::size_t>(ds.size()),
      [&](std::size_t i) {
        const std::uint64_t id = ds.ids[i];
        const auto path = AnnealingPath::from_prior(model, ds.row(static_cast<int>(i)));
        const auto chains = forward_ais(path, ais, id);
        Rng rng = make_stream(*cfg.seed, id, 0, StreamKind::resample);
        Result r;
        r.draw = posterior_decode(model, chains, rng);
        r.lower = combine_chains(log_weights(chains), BoundDirection::lower).estimate;
        if (ds.has_latents()) {
          const Vector z = ds.latents.row(static_cast<Eigen::Index>(i)).transpose();
          const auto rev = reverse_ais(path, z, ais, id);
          r.upper = combine_chains(log_weights(rev), BoundDirection::upper).estimate;
        }
        return r;
      },
      cfg.workers);

  // One grid row per example: the data, the resampled posterior decode, then
  // every chain's decode.
  const int cols = 2 + cfg.ais_chains;
  std::vector<Vector> images;
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> gaps;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    images.push_back(ds.row(static_cast<int>(i)));
    images.push_back(r.draw.decoded);
    for (const auto& d : r.draw.chain_decoded) images.push_back(d);
    nlohmann::json row = {{"example", ds.ids[i]},
                          {"chosen_chain", r.draw.chosen_chain},
                          {"ais_lower", r.lower}};
    if (r.upper) {
      row["bdmc_upper"] = *r.upper;
      row["bdmc_gap"] = *r.upper - r.lower;
      gaps.push_back(*r.upper - r.lower);
    }
    rows.push_back(row);
  }
  const fs::path dir = output_dir(cfg);
  export_image_grid(images, static_cast<int>(results.size()), cols, height, width,
                    dir / "posterior.pgm");
  nlohmann::json summary = {{"examples", rows}, {"config", to_json(cfg)}};
  if (!gaps.empty()) summary["mean_bdmc_gap"] = mean_and_stderr(gaps).mean;
  write_file(dir / "posterior.json", summary.dump(2) + "\n");
  std::printf("wrote %s\n", (dir / "posterior.pgm").string().c_str());
  return 0;
}

int cmd_simulate(const Overrides& o, const std::string& prefix) {
  const ExperimentConfig cfg = build_config(o);
  if (!cfg.seed) throw ContractError("--seed is required");
  const GenerativeModel model(load_model_file(cfg.decoder), cfg.obs);
  const int n = o.n_examples.value_or(100);
  if (n < 1) throw ContractError("--n-examples must be positive");
  Matrix xs(n, model.data_dim());
  Matrix zs(n, model.latent_dim());
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(*cfg.seed, static_cast<std::uint64_t>(i), 0, StreamKind::simulate);
    const auto s = simulate(model, rng);
    xs.row(i) = s.x.transpose();
    zs.row(i) = s.z.transpose();
  }
  save_text_matrix(xs, prefix + ".x.txt");
  save_text_matrix(zs, prefix + ".z.txt");
  std::printf("wrote %s.x.txt and %s.z.txt\n", prefix.c_str(), prefix.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-likelihood evaluation for decoder-based generative models"};
  app.require_subcommand(1);

  Overrides eval_o, bdmc_o, sweep_o, opt_o, curve_o, post_o, sim_o;
  SigmaOptions sweep_s, opt_s;
  std::string checkpoints, prefix = "simulated";
  int height = 0, width = 0;

  auto* eval = app.add_subcommand("eval", "run the configured estimators over a dataset");
  add_model_options(eval, eval_o);
  add_data_options(eval, eval_o);

  auto* bdmc_cmd = app.add_subcommand("bdmc", "BDMC bounds on data simulated from the model");
  add_model_options(bdmc_cmd, bdmc_o);

  auto add_sigma = [](CLI::App* sub, SigmaOptions& s) {
    sub->add_option("--grid", s.grid, "comma list of sigmas");
    sub->add_option("--grid-preset", s.preset, "large or small")->capture_default_str();
    sub->add_option("--fixed-sigma", s.fixed_sigma, "shared sigma to compare against")
        ->capture_default_str();
  };
  auto* sweep = app.add_subcommand("sweep-sigma", "AIS and KDE estimates across sigma");
  add_model_options(sweep, sweep_o);
  add_data_options(sweep, sweep_o);
  add_sigma(sweep, sweep_s);

  auto* opt = app.add_subcommand("optimal-sigma", "per-example best sigma over a grid");
  add_model_options(opt, opt_o);
  add_data_options(opt, opt_o);
  add_sigma(opt, opt_s);
  opt->add_option("--sigma-estimator", opt_s.estimator, "ais or kde")->capture_default_str();

  auto* curve = app.add_subcommand("curve", "evaluate every checkpoint in a directory");
  add_model_options(curve, curve_o);
  add_data_options(curve, curve_o);
  curve->add_option("--checkpoints", checkpoints, "checkpoint directory")->required();

  auto* post = app.add_subcommand("posterior", "decode AIS posterior samples into a PGM grid");
  add_model_options(post, post_o);
  add_data_options(post, post_o);
  post->add_option("--height", height, "image height");
  post->add_option("--width", width, "image width");

  auto* sim = app.add_subcommand("simulate", "write (x, z) pairs drawn from the model");
  add_model_options(sim, sim_o);
  sim->add_option("--out", prefix, "output prefix")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) {
      if (!eval_o.seed && !eval_o.config) throw ContractError("--seed is required");
      return cmd_eval(eval_o);
    }
    if (*bdmc_cmd) return cmd_bdmc(bdmc_o);
    if (*sweep) return cmd_sweep(sweep_o, sweep_s);
    if (*opt) return cmd_optimal(opt_o, opt_s);
    if (*curve) return cmd_curve(curve_o, checkpoints);
    if (*post) return cmd_posterior(post_o, height, width);
    if (*sim) return cmd_simulate(sim_o, prefix);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
