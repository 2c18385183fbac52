#include "aiseval/harness.hpp"

#include "aiseval/logmath.hpp"
#include "aiseval/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace aiseval {

using nlohmann::json;

namespace {

constexpr std::array kAllEstimators = {Estimator::ais,  Estimator::ais_encoder, Estimator::kde,
                                       Estimator::elbo, Estimator::iwae,        Estimator::bdmc};

std::size_t slot(Estimator e) { return static_cast<std::size_t>(e); }

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV fields never contain quotes or separators this way.
std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::ais: return "ais";
    case Estimator::ais_encoder: return "ais_encoder";
    case Estimator::kde: return "kde";
    case Estimator::elbo: return "elbo";
    case Estimator::iwae: return "iwae";
    case Estimator::bdmc: return "bdmc";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  for (Estimator e : kAllEstimators) {
    if (to_string(e) == name) return e;
  }
  throw ParseError("unknown estimator '" + std::string(name) +
                   "' (expected ais, ais_encoder, kde, elbo, iwae or bdmc)");
}

std::string_view to_string(Preprocess p) {
  switch (p) {
    case Preprocess::none: return "none";
    case Preprocess::dequantize: return "dequantize";
    case Preprocess::binarize_threshold: return "binarize-threshold";
    case Preprocess::binarize_stochastic: return "binarize-stochastic";
  }
  return "?";
}

Preprocess parse_preprocess(std::string_view name) {
  for (Preprocess p : {Preprocess::none, Preprocess::dequantize, Preprocess::binarize_threshold,
                       Preprocess::binarize_stochastic}) {
    if (to_string(p) == name) return p;
  }
  throw ParseError("unknown preprocess '" + std::string(name) + "'");
}

std::string_view to_string(DataFormat f) {
  switch (f) {
    case DataFormat::idx: return "idx";
    case DataFormat::text: return "text";
    case DataFormat::binarized_text: return "binarized-text";
  }
  return "?";
}

DataFormat parse_data_format(std::string_view name) {
  for (DataFormat f : {DataFormat::idx, DataFormat::text, DataFormat::binarized_text}) {
    if (to_string(f) == name) return f;
  }
  throw ParseError("unknown data format '" + std::string(name) + "'");
}

bool ExperimentConfig::wants(Estimator e) const {
  return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
}

void ExperimentConfig::validate() const {
  if (decoder.empty()) throw ContractError("config: decoder path is required");
  if (!std::filesystem::exists(decoder)) {
    throw ContractError("config: decoder file not found: " + decoder);
  }
  if (encoder && !std::filesystem::exists(*encoder)) {
    throw ContractError("config: encoder file not found: " + *encoder);
  }
  if (estimators.empty()) throw ContractError("config: no estimators selected");
  const bool needs_encoder =
      wants(Estimator::ais_encoder) || wants(Estimator::elbo) || wants(Estimator::iwae);
  if (needs_encoder && !encoder) {
    throw ContractError("config: ais_encoder, elbo and iwae need an encoder file");
  }
  if (wants(Estimator::bdmc) && !data.latents) {
    throw ContractError("config: bdmc needs simulated data with a latents file");
  }
  if (ais_steps < 2 || ais_chains < 1 || kde_samples < 1 || iwae_samples < 1 ||
      elbo_samples < 1) {
    throw ContractError("config: budgets must be positive (ais steps >= 2)");
  }
  if (data.path.empty()) throw ContractError("config: data path is required");
  if (!std::filesystem::exists(data.path)) {
    throw ContractError("config: data file not found: " + data.path);
  }
  if (!seed) throw ContractError("config: a seed is required");
  hmc.validate();
}

json to_json(const ExperimentConfig& cfg) {
  json estimators = json::array();
  for (Estimator e : cfg.estimators) estimators.push_back(std::string(to_string(e)));
  json obs = {{"kind", cfg.obs.kind == ObservationKind::gaussian ? "gaussian" : "bernoulli"}};
  if (cfg.obs.kind == ObservationKind::gaussian) obs["sigma"] = cfg.obs.sigma;
  json data = {{"path", cfg.data.path},
               {"format", std::string(to_string(cfg.data.format))},
               {"labels", cfg.data.labels ? json(*cfg.data.labels) : json(nullptr)},
               {"latents", cfg.data.latents ? json(*cfg.data.latents) : json(nullptr)},
               {"split", std::string(to_string(cfg.data.split))},
               {"valid_start", cfg.data.valid_start},
               {"n_examples", cfg.data.n_examples},
               {"digit", cfg.data.digit ? json(*cfg.data.digit) : json(nullptr)},
               {"preprocess", std::string(to_string(cfg.data.preprocess))}};
  return {{"decoder", cfg.decoder},
          {"encoder", cfg.encoder ? json(*cfg.encoder) : json(nullptr)},
          {"observation", obs},
          {"estimators", estimators},
          {"ais",
           {{"steps", cfg.ais_steps},
            {"chains", cfg.ais_chains},
            {"schedule", std::string(to_string(cfg.schedule))},
            {"leapfrog", cfg.hmc.n_leapfrog},
            {"step_size", cfg.hmc.step_size},
            {"target_accept", cfg.hmc.target_accept},
            {"adapt_factor", cfg.hmc.adapt_factor},
            {"step_jitter", cfg.hmc.step_jitter}}},
          {"kde", {{"samples", cfg.kde_samples}, {"share_samples", cfg.kde_share_samples}}},
          {"iwae", {{"samples", cfg.iwae_samples}}},
          {"elbo", {{"samples", cfg.elbo_samples}}},
          {"data", data},
          {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
          {"output_dir", cfg.output_dir}};
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  try {
    if (!doc.is_object()) throw ParseError("config must be a JSON object");
    auto opt_string = [](const json& j, const char* key) -> std::optional<std::string> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].get<std::string>();
    };
    cfg.decoder = doc.value("decoder", cfg.decoder);
    cfg.encoder = opt_string(doc, "encoder");
    if (doc.contains("observation")) {
      const json& o = doc["observation"];
      const std::string kind = o.value("kind", "gaussian");
      if (kind == "gaussian") {
        cfg.obs = ObservationModel::gaussian(o.value("sigma", cfg.obs.sigma));
      } else if (kind == "bernoulli") {
        cfg.obs = ObservationModel::bernoulli();
      } else {
        throw ParseError("config: unknown observation kind '" + kind + "'");
      }
    }
    if (doc.contains("estimators")) {
      cfg.estimators.clear();
      for (const json& e : doc["estimators"]) {
        cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
      }
    }
    if (doc.contains("ais")) {
      const json& a = doc["ais"];
      cfg.ais_steps = a.value("steps", cfg.ais_steps);
      cfg.ais_chains = a.value("chains", cfg.ais_chains);
      cfg.schedule = parse_schedule_kind(a.value("schedule", std::string("linear")));
      cfg.hmc.n_leapfrog = a.value("leapfrog", cfg.hmc.n_leapfrog);
      cfg.hmc.step_size = a.value("step_size", cfg.hmc.step_size);
      cfg.hmc.target_accept = a.value("target_accept", cfg.hmc.target_accept);
      cfg.hmc.adapt_factor = a.value("adapt_factor", cfg.hmc.adapt_factor);
      cfg.hmc.step_jitter = a.value("step_jitter", cfg.hmc.step_jitter);
    }
    if (doc.contains("kde")) {
      cfg.kde_samples = doc["kde"].value("samples", cfg.kde_samples);
      cfg.kde_share_samples = doc["kde"].value("share_samples", cfg.kde_share_samples);
    }
    if (doc.contains("iwae")) cfg.iwae_samples = doc["iwae"].value("samples", cfg.iwae_samples);
    if (doc.contains("elbo")) cfg.elbo_samples = doc["elbo"].value("samples", cfg.elbo_samples);
    if (doc.contains("data")) {
      const json& d = doc["data"];
      cfg.data.path = d.value("path", cfg.data.path);
      cfg.data.format = parse_data_format(d.value("format", std::string("idx")));
      cfg.data.labels = opt_string(d, "labels");
      cfg.data.latents = opt_string(d, "latents");
      cfg.data.split = parse_split(d.value("split", std::string("test")));
      cfg.data.valid_start = d.value("valid_start", cfg.data.valid_start);
      cfg.data.n_examples = d.value("n_examples", cfg.data.n_examples);
      if (d.contains("digit") && !d["digit"].is_null()) cfg.data.digit = d["digit"].get<int>();
      cfg.data.preprocess = parse_preprocess(d.value("preprocess", std::string("none")));
    }
    if (doc.contains("seed") && !doc["seed"].is_null()) {
      cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    cfg.output_dir = doc.value("output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const ContractError& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("output_dir");
  const std::string canonical = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.seed.value_or(0);
  Dataset ds;
  switch (cfg.data.format) {
    case DataFormat::idx:
      ds = load_mnist_idx(cfg.data.path, cfg.data.labels
                                             ? std::optional<std::filesystem::path>(*cfg.data.labels)
                                             : std::nullopt);
      break;
    case DataFormat::text:
      ds = load_text_matrix(cfg.data.path);
      break;
    case DataFormat::binarized_text:
      ds = load_binarized_text(cfg.data.path);
      break;
  }
  if (cfg.data.latents) {
    const Dataset z = load_text_matrix(*cfg.data.latents);
    if (z.size() != ds.size()) {
      throw ParseError("latents file has " + std::to_string(z.size()) + " rows, data has " +
                       std::to_string(ds.size()));
    }
    ds.latents = z.values;
  }

  Rng rng = make_stream(seed, 1, 0, StreamKind::data);
  switch (cfg.data.preprocess) {
    case Preprocess::none:
      break;
    case Preprocess::dequantize:
      ds = dequantize(ds, rng);
      break;
    case Preprocess::binarize_threshold:
      ds = binarize(ds, BinarizeMode::threshold);
      break;
    case Preprocess::binarize_stochastic:
      ds = binarize(ds, BinarizeMode::stochastic, &rng);
      break;
  }

  ds = select_split(ds, cfg.data.split, cfg.data.valid_start);
  if (cfg.data.digit) ds = filter_label(ds, *cfg.data.digit);
  return take_shuffled(ds, cfg.data.n_examples, seed);
}

namespace {

AisConfig make_ais_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  AisConfig a;
  a.n_chains = cfg.ais_chains;
  a.schedule = make_schedule(cfg.ais_steps, cfg.schedule);
  a.hmc = cfg.hmc;
  a.seed = seed;
  a.workers = 1;
  return a;
}

struct Models {
  GenerativeModel model;
  std::optional<EncoderProposal> encoder;
};

Models load_models(const ExperimentConfig& cfg) {
  Models m{GenerativeModel(load_model_file(cfg.decoder), cfg.obs), std::nullopt};
  if (cfg.encoder) m.encoder.emplace(load_model_file(*cfg.encoder));
  return m;
}

ExampleRow evaluate_example(const ExperimentConfig& cfg, const Models& models,
                            const Dataset& data, int i) {
  const std::uint64_t seed = *cfg.seed;
  ExampleRow row;
  row.id = data.ids.empty() ? static_cast<std::uint64_t>(i) : data.ids[i];
  row.split = data.split;
  row.nats.fill(std::numeric_limits<double>::quiet_NaN());
  row.bdmc_upper = row.bdmc_gap = row.ais_stderr = std::numeric_limits<double>::quiet_NaN();

  try {
    const Vector x = data.row(i);
    const GenerativeModel& model = models.model;
    const auto prior_path = AnnealingPath::from_prior(model, x);
    const AisConfig ais = make_ais_config(cfg, seed);

    if (cfg.wants(Estimator::ais) || cfg.wants(Estimator::bdmc)) {
      const auto start = std::chrono::steady_clock::now();
      const auto chains = forward_ais(prior_path, ais, row.id);
      const auto est = combine_chains(log_weights(chains), BoundDirection::lower);
      row.nats[slot(Estimator::ais)] = est.estimate;
      row.ais_stderr = est.std_error;
      row.seconds[slot(Estimator::ais)] = seconds_since(start);
    }
    if (cfg.wants(Estimator::bdmc)) {
      const auto start = std::chrono::steady_clock::now();
      const Vector z_exact = data.latents.row(i).transpose();
      const auto chains = reverse_ais(prior_path, z_exact, ais, row.id);
      row.bdmc_upper = combine_chains(log_weights(chains), BoundDirection::upper).estimate;
      row.bdmc_gap = row.bdmc_upper - row.nats[slot(Estimator::ais)];
      row.nats[slot(Estimator::bdmc)] = row.bdmc_upper;
      row.seconds[slot(Estimator::bdmc)] = seconds_since(start);
    }
    if (cfg.wants(Estimator::ais_encoder)) {
      const auto start = std::chrono::steady_clock::now();
      const auto path = AnnealingPath::from_encoder(model, *models.encoder, x);
      const AisConfig enc_ais =
          make_ais_config(cfg, derive_seed(seed, 0, 1, StreamKind::encoder));
      const auto chains = forward_ais(path, enc_ais, row.id);
      row.nats[slot(Estimator::ais_encoder)] =
          combine_chains(log_weights(chains), BoundDirection::lower).estimate;
      row.seconds[slot(Estimator::ais_encoder)] = seconds_since(start);
    }
    if (cfg.wants(Estimator::kde)) {
      const auto start = std::chrono::steady_clock::now();
      KdeConfig kde;
      kde.n_samples = cfg.kde_samples;
      kde.share_samples = cfg.kde_share_samples;
      row.nats[slot(Estimator::kde)] = kde_estimate(x, model, kde, seed, row.id);
      row.seconds[slot(Estimator::kde)] = seconds_since(start);
    }
    if (cfg.wants(Estimator::elbo)) {
      const auto start = std::chrono::steady_clock::now();
      Rng rng = make_stream(seed, row.id, 0, StreamKind::encoder);
      row.nats[slot(Estimator::elbo)] = elbo(x, model, *models.encoder, cfg.elbo_samples, rng);
      row.seconds[slot(Estimator::elbo)] = seconds_since(start);
    }
    if (cfg.wants(Estimator::iwae)) {
      const auto start = std::chrono::steady_clock::now();
      Rng rng = make_stream(seed, row.id, 1, StreamKind::encoder);
      row.nats[slot(Estimator::iwae)] =
          iwae_bound(x, model, *models.encoder, cfg.iwae_samples, rng);
      row.seconds[slot(Estimator::iwae)] = seconds_since(start);
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

}  // namespace

std::vector<EstimatorSummary> summarize(const std::vector<ExampleRow>& rows,
                                        const std::vector<Estimator>& estimators) {
  std::vector<EstimatorSummary> out;
  for (Estimator e : estimators) {
    std::vector<double> vals;
    EstimatorSummary s;
    s.estimator = e;
    for (const auto& r : rows) {
      if (!r.error.empty()) continue;
      vals.push_back(r.get(e));
      s.runtime_seconds += r.seconds[slot(e)];
    }
    const auto ms = mean_and_stderr(vals);
    s.mean = ms.mean;
    s.std_error = ms.std_error;
    s.n = static_cast<int>(vals.size());
    out.push_back(s);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, prepare_dataset(cfg));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  if (!cfg.seed) throw ContractError("a seed is required");
  if (cfg.wants(Estimator::bdmc) && !data.has_latents()) {
    throw ContractError("bdmc needs a dataset with exact latents");
  }
  const Models models = load_models(cfg);
  if (data.dim() != models.model.data_dim()) {
    throw ContractError("dataset has dimension " + std::to_string(data.dim()) +
                        " but the decoder emits " + std::to_string(models.model.data_dim()));
  }

  ExperimentReport report;
  report.config_hash = config_hash(cfg);
  report.seed = *cfg.seed;
  report.split = data.split;
  report.config = to_json(cfg);
  report.rows = parallel_map<ExampleRow>(
      static_cast<std::size_t>(data.size()),
      [&](std::size_t i) { return evaluate_example(cfg, models, data, static_cast<int>(i)); },
      cfg.workers);

  std::vector<double> gaps;
  for (const auto& r : report.rows) {
    if (!r.error.empty()) {
      ++report.n_failed;
    } else if (cfg.wants(Estimator::bdmc)) {
      gaps.push_back(r.bdmc_gap);
    }
  }
  report.mean_bdmc_gap = mean_and_stderr(gaps).mean;
  report.summaries = summarize(report.rows, cfg.estimators);
  return report;
}

std::string report_csv(const ExperimentReport& report, const std::vector<Estimator>& estimators) {
  auto has = [&](Estimator e) {
    return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
  };
  std::ostringstream out;
  out << "# config_hash=" << report.config_hash << " seed=" << report.seed << '\n';
  out << "example,split";
  for (Estimator e : kAllEstimators) {
    if (e == Estimator::bdmc || !has(e)) continue;
    out << ',' << to_string(e);
    if (e == Estimator::ais) out << ",ais_stderr";
  }
  if (has(Estimator::bdmc)) out << ",bdmc_lower,bdmc_upper,bdmc_gap";
  out << ",error\n";

  for (const auto& r : report.rows) {
    out << r.id << ',' << to_string(r.split);
    for (Estimator e : kAllEstimators) {
      if (e == Estimator::bdmc || !has(e)) continue;
      out << ',' << fmt_double(r.get(e));
      if (e == Estimator::ais) out << ',' << fmt_double(r.ais_stderr);
    }
    if (has(Estimator::bdmc)) {
      out << ',' << fmt_double(r.get(Estimator::ais)) << ',' << fmt_double(r.bdmc_upper) << ','
          << fmt_double(r.bdmc_gap);
    }
    out << ',' << sanitize(r.error) << '\n';
  }
  return out.str();
}

json report_json(const ExperimentReport& report) {
  json est = json::object();
  for (const auto& s : report.summaries) {
    est[std::string(to_string(s.estimator))] = {{"mean", s.mean},
                                                {"stderr", s.std_error},
                                                {"n", s.n},
                                                {"runtime_seconds", s.runtime_seconds}};
  }
  json doc = {{"config_hash", report.config_hash},
              {"seed", report.seed},
              {"split", std::string(to_string(report.split))},
              {"n_examples", report.rows.size()},
              {"n_failed", report.n_failed},
              {"estimators", est},
              {"config", report.config}};
  if (report.config.contains("estimators")) {
    for (const auto& e : report.config["estimators"]) {
      if (e == "bdmc") doc["mean_bdmc_gap"] = report.mean_bdmc_gap;
    }
  }
  return doc;
}

void write_report(const ExperimentReport& report, const std::vector<Estimator>& estimators,
                  const std::filesystem::path& dir, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  write_text(dir / (prefix + "report.csv"), report_csv(report, estimators));
  write_text(dir / (prefix + "summary.json"), report_json(report).dump(2) + "\n");
}

std::optional<int> checkpoint_epoch(const std::filesystem::path& file) {
  const std::string stem = file.stem().string();
  auto end = stem.find_last_of("0123456789");
  if (end == std::string::npos) return std::nullopt;
  auto begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  return std::stoi(stem.substr(begin, end - begin + 1));
}

CheckpointCurve checkpoint_curve(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ContractError("checkpoint directory not found: " + dir.string());
  }
  struct Candidate {
    int epoch;
    std::filesystem::path path;
  };
  std::vector<Candidate> found;
  CheckpointCurve curve;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() != ".json" || p.filename().string().rfind("decoder", 0) != 0) continue;
    const auto epoch = checkpoint_epoch(p);
    if (!epoch) {
      curve.warnings.push_back("skipping " + p.filename().string() + ": no epoch tag");
      continue;
    }
    found.push_back({*epoch, p});
  }
  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    return a.epoch != b.epoch ? a.epoch < b.epoch : a.path.filename() < b.path.filename();
  });

  ExperimentConfig base = cfg;
  base.decoder = found.empty() ? cfg.decoder : found.front().path.string();
  ExperimentConfig train_cfg = base;
  train_cfg.data.split = Split::train;
  ExperimentConfig valid_cfg = base;
  valid_cfg.data.split = Split::valid;
  const Dataset train = prepare_dataset(train_cfg);
  const Dataset valid = prepare_dataset(valid_cfg);

  for (const auto& c : found) {
    CheckpointEntry e;
    e.epoch = c.epoch;
    e.decoder = c.path;
    std::string enc_name = c.path.filename().string();
    enc_name.replace(0, 7, "encoder");
    if (std::filesystem::exists(dir / enc_name)) e.encoder = dir / enc_name;

    ExperimentConfig run = cfg;
    run.decoder = c.path.string();
    if (e.encoder) run.encoder = e.encoder->string();
    try {
      if (!e.encoder && (run.wants(Estimator::ais_encoder) || run.wants(Estimator::elbo) ||
                         run.wants(Estimator::iwae))) {
        throw ContractError("no encoder checkpoint next to it");
      }
      run.data.split = Split::train;
      e.train = run_experiment(run, train);
      run.data.split = Split::valid;
      e.valid = run_experiment(run, valid);
    } catch (const std::exception& ex) {
      curve.warnings.push_back("skipping " + c.path.filename().string() + ": " + ex.what());
      continue;
    }
    curve.entries.push_back(std::move(e));
  }
  return curve;
}

std::string curve_csv(const CheckpointCurve& curve, const std::vector<Estimator>& estimators) {
  std::ostringstream out;
  out << "epoch,checkpoint,split,estimator,mean,stderr,n\n";
  for (const auto& e : curve.entries) {
    for (const ExperimentReport* r : {&e.train, &e.valid}) {
      for (const auto& s : summarize(r->rows, estimators)) {
        out << e.epoch << ',' << e.decoder.filename().string() << ',' << to_string(r->split)
            << ',' << to_string(s.estimator) << ',' << fmt_double(s.mean) << ','
            << fmt_double(s.std_error) << ',' << s.n << '\n';
      }
    }
  }
  return out.str();
}

std::string encode_pgm_grid(std::span<const Vector> images, int rows, int cols, int height,
                            int width) {
  if (rows < 1 || cols < 1 || height < 1 || width < 1) {
    throw ContractError("image grid dimensions must be positive");
  }
  if (images.size() > static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ContractError("image grid has " + std::to_string(rows * cols) + " cells but " +
                        std::to_string(images.size()) + " images were given");
  }
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].size() != static_cast<Eigen::Index>(height) * width) {
      throw ContractError("image " + std::to_string(k) + " has " +
                          std::to_string(images[k].size()) + " values, cannot reshape to " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
  }
  const int total_w = width * cols;
  const int total_h = height * rows;
  std::string out = "P5\n" + std::to_string(total_w) + " " + std::to_string(total_h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(total_w) * total_h, '\0');
  for (std::size_t k = 0; k < images.size(); ++k) {
    const int gr = static_cast<int>(k) / cols;
    const int gc = static_cast<int>(k) % cols;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double v = std::round(255.0 * images[k](y * width + x));
        const int byte = static_cast<int>(std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 255.0));
        const std::size_t pos = header + static_cast<std::size_t>(gr * height + y) * total_w +
                                static_cast<std::size_t>(gc * width + x);
        out[pos] = static_cast<char>(static_cast<unsigned char>(byte));
      }
    }
  }
  return out;
}

void export_image_grid(std::span<const Vector> images, int rows, int cols, int height,
                       int width, const std::filesystem::path& path) {
  write_text(path, encode_pgm_grid(images, rows, cols, height, width));
}

PgmImage decode_pgm(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string magic;
  int maxval = 0;
  PgmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || img.width <= 0 || img.height <= 0 || maxval != 255) {
    throw ParseError("not an 8-bit binary PGM");
  }
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() < offset + n) throw ParseError("PGM payload truncated");
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = static_cast<unsigned char>(bytes[offset + i]) / 255.0;
  }
  return img;
}

}  // namespace aiseval
