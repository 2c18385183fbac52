#pragma once

#include "aiseval/ais.hpp"
#include "aiseval/baselines.hpp"
#include "aiseval/data.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aiseval {

enum class Estimator { ais, ais_encoder, kde, elbo, iwae, bdmc };

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

enum class Preprocess { none, dequantize, binarize_threshold, binarize_stochastic };

std::string_view to_string(Preprocess p);
Preprocess parse_preprocess(std::string_view name);

enum class DataFormat { idx, text, binarized_text };

std::string_view to_string(DataFormat f);
DataFormat parse_data_format(std::string_view name);

struct DataConfig {
  std::string path;
  DataFormat format = DataFormat::idx;
  std::optional<std::string> labels;
  /// Exact latents (text matrix) for simulated data; enables the bdmc estimator.
  std::optional<std::string> latents;
  Split split = Split::test;
  int valid_start = 50000;
  /// 0 means every example of the split.
  int n_examples = 1000;
  std::optional<int> digit;
  Preprocess preprocess = Preprocess::none;
};

/// Everything that determines an evaluation run. Defaults follow the
/// full-scale protocol: 10,000 intermediate distributions with 16 chains,
/// 10^6 KDE samples and 2x10^5 IWAE samples.
struct ExperimentConfig {
  std::string decoder;
  std::optional<std::string> encoder;
  ObservationModel obs = ObservationModel::gaussian(0.02);
  std::vector<Estimator> estimators{Estimator::ais};

  int ais_steps = 10000;
  int ais_chains = 16;
  ScheduleKind schedule = ScheduleKind::linear;
  HmcParams hmc;
  long long kde_samples = 1'000'000;
  bool kde_share_samples = false;
  long long iwae_samples = 200'000;
  int elbo_samples = 100;

  DataConfig data;
  std::optional<std::uint64_t> seed;
  std::string output_dir;

  /// Not part of the experiment identity: results never depend on it.
  std::size_t workers = 1;

  bool wants(Estimator e) const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing fields keep their defaults. Throws ParseError on bad values.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON of the config, as 16 hex digits. The output
/// directory is left out since it cannot change any result.
std::string config_hash(const ExperimentConfig& cfg);

/// Loads, preprocesses, splits, filters and subsamples the configured data.
Dataset prepare_dataset(const ExperimentConfig& cfg);

struct ExampleRow {
  std::uint64_t id = 0;
  Split split = Split::test;
  /// Indexed by Estimator; NaN when not computed.
  std::array<double, 6> nats{};
  double ais_stderr = 0.0;
  double bdmc_upper = 0.0;
  double bdmc_gap = 0.0;
  std::string error;
  /// Wall time per estimator; reported in the JSON summary only.
  std::array<double, 6> seconds{};

  double get(Estimator e) const { return nats[static_cast<std::size_t>(e)]; }
};

struct EstimatorSummary {
  Estimator estimator = Estimator::ais;
  double mean = 0.0;
  double std_error = 0.0;  // sample stddev / sqrt(n) over examples
  int n = 0;
  double runtime_seconds = 0.0;
};

struct ExperimentReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  Split split = Split::test;
  std::vector<ExampleRow> rows;
  std::vector<EstimatorSummary> summaries;
  double mean_bdmc_gap = 0.0;
  int n_failed = 0;
  nlohmann::json config;

  bool all_failed() const { return !rows.empty() && n_failed == static_cast<int>(rows.size()); }
};

/// Aggregates recomputed from rows; rows with an error are left out.
std::vector<EstimatorSummary> summarize(const std::vector<ExampleRow>& rows,
                                        const std::vector<Estimator>& estimators);

/// Runs every selected estimator on every example. Examples are spread over
/// cfg.workers threads; each estimator draws from streams keyed by
/// (seed, example id), so the output does not depend on the worker count.
/// A failing example is recorded in its row and does not stop the run.
ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& data);

/// Per-example CSV. The first line is a comment carrying the config hash and
/// seed; only the selected estimators get columns.
std::string report_csv(const ExperimentReport& report, const std::vector<Estimator>& estimators);
nlohmann::json report_json(const ExperimentReport& report);

/// Writes report.csv and summary.json (or <prefix>report.csv ...) into dir.
void write_report(const ExperimentReport& report, const std::vector<Estimator>& estimators,
                  const std::filesystem::path& dir, const std::string& prefix = "");

struct CheckpointEntry {
  int epoch = 0;
  std::filesystem::path decoder;
  std::optional<std::filesystem::path> encoder;
  ExperimentReport train;
  ExperimentReport valid;
};

struct CheckpointCurve {
  std::vector<CheckpointEntry> entries;
  std::vector<std::string> warnings;
};

/// Epoch tag of a checkpoint file name: the last run of digits in the stem.
std::optional<int> checkpoint_epoch(const std::filesystem::path& file);

/// Evaluates every decoder checkpoint in `dir` (files named decoder*<epoch>.json;
/// a matching encoder*<epoch>.json is picked up when present) on the same
/// train and validation subsets with the same seed, in epoch order.
/// Unloadable checkpoints are skipped with a warning.
CheckpointCurve checkpoint_curve(const ExperimentConfig& cfg, const std::filesystem::path& dir);

std::string curve_csv(const CheckpointCurve& curve, const std::vector<Estimator>& estimators);

/// Binary PGM (P5) grid of images, filled row-major; unused cells are black.
/// Pixel bytes are round(255 * value) clamped to [0, 255].
std::string encode_pgm_grid(std::span<const Vector> images, int rows, int cols, int height,
                            int width);
void export_image_grid(std::span<const Vector> images, int rows, int cols, int height,
                       int width, const std::filesystem::path& path);

/// Parses a P5 file produced by encode_pgm_grid back into [0, 1] intensities.
struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
};
PgmImage decode_pgm(std::string_view bytes);

}  // namespace aiseval
