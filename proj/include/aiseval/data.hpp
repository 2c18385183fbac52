#pragma once

#include "aiseval/rng.hpp"
#include "aiseval/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aiseval {

enum class Split { train, valid, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// Rows of pixel intensities in [0, 1], one example per row.
struct Dataset {
  Matrix values;
  /// Image shape when the rows are images (0 otherwise).
  int height = 0;
  int width = 0;
  /// Class labels, empty when unknown.
  std::vector<int> labels;
  /// Row index in the originating file; stays attached through subsetting.
  std::vector<std::uint64_t> ids;
  /// Exact latents for simulated data (0 rows when absent).
  Matrix latents;
  Split split = Split::test;
  bool binary = false;
  std::string provenance;

  int size() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
  Vector row(int i) const { return values.row(i).transpose(); }
  bool has_latents() const { return latents.rows() == values.rows() && latents.rows() > 0; }

  /// Rows at the given positions, with ids, labels and latents carried along.
  Dataset subset(std::span<const int> positions) const;
};

/// Parses IDX image data (magic 0x00000803) and optional IDX labels (magic
/// 0x00000801). Pixels are scaled to [0, 1] by /255. Errors report byte offsets.
Dataset parse_mnist_idx(std::span<const std::uint8_t> images,
                        std::optional<std::span<const std::uint8_t>> labels = std::nullopt);

Dataset load_mnist_idx(const std::filesystem::path& images,
                       const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Keeps only examples whose label equals `digit`. Needs labels.
Dataset filter_label(const Dataset& data, int digit);

/// Uniform dequantization: pixel' = (255 * pixel + u) / 256 with u ~ U[0, 1),
/// so the result lies in [0, 1). Input must sit on the 1/255 grid.
Dataset dequantize(const Dataset& data, Rng& rng);

enum class BinarizeMode { stochastic, threshold };

/// threshold: pixel >= 0.5 -> 1. stochastic: 1 with probability pixel
/// (needs an rng).
Dataset binarize(const Dataset& data, BinarizeMode mode, Rng* rng = nullptr);

/// Whitespace-separated rows of numbers, one example per line. Lines starting
/// with '#' are skipped.
Dataset load_text_matrix(const std::filesystem::path& path);
void save_text_matrix(const Matrix& values, const std::filesystem::path& path);

/// Pre-binarized dataset in the text format above; throws ParseError on any
/// entry other than 0 or 1.
Dataset load_binarized_text(const std::filesystem::path& path);

/// Training files hold train rows [0, valid_start) and validation rows
/// [valid_start, end); a test file is used whole.
Dataset select_split(const Dataset& data, Split split, int valid_start);

/// First n examples after a seeded shuffle (all of them when n <= 0 or
/// n >= size). Result rows keep the shuffled order.
Dataset take_shuffled(const Dataset& data, int n, std::uint64_t seed);

}  // namespace aiseval
