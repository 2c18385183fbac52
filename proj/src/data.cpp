#include "aiseval/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace aiseval {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        std::string_view what) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(std::string(what) + ": truncated header, need 4 bytes at offset " +
                     std::to_string(offset) + " but file has " + std::to_string(bytes.size()));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void expect_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected,
                  std::string_view what) {
  const std::uint32_t got = read_be32(bytes, 0, what);
  if (got != expected) {
    throw ParseError(std::string(what) + ": bad magic at offset 0, expected " + hex32(expected) +
                     ", found " + hex32(got));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw ContractError("unknown split '" + std::string(name) + "'");
}

Dataset Dataset::subset(std::span<const int> positions) const {
  Dataset out;
  out.height = height;
  out.width = width;
  out.split = split;
  out.binary = binary;
  out.provenance = provenance;
  out.values.resize(static_cast<Eigen::Index>(positions.size()), values.cols());
  if (has_latents()) out.latents.resize(out.values.rows(), latents.cols());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const int p = positions[i];
    if (p < 0 || p >= size()) throw ContractError("subset position out of range");
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(p);
    if (has_latents()) out.latents.row(static_cast<Eigen::Index>(i)) = latents.row(p);
    out.ids.push_back(ids.empty() ? static_cast<std::uint64_t>(p) : ids[p]);
    if (!labels.empty()) out.labels.push_back(labels[p]);
  }
  return out;
}

Dataset parse_mnist_idx(std::span<const std::uint8_t> images,
                        std::optional<std::span<const std::uint8_t>> labels) {
  expect_magic(images, kImageMagic, "IDX images");
  const std::uint32_t n = read_be32(images, 4, "IDX images");
  const std::uint32_t rows = read_be32(images, 8, "IDX images");
  const std::uint32_t cols = read_be32(images, 12, "IDX images");
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t payload = std::size_t{n} * pixels;
  if (images.size() < 16 + payload) {
    throw ParseError("IDX images: truncated, header declares " + std::to_string(n) + "x" +
                     std::to_string(rows) + "x" + std::to_string(cols) + " = " +
                     std::to_string(payload) + " pixel bytes from offset 16, file ends at offset " +
                     std::to_string(images.size()));
  }

  Dataset ds;
  ds.height = static_cast<int>(rows);
  ds.width = static_cast<int>(cols);
  ds.values.resize(n, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          images[16 + i * pixels + j] / 255.0;
    }
    ds.ids.push_back(i);
  }

  if (labels) {
    expect_magic(*labels, kLabelMagic, "IDX labels");
    const std::uint32_t nl = read_be32(*labels, 4, "IDX labels");
    if (nl != n) {
      throw ParseError("IDX labels: header at offset 4 declares " + std::to_string(nl) +
                       " labels but the image file has " + std::to_string(n) + " images");
    }
    if (labels->size() < 8 + std::size_t{nl}) {
      throw ParseError("IDX labels: truncated, need " + std::to_string(nl) +
                       " label bytes from offset 8, file ends at offset " +
                       std::to_string(labels->size()));
    }
    for (std::size_t i = 0; i < nl; ++i) ds.labels.push_back((*labels)[8 + i]);
  }
  ds.provenance = "idx";
  return ds;
}

Dataset load_mnist_idx(const std::filesystem::path& images,
                       const std::optional<std::filesystem::path>& labels) {
  const auto img = read_file(images);
  try {
    Dataset ds;
    if (labels) {
      const auto lab = read_file(*labels);
      ds = parse_mnist_idx(img, std::span<const std::uint8_t>(lab));
    } else {
      ds = parse_mnist_idx(img);
    }
    ds.provenance = images.filename().string();
    return ds;
  } catch (const ParseError& e) {
    throw ParseError(images.string() + ": " + e.what());
  }
}

Dataset filter_label(const Dataset& data, int digit) {
  if (data.labels.empty()) throw ContractError("label filter needs a dataset with labels");
  std::vector<int> keep;
  for (int i = 0; i < data.size(); ++i) {
    if (data.labels[i] == digit) keep.push_back(i);
  }
  return data.subset(keep);
}

Dataset dequantize(const Dataset& data, Rng& rng) {
  Dataset out = data;
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
      const double level = 255.0 * data.values(i, j);
      const double rounded = std::round(level);
      if (std::abs(level - rounded) > 1e-6 || rounded < 0.0 || rounded > 255.0) {
        throw ContractError("dequantize needs pixels on the 1/255 grid; row " +
                            std::to_string(i) + " column " + std::to_string(j) + " is " +
                            std::to_string(data.values(i, j)));
      }
      out.values(i, j) = (rounded + uniform01(rng)) / 256.0;
    }
  }
  out.binary = false;
  return out;
}

Dataset binarize(const Dataset& data, BinarizeMode mode, Rng* rng) {
  if (mode == BinarizeMode::stochastic && rng == nullptr) {
    throw ContractError("stochastic binarization needs an rng");
  }
  Dataset out = data;
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
      const double p = data.values(i, j);
      if (mode == BinarizeMode::threshold) {
        out.values(i, j) = p >= 0.5 ? 1.0 : 0.0;
      } else {
        out.values(i, j) = uniform01(*rng) < p ? 1.0 : 0.0;
      }
    }
  }
  out.binary = true;
  return out;
}

Dataset load_text_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok +
                         "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": row has " +
                       std::to_string(row.size()) + " values, expected " +
                       std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");

  Dataset ds;
  ds.values.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    ds.ids.push_back(i);
  }
  ds.provenance = path.filename().string();
  return ds;
}

void save_text_matrix(const Matrix& values, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ' ';
      out << values(i, j);
    }
    out << '\n';
  }
}

Dataset load_binarized_text(const std::filesystem::path& path) {
  Dataset ds = load_text_matrix(path);
  for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.values.cols(); ++j) {
      const double v = ds.values(i, j);
      if (v != 0.0 && v != 1.0) {
        throw ParseError(path.string() + ": row " + std::to_string(i) + " column " +
                         std::to_string(j) + " is " + std::to_string(v) +
                         ", binarized data must be 0 or 1");
      }
    }
  }
  ds.binary = true;
  return ds;
}

Dataset select_split(const Dataset& data, Split split, int valid_start) {
  std::vector<int> rows;
  const int n = data.size();
  const int cut = std::clamp(valid_start, 0, n);
  if (split == Split::test) {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
  } else if (split == Split::train) {
    for (int i = 0; i < cut; ++i) rows.push_back(i);
  } else {
    for (int i = cut; i < n; ++i) rows.push_back(i);
  }
  if (rows.empty()) {
    throw ContractError("split '" + std::string(to_string(split)) + "' is empty (dataset has " +
                        std::to_string(n) + " rows, validation starts at " +
                        std::to_string(valid_start) + ")");
  }
  Dataset out = data.subset(rows);
  out.split = split;
  return out;
}

Dataset take_shuffled(const Dataset& data, int n, std::uint64_t seed) {
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with explicit index draws; std::shuffle's use of the engine
  // is implementation-defined.
  Rng rng = make_stream(seed, 0, 0, StreamKind::data);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  if (n > 0 && n < data.size()) order.resize(static_cast<std::size_t>(n));
  return data.subset(order);
}

}  // namespace aiseval
