#include "aiseval/data.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <string>

using namespace aiseval;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// n images of 2x3 with pixel (i, j) = 10 * i + j.
std::vector<std::uint8_t> idx_images(std::uint32_t n) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, n);
  put_be32(out, 2);
  put_be32(out, 3);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint8_t j = 0; j < 6; ++j) out.push_back(static_cast<std::uint8_t>(10 * i + j));
  }
  return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::string parse_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

Dataset grid_dataset(int n, int d) {
  Dataset ds;
  ds.values.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.values(i, j) = ((i * 37 + j * 11) % 256) / 255.0;
    ds.ids.push_back(static_cast<std::uint64_t>(i));
  }
  return ds;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("idx fixture parses with labels") {
    const auto img = idx_images(4);
    const auto lab = idx_labels({3, 1, 3, 7});
    const auto ds = parse_mnist_idx(img, std::span<const std::uint8_t>(lab));
    CHECK(ds.size() == 4);
    CHECK(ds.dim() == 6);
    CHECK(ds.height == 2);
    CHECK(ds.width == 3);
    CHECK(ds.values(2, 5) == doctest::Approx(25.0 / 255.0));
    CHECK(ds.values.maxCoeff() <= 1.0);
    CHECK(ds.labels == std::vector<int>{3, 1, 3, 7});
    CHECK(ds.ids == std::vector<std::uint64_t>{0, 1, 2, 3});
  }

  TEST_CASE("idx bad magic names the offset") {
    auto img = idx_images(1);
    img[3] = 0x01;
    const auto msg = parse_error([&] { parse_mnist_idx(img); });
    CHECK(msg.find("magic") != std::string::npos);
    CHECK(msg.find("offset 0") != std::string::npos);
    const auto lab = idx_images(1);
    const auto msg2 = parse_error(
        [&] { parse_mnist_idx(idx_images(1), std::span<const std::uint8_t>(lab)); });
    CHECK(msg2.find("IDX labels") != std::string::npos);
  }

  TEST_CASE("idx truncation reports where the file ends") {
    auto img = idx_images(3);
    img.resize(img.size() - 1);
    const auto msg = parse_error([&] { parse_mnist_idx(img); });
    CHECK(msg.find("truncated") != std::string::npos);
    CHECK(msg.find("offset 16") != std::string::npos);
    CHECK(msg.find("offset " + std::to_string(img.size())) != std::string::npos);
    const std::vector<std::uint8_t> stub{0, 0, 8, 3, 0, 0};
    CHECK(parse_error([&] { parse_mnist_idx(stub); }).find("offset 4") != std::string::npos);
    auto lab = idx_labels({1, 2});
    CHECK_THROWS_AS(parse_mnist_idx(idx_images(3), std::span<const std::uint8_t>(lab)),
                    ParseError);
  }

  TEST_CASE("idx files load from disk") {
    const auto dir = oracle::scratch_dir("idx");
    const auto img = idx_images(2);
    std::ofstream(dir / "img.idx", std::ios::binary)
        .write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    const auto ds = load_mnist_idx(dir / "img.idx");
    CHECK(ds.size() == 2);
    CHECK(ds.provenance == "img.idx");
    CHECK_THROWS_AS(load_mnist_idx(dir / "missing.idx"), ParseError);
  }

  TEST_CASE("label filter keeps matching rows and their ids") {
    const auto img = idx_images(5);
    const auto lab = idx_labels({3, 1, 3, 7, 3});
    const auto ds = parse_mnist_idx(img, std::span<const std::uint8_t>(lab));
    const auto threes = filter_label(ds, 3);
    CHECK(threes.size() == 3);
    CHECK(threes.ids == std::vector<std::uint64_t>{0, 2, 4});
    CHECK(threes.values.row(1) == ds.values.row(2));
    CHECK(filter_label(ds, 9).size() == 0);
    CHECK_THROWS_AS(filter_label(parse_mnist_idx(img), 3), ContractError);
  }

  TEST_CASE("dequantization stays in its bin and is deterministic") {
    const auto ds = grid_dataset(20, 30);
    Rng a(1), b(1);
    const auto d1 = dequantize(ds, a);
    const auto d2 = dequantize(ds, b);
    CHECK(d1.values == d2.values);
    for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < ds.values.cols(); ++j) {
        const double level = std::round(255.0 * ds.values(i, j));
        CHECK(d1.values(i, j) >= level / 256.0);
        CHECK(d1.values(i, j) < (level + 1.0) / 256.0);
      }
    }
    CHECK(d1.values.minCoeff() >= 0.0);
    CHECK(d1.values.maxCoeff() < 1.0);
    Dataset off = ds;
    off.values(0, 0) = 0.3333;
    CHECK_THROWS_AS(dequantize(off, a), ContractError);
  }

  TEST_CASE("threshold and stochastic binarization") {
    Dataset ds;
    ds.values.resize(1, 4);
    ds.values << 0.0, 0.49, 0.5, 1.0;
    const auto t = binarize(ds, BinarizeMode::threshold);
    CHECK(t.binary);
    CHECK(t.values(0, 0) == 0.0);
    CHECK(t.values(0, 1) == 0.0);
    CHECK(t.values(0, 2) == 1.0);
    CHECK(t.values(0, 3) == 1.0);
    CHECK_THROWS_AS(binarize(ds, BinarizeMode::stochastic), ContractError);

    Dataset big;
    big.values = Matrix::Constant(200, 100, 0.3);
    Rng rng(2);
    const auto s = binarize(big, BinarizeMode::stochastic, &rng);
    bool only01 = true;
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      const double v = s.values.data()[i];
      only01 = only01 && (v == 0.0 || v == 1.0);
    }
    CHECK(only01);
    // 20000 Bernoulli(0.3) draws: sd of the mean is about 0.0032.
    CHECK(std::abs(s.values.mean() - 0.3) < 0.015);
  }

  TEST_CASE("text matrices round trip and report bad lines") {
    const auto dir = oracle::scratch_dir("text");
    Matrix m(2, 3);
    m << 0.1, 0.2, 1.0 / 3.0, -4.0, 5e-9, 6.0;
    save_text_matrix(m, dir / "m.txt");
    const auto ds = load_text_matrix(dir / "m.txt");
    CHECK(ds.values == m);
    std::ofstream(dir / "ragged.txt") << "# comment\n1 2 3\n4 5\n";
    const auto msg = parse_error([&] { load_text_matrix(dir / "ragged.txt"); });
    CHECK(msg.find(":3:") != std::string::npos);
    std::ofstream(dir / "word.txt") << "1 two 3\n";
    CHECK_THROWS_AS(load_text_matrix(dir / "word.txt"), ParseError);
    std::ofstream(dir / "empty.txt") << "# nothing\n";
    CHECK_THROWS_AS(load_text_matrix(dir / "empty.txt"), ParseError);
  }

  TEST_CASE("binarized text accepts only zeros and ones") {
    const auto dir = oracle::scratch_dir("bin");
    std::ofstream(dir / "ok.txt") << "0 1 1\n1 0 0\n";
    const auto ds = load_binarized_text(dir / "ok.txt");
    CHECK(ds.binary);
    CHECK(ds.size() == 2);
    std::ofstream(dir / "bad.txt") << "0 1 1\n1 0.5 0\n";
    const auto msg = parse_error([&] { load_binarized_text(dir / "bad.txt"); });
    CHECK(msg.find("row 1 column 1") != std::string::npos);
  }

  TEST_CASE("train and validation splits partition the training file") {
    const auto ds = grid_dataset(10, 2);
    const auto train = select_split(ds, Split::train, 7);
    const auto valid = select_split(ds, Split::valid, 7);
    const auto test = select_split(ds, Split::test, 7);
    CHECK(train.size() == 7);
    CHECK(valid.size() == 3);
    CHECK(test.size() == 10);
    CHECK(valid.ids.front() == 7);
    CHECK(train.split == Split::train);
    CHECK_THROWS_AS(select_split(ds, Split::valid, 10), ContractError);
    CHECK(parse_split("valid") == Split::valid);
    CHECK_THROWS_AS(parse_split("dev"), ContractError);
  }

  TEST_CASE("seeded shuffle is a deterministic subset") {
    auto ds = grid_dataset(50, 3);
    ds.latents = Matrix::Random(50, 2);
    const auto a = take_shuffled(ds, 20, 5);
    const auto b = take_shuffled(ds, 20, 5);
    const auto c = take_shuffled(ds, 20, 6);
    CHECK(a.ids == b.ids);
    CHECK(a.ids != c.ids);
    CHECK(std::set<std::uint64_t>(a.ids.begin(), a.ids.end()).size() == 20);
    for (int i = 0; i < a.size(); ++i) {
      CHECK(a.values.row(i) == ds.values.row(static_cast<int>(a.ids[i])));
      CHECK(a.latents.row(i) == ds.latents.row(static_cast<int>(a.ids[i])));
    }
    CHECK(take_shuffled(ds, 0, 5).size() == 50);
    CHECK(take_shuffled(ds, 500, 5).size() == 50);
  }

  TEST_CASE("full pipeline keeps values in the unit interval") {
    const auto img = idx_images(25);
    auto ds = parse_mnist_idx(img);
    Rng rng(7);
    ds = dequantize(ds, rng);
    ds = select_split(ds, Split::train, 20);
    ds = take_shuffled(ds, 8, 3);
    CHECK(ds.size() == 8);
    CHECK(ds.values.minCoeff() >= 0.0);
    CHECK(ds.values.maxCoeff() < 1.0);
    for (auto id : ds.ids) CHECK(id < 20);
  }
}
