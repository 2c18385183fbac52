#pragma once

#include "aiseval/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aiseval {

enum class Activation { tanh, relu, sigmoid, linear };

std::string_view to_string(Activation a);
/// Throws ParseError for names outside {tanh, relu, sigmoid, linear}.
Activation parse_activation(std::string_view name);

/// One affine map followed by an elementwise nonlinearity: y = act(W x + b).
struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::linear;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

enum class NetRole { decoder, encoder };

std::string_view to_string(NetRole r);

struct ModelMetadata {
  std::optional<int> epoch;
  std::optional<std::string> objective;
};

/// Feed-forward network, immutable once constructed. The constructor checks
/// that layer dimensions chain and every parameter is finite.
///
/// Encoder networks emit 2*latent values: the posterior mean followed by the
/// log standard deviation.
class MlpNetwork {
 public:
  explicit MlpNetwork(std::vector<Layer> layers, NetRole role = NetRole::decoder,
                      ModelMetadata metadata = {});

  int input_dim() const { return layers_.front().in_dim(); }
  int output_dim() const { return layers_.back().out_dim(); }
  std::span<const Layer> layers() const { return layers_; }
  NetRole role() const { return role_; }
  const ModelMetadata& metadata() const { return metadata_; }

  Vector forward(const Vector& z) const;

  /// J(z)^T * upstream, where J is the Jacobian of forward() at z.
  /// The relu derivative at exactly zero is taken to be zero.
  Vector grad_input(const Vector& z, const Vector& upstream) const;

 private:
  std::vector<Layer> layers_;
  NetRole role_;
  ModelMetadata metadata_;
};

/// Scratch buffers for repeated forward/backward passes through one network.
/// Not shareable between threads; each chain or worker owns its own.
class ForwardTape {
 public:
  explicit ForwardTape(const MlpNetwork& net);

  /// Runs the network and records every layer output. The returned reference
  /// stays valid until the next call.
  const Vector& forward(const Vector& z);

  /// Backpropagates `upstream` through the most recent forward() call.
  void backward(const Vector& upstream, Vector& grad_z);

  const MlpNetwork& network() const { return *net_; }

 private:
  const MlpNetwork* net_;
  std::vector<Vector> outputs_;
  Vector delta_;
  Vector scratch_;
};

std::string save_model(const MlpNetwork& net);
MlpNetwork load_model(std::string_view text);

MlpNetwork load_model_file(const std::filesystem::path& path);
void save_model_file(const MlpNetwork& net, const std::filesystem::path& path);

}  // namespace aiseval
