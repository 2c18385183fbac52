#include "aiseval/net.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace aiseval {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

void apply_activation(Activation a, Vector& v) {
  switch (a) {
    case Activation::tanh:
      v = v.array().tanh();
      break;
    case Activation::relu:
      v = v.cwiseMax(0.0);
      break;
    case Activation::sigmoid:
      v = (1.0 + (-v.array()).exp()).inverse();
      break;
    case Activation::linear:
      break;
  }
}

// Multiplies delta in place by act'(pre), expressed through the layer output y.
void scale_by_derivative(Activation a, const Vector& y, Vector& delta) {
  switch (a) {
    case Activation::tanh:
      delta.array() *= 1.0 - y.array().square();
      break;
    case Activation::relu:
      delta.array() *= (y.array() > 0.0).cast<double>();
      break;
    case Activation::sigmoid:
      delta.array() *= y.array() * (1.0 - y.array());
      break;
    case Activation::linear:
      break;
  }
}

void check_input(const MlpNetwork& net, const Vector& z) {
  if (z.size() != net.input_dim()) {
    throw ContractError("network input has " + std::to_string(z.size()) +
                        " entries, expected " + std::to_string(net.input_dim()));
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "linear") return Activation::linear;
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(NetRole r) {
  return r == NetRole::encoder ? "encoder" : "decoder";
}

MlpNetwork::MlpNetwork(std::vector<Layer> layers, NetRole role, ModelMetadata metadata)
    : layers_(std::move(layers)), role_(role), metadata_(std::move(metadata)) {
  if (layers_.empty()) throw ContractError("network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& l = layers_[k];
    const std::string tag = "layer " + std::to_string(k + 1) + ": ";
    if (l.in_dim() <= 0 || l.out_dim() <= 0) throw ContractError(tag + "empty weight matrix");
    if (l.bias.size() != l.out_dim()) {
      throw ContractError(tag + "bias has " + std::to_string(l.bias.size()) +
                          " entries, expected " + std::to_string(l.out_dim()));
    }
    if (k > 0 && layers_[k - 1].out_dim() != l.in_dim()) {
      throw ContractError(tag + "in=" + std::to_string(l.in_dim()) +
                          " does not match previous layer out=" +
                          std::to_string(layers_[k - 1].out_dim()));
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw ContractError(tag + "non-finite parameter");
    }
  }
}

Vector MlpNetwork::forward(const Vector& z) const {
  check_input(*this, z);
  Vector h = z;
  for (const Layer& l : layers_) {
    Vector pre = l.bias;
    pre.noalias() += l.weight * h;
    apply_activation(l.activation, pre);
    h = std::move(pre);
  }
  return h;
}

Vector MlpNetwork::grad_input(const Vector& z, const Vector& upstream) const {
  if (upstream.size() != output_dim()) {
    throw ContractError("upstream has " + std::to_string(upstream.size()) +
                        " entries, expected " + std::to_string(output_dim()));
  }
  ForwardTape tape(*this);
  tape.forward(z);
  Vector grad;
  tape.backward(upstream, grad);
  return grad;
}

ForwardTape::ForwardTape(const MlpNetwork& net) : net_(&net) {
  outputs_.reserve(net.layers().size());
  for (const Layer& l : net.layers()) outputs_.emplace_back(l.out_dim());
}

const Vector& ForwardTape::forward(const Vector& z) {
  check_input(*net_, z);
  const auto layers = net_->layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& l = layers[k];
    Vector& out = outputs_[k];
    out = l.bias;
    if (k == 0) {
      out.noalias() += l.weight * z;
    } else {
      out.noalias() += l.weight * outputs_[k - 1];
    }
    apply_activation(l.activation, out);
  }
  return outputs_.back();
}

void ForwardTape::backward(const Vector& upstream, Vector& grad_z) {
  const auto layers = net_->layers();
  delta_ = upstream;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Layer& l = layers[k];
    scale_by_derivative(l.activation, outputs_[k], delta_);
    scratch_.noalias() = l.weight.transpose() * delta_;
    delta_.swap(scratch_);
  }
  grad_z = delta_;
}

std::string save_model(const MlpNetwork& net) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["role"] = std::string(to_string(net.role()));
  json layers = json::array();
  for (const Layer& l : net.layers()) {
    json w = json::array();
    for (int r = 0; r < l.out_dim(); ++r) {
      json row = json::array();
      for (int c = 0; c < l.in_dim(); ++c) row.push_back(l.weight(r, c));
      w.push_back(std::move(row));
    }
    json b = json::array();
    for (int r = 0; r < l.out_dim(); ++r) b.push_back(l.bias(r));
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", std::string(to_string(l.activation))},
                      {"w", std::move(w)},
                      {"b", std::move(b)}});
  }
  doc["layers"] = std::move(layers);
  json meta = json::object();
  if (net.metadata().epoch) meta["epoch"] = *net.metadata().epoch;
  if (net.metadata().objective) meta["objective"] = *net.metadata().objective;
  if (!meta.empty()) doc["metadata"] = std::move(meta);
  return doc.dump(1);
}

MlpNetwork load_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model file must be a JSON object");
  if (!doc.contains("format_version") || doc["format_version"] != kFormatVersion) {
    throw ParseError("model file: unsupported or missing format_version (expected 1)");
  }
  NetRole role = NetRole::decoder;
  if (doc.contains("role")) {
    const auto r = doc["role"].get<std::string>();
    if (r == "encoder") {
      role = NetRole::encoder;
    } else if (r != "decoder") {
      throw ParseError("model file: unknown role '" + r + "'");
    }
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw ParseError("model file: 'layers' must be a non-empty array");
  }

  std::vector<Layer> layers;
  int prev_out = -1;
  int index = 0;
  for (const json& jl : doc["layers"]) {
    ++index;
    const std::string tag = "layer " + std::to_string(index) + ": ";
    try {
      const int in = jl.at("in").get<int>();
      const int out = jl.at("out").get<int>();
      if (in <= 0 || out <= 0) throw ParseError(tag + "dimensions must be positive");
      if (prev_out >= 0 && in != prev_out) {
        throw ParseError(tag + "dimension chain broken: in=" + std::to_string(in) +
                         " but previous layer out=" + std::to_string(prev_out));
      }
      Activation act;
      try {
        act = parse_activation(jl.at("activation").get<std::string>());
      } catch (const ParseError& e) {
        throw ParseError(tag + e.what());
      }
      const json& w = jl.at("w");
      const json& b = jl.at("b");
      if (!w.is_array() || static_cast<int>(w.size()) != out) {
        throw ParseError(tag + "'w' must have " + std::to_string(out) + " rows");
      }
      if (!b.is_array() || static_cast<int>(b.size()) != out) {
        throw ParseError(tag + "'b' must have " + std::to_string(out) + " entries");
      }
      Layer layer{Matrix(out, in), Vector(out), act};
      for (int r = 0; r < out; ++r) {
        if (!w[r].is_array() || static_cast<int>(w[r].size()) != in) {
          throw ParseError(tag + "row " + std::to_string(r) + " of 'w' must have " +
                           std::to_string(in) + " entries");
        }
        for (int c = 0; c < in; ++c) layer.weight(r, c) = w[r][c].get<double>();
        layer.bias(r) = b[r].get<double>();
      }
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
        throw ParseError(tag + "non-finite parameter");
      }
      layers.push_back(std::move(layer));
      prev_out = out;
    } catch (const json::exception& e) {
      throw ParseError(tag + e.what());
    }
  }

  ModelMetadata meta;
  if (doc.contains("metadata") && doc["metadata"].is_object()) {
    const json& m = doc["metadata"];
    if (m.contains("epoch")) meta.epoch = m["epoch"].get<int>();
    if (m.contains("objective")) meta.objective = m["objective"].get<std::string>();
  }
  return MlpNetwork(std::move(layers), role, std::move(meta));
}

MlpNetwork load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_model(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_model_file(const MlpNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << save_model(net) << '\n';
}

}  // namespace aiseval
