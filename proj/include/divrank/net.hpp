// Copyright 2026 The divrank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIVRANK_NET_HPP_
#define DIVRANK_NET_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "divrank/types.hpp"
#include "json.hpp"

namespace divrank {

enum class Activation { kRelu, kTanh, kIdentity };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  throw std::logic_error("bad activation");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + s);
}

struct LayerSpec {
  int input_dim = 0;
  int output_dim = 0;
  Activation activation = Activation::kIdentity;
};

/// Fully-connected feed-forward network, 64-bit throughout. Weights are
/// row-major [output_dim x input_dim] per layer.
class Network {
 public:
  struct Layer {
    std::vector<double> w;
    std::vector<double> b;
  };

  Network() = default;

  /// Scaled-uniform weight init in +/- sqrt(6/(fan_in+fan_out)), zero biases.
  Network(std::vector<LayerSpec> specs, std::uint64_t seed)
      : specs_(std::move(specs)), seed_(seed) {
    for (std::size_t i = 0; i + 1 < specs_.size(); ++i) {
      if (specs_[i].output_dim != specs_[i + 1].input_dim) {
        throw std::invalid_argument("layer dims do not chain");
      }
    }
    std::mt19937_64 rng(seed);
    for (const auto& s : specs_) {
      if (s.input_dim <= 0 || s.output_dim <= 0) {
        throw std::invalid_argument("layer dims must be positive");
      }
      double limit = std::sqrt(6.0 / (s.input_dim + s.output_dim));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Layer layer;
      layer.w.resize(static_cast<std::size_t>(s.output_dim) * s.input_dim);
      layer.b.assign(s.output_dim, 0.0);
      for (double& v : layer.w) v = dist(rng);
      layers_.push_back(std::move(layer));
    }
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::uint64_t seed() const { return seed_; }
  int input_dim() const { return specs_.empty() ? 0 : specs_.front().input_dim; }
  int output_dim() const {
    return specs_.empty() ? 0 : specs_.back().output_dim;
  }

  /// Per-layer pre-activations and activations from one forward pass,
  /// kept around for backprop.
  struct Trace {
    std::vector<std::vector<double>> pre;   // one per layer
    std::vector<std::vector<double>> post;  // one per layer
  };

  std::vector<double> forward(std::span<const double> input,
                              Trace* trace = nullptr) const {
    if (static_cast<int>(input.size()) != input_dim()) {
      throw std::invalid_argument("input dim " + std::to_string(input.size()) +
                                  " != expected " +
                                  std::to_string(input_dim()));
    }
    if (trace) {
      trace->pre.assign(layers_.size(), {});
      trace->post.assign(layers_.size(), {});
    }
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& spec = specs_[li];
      const auto& layer = layers_[li];
      std::vector<double> pre(spec.output_dim);
      for (int o = 0; o < spec.output_dim; ++o) {
        double acc = layer.b[o];
        const double* row = &layer.w[static_cast<std::size_t>(o) * spec.input_dim];
        for (int i = 0; i < spec.input_dim; ++i) acc += row[i] * x[i];
        pre[o] = acc;
      }
      std::vector<double> post(spec.output_dim);
      for (int o = 0; o < spec.output_dim; ++o) {
        post[o] = activate(spec.activation, pre[o]);
      }
      if (trace) {
        trace->pre[li] = pre;
        trace->post[li] = post;
      }
      x = std::move(post);
    }
    return x;
  }

  double forward_scalar(std::span<const double> input,
                        Trace* trace = nullptr) const {
    if (output_dim() != 1) throw std::logic_error("network output is not scalar");
    return forward(input, trace)[0];
  }

  static double activate(Activation a, double x) {
    switch (a) {
      case Activation::kRelu: return x > 0.0 ? x : 0.0;
      case Activation::kTanh: return std::tanh(x);
      case Activation::kIdentity: return x;
    }
    return x;
  }

  static double activate_grad(Activation a, double pre, double post) {
    switch (a) {
      case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
      case Activation::kTanh: return 1.0 - post * post;
      case Activation::kIdentity: return 1.0;
    }
    return 1.0;
  }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
};

/// Gradient accumulator shaped like a Network's parameters.
struct Gradients {
  std::vector<Network::Layer> layers;

  static Gradients zeros_like(const Network& net) {
    Gradients g;
    for (const auto& layer : net.layers()) {
      Network::Layer zl;
      zl.w.assign(layer.w.size(), 0.0);
      zl.b.assign(layer.b.size(), 0.0);
      g.layers.push_back(std::move(zl));
    }
    return g;
  }

  void zero() {
    for (auto& layer : layers) {
      std::fill(layer.w.begin(), layer.w.end(), 0.0);
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
  }

  void scale(double c) {
    for (auto& layer : layers) {
      for (double& v : layer.w) v *= c;
      for (double& v : layer.b) v *= c;
    }
  }
};

/// Backprop one example through `net`. `out_grad` is dLoss/dOutput;
/// parameter gradients are accumulated into `grads` (may be null);
/// returns dLoss/dInput.
inline std::vector<double> backward(const Network& net,
                                    std::span<const double> input,
                                    const Network::Trace& trace,
                                    std::span<const double> out_grad,
                                    Gradients* grads) {
  const auto& specs = net.specs();
  const auto& layers = net.layers();
  std::vector<double> delta(out_grad.begin(), out_grad.end());
  for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
    const auto& spec = specs[li];
    const auto& layer = layers[li];
    // Through the activation.
    for (int o = 0; o < spec.output_dim; ++o) {
      delta[o] *= Network::activate_grad(spec.activation, trace.pre[li][o],
                                         trace.post[li][o]);
    }
    std::span<const double> layer_in =
        li == 0 ? input : std::span<const double>(trace.post[li - 1]);
    if (grads) {
      auto& gl = grads->layers[li];
      for (int o = 0; o < spec.output_dim; ++o) {
        double* grow = &gl.w[static_cast<std::size_t>(o) * spec.input_dim];
        for (int i = 0; i < spec.input_dim; ++i) grow[i] += delta[o] * layer_in[i];
        gl.b[o] += delta[o];
      }
    }
    std::vector<double> prev(spec.input_dim, 0.0);
    for (int o = 0; o < spec.output_dim; ++o) {
      const double* row = &layer.w[static_cast<std::size_t>(o) * spec.input_dim];
      for (int i = 0; i < spec.input_dim; ++i) prev[i] += delta[o] * row[i];
    }
    delta = std::move(prev);
  }
  return delta;
}

template <typename F>
void for_each_param(Network& net, F&& f) {
  for (auto& layer : net.layers()) {
    for (double& v : layer.w) f(v);
    for (double& v : layer.b) f(v);
  }
}

inline std::size_t param_count(const Network& net) {
  std::size_t n = 0;
  for (const auto& layer : net.layers()) n += layer.w.size() + layer.b.size();
  return n;
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// Cross entropy of the booked listing winning the pair:
/// -log(e^a / (e^a + e^b)) = softplus(b - a), overflow-free.
inline double pairwise_loss(double logit_booked, double logit_not_booked) {
  if (!std::isfinite(logit_booked) || !std::isfinite(logit_not_booked)) {
    throw std::invalid_argument("non-finite logit");
  }
  double d = logit_booked - logit_not_booked;
  if (d > 0.0) return std::log1p(std::exp(-d));
  return -d + std::log1p(std::exp(d));
}

/// d pairwise_loss / d (logit_booked - logit_not_booked) = sigmoid(d) - 1.
inline double pairwise_loss_grad(double logit_booked, double logit_not_booked) {
  return stable_sigmoid(logit_booked - logit_not_booked) - 1.0;
}

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double weight_decay = 0.0;  // L2 on weights, not biases
  std::uint64_t seed = 1;

  void validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate <= 0");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay < 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size < 1");
    if (epochs < 0) throw std::invalid_argument("epochs < 0");
  }
};

/// Adds weight_decay * w to the weight gradients (biases exempt).
inline void apply_weight_decay(const Network& net, double weight_decay,
                               Gradients* grads) {
  if (weight_decay == 0.0) return;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const auto& w = net.layers()[li].w;
    auto& gw = grads->layers[li].w;
    for (std::size_t i = 0; i < w.size(); ++i) gw[i] += weight_decay * w[i];
  }
}

/// SGD / Adam over a Network's parameters. Adam uses beta = (0.9, 0.999),
/// eps = 1e-8 with bias correction.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, const Network& net)
      : kind_(kind), lr_(learning_rate) {
    if (kind_ == OptimizerKind::kAdam) {
      m_ = Gradients::zeros_like(net);
      v_ = Gradients::zeros_like(net);
    }
  }

  void step(Network& net, const Gradients& g) {
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t li = 0; li < net.layers().size(); ++li) {
        auto& layer = net.layers()[li];
        for (std::size_t i = 0; i < layer.w.size(); ++i) {
          layer.w[i] -= lr_ * g.layers[li].w[i];
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i) {
          layer.b[i] -= lr_ * g.layers[li].b[i];
        }
      }
      return;
    }
    ++t_;
    double corr1 = 1.0 - std::pow(kBeta1, t_);
    double corr2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      auto& layer = net.layers()[li];
      auto update = [&](double& p, double grad, double& m, double& v) {
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
        p -= lr_ * (m / corr1) / (std::sqrt(v / corr2) + kEps);
      };
      for (std::size_t i = 0; i < layer.w.size(); ++i) {
        update(layer.w[i], g.layers[li].w[i], m_.layers[li].w[i],
               v_.layers[li].w[i]);
      }
      for (std::size_t i = 0; i < layer.b.size(); ++i) {
        update(layer.b[i], g.layers[li].b[i], m_.layers[li].b[i],
               v_.layers[li].b[i]);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  OptimizerKind kind_;
  double lr_;
  Gradients m_, v_;
  int t_ = 0;
};

// --- checkpoint serialization -----------------------------------------------

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json jl = nlohmann::json::array();
  for (std::size_t i = 0; i < net.specs().size(); ++i) {
    const auto& s = net.specs()[i];
    const auto& layer = net.layers()[i];
    jl.push_back({{"input_dim", s.input_dim},
                  {"output_dim", s.output_dim},
                  {"activation", activation_name(s.activation)},
                  {"w", layer.w},
                  {"b", layer.b}});
  }
  return {{"layers", jl}, {"seed", net.seed()}};
}

inline Network network_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> specs;
  for (const auto& jl : j.at("layers")) {
    specs.push_back({jl.at("input_dim").get<int>(),
                     jl.at("output_dim").get<int>(),
                     activation_from_name(jl.at("activation").get<std::string>())});
  }
  Network net(specs, j.at("seed").get<std::uint64_t>());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    net.layers()[i].w = j.at("layers")[i].at("w").get<std::vector<double>>();
    net.layers()[i].b = j.at("layers")[i].at("b").get<std::vector<double>>();
    if (net.layers()[i].w.size() !=
            static_cast<std::size_t>(specs[i].input_dim) * specs[i].output_dim ||
        net.layers()[i].b.size() != static_cast<std::size_t>(specs[i].output_dim)) {
      throw std::invalid_argument("checkpoint weight shape mismatch");
    }
  }
  return net;
}

}  // namespace divrank

#endif  // DIVRANK_NET_HPP_
