#pragma once

#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrm/diff/graph.hpp"

namespace nrm::diff {

enum class Activation { None, Tanh, Relu, Sigmoid, Softmax };

/// y = x W + b with W of shape [in, out], Glorot-uniform initialised.
struct Linear {
  Linear(const std::string &name, std::size_t in, std::size_t out, std::mt19937_64 &rng);

  Parameter weight;
  Parameter bias;

  Value forward(Graph &g, Value x);
  [[nodiscard]] std::size_t in() const { return weight.value.dim(0); }
  [[nodiscard]] std::size_t out() const { return weight.value.dim(1); }
};

struct LayerSpec {
  std::size_t width;
  Activation activation = Activation::None;
  /// Dropout applied to this layer's output while training.
  double dropout = 0.0;
};

class Mlp {
public:
  Mlp(const std::string &name, std::size_t in, const std::vector<LayerSpec> &layers,
      std::mt19937_64 &rng);

  /// Row-wise forward of x [n, in]; dropout is active only when rng is given.
  Value forward(Graph &g, Value x, std::mt19937_64 *dropout_rng = nullptr);
  /// forward() without the last layer's activation, e.g. the logits of a
  /// softmax head.
  Value forward_logits(Graph &g, Value x, std::mt19937_64 *dropout_rng = nullptr);
  std::vector<Parameter *> parameters();
  [[nodiscard]] std::size_t in() const { return layers_.front().in(); }
  [[nodiscard]] std::size_t out() const { return layers_.back().out(); }

private:
  Value run(Graph &g, Value x, std::mt19937_64 *dropout_rng, bool last_activation);

  std::vector<Linear> layers_;
  std::vector<LayerSpec> specs_;
};

/// Policy head: three fully connected layers, tanh between them, softmax last.
Mlp make_actor(std::size_t in, std::size_t actions, std::mt19937_64 &rng,
               std::size_t hidden = 120);
/// Value head: same trunk as the actor with a single linear output.
Mlp make_critic(std::size_t in, std::mt19937_64 &rng, std::size_t hidden = 120);
/// Symbol grounder: three layers with one tanh after the first, optional
/// dropout on the hidden layers, softmax over symbols.
Mlp make_grounder(std::size_t in, std::size_t symbols, std::mt19937_64 &rng,
                  std::size_t hidden = 64, double dropout = 0.0);

/// Stacked LSTM; gate order i, f, g, o inside each fused weight matrix.
class Lstm {
public:
  struct State {
    std::vector<Value> h, c;
  };

  Lstm(const std::string &name, std::size_t in, std::size_t hidden, std::size_t layers,
       std::mt19937_64 &rng);

  /// Zero state for a batch of `rows` sequences.
  State zero_state(Graph &g, std::size_t rows = 1) const;
  /// Re-enters a state computed in another graph as constants.
  State import_state(Graph &g, const State &other) const;
  /// One time step for every layer; returns the top layer's hidden output.
  Value step(Graph &g, Value x, State &state);
  std::vector<Value> forward(Graph &g, std::span<const Value> sequence, State &state);

  std::vector<Parameter *> parameters();
  [[nodiscard]] std::size_t hidden() const { return hidden_; }
  [[nodiscard]] std::size_t layers() const { return cells_.size(); }

private:
  std::size_t hidden_;
  std::vector<Linear> cells_;
};

struct AdamConfig {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  explicit Adam(std::vector<Parameter *> params, AdamConfig config = {});

  /// One bias-corrected update from the accumulated gradients.
  void step();
  void zero_grad();
  [[nodiscard]] std::size_t steps() const noexcept { return t_; }
  [[nodiscard]] const AdamConfig &config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  [[nodiscard]] const std::vector<Parameter *> &parameters() const { return params_; }

private:
  std::vector<Parameter *> params_;
  AdamConfig config_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

double grad_norm(std::span<Parameter *const> params);
/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter *const> params, double max_norm);

/// Versioned binary checkpoint of named tensors.
void save_parameters(std::ostream &out, std::span<Parameter *const> params);
void save_parameters(const std::string &path, std::span<Parameter *const> params);
/// Loads into params in order; names and shapes must match.
void load_parameters(std::istream &in, std::span<Parameter *const> params);
void load_parameters(const std::string &path, std::span<Parameter *const> params);

} // namespace nrm::diff
