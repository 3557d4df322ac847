#pragma once

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "nrm/automata/moore.hpp"
#include "nrm/diff/nn.hpp"

namespace nrm::neural {

using automata::SymbolId;
using diff::Graph;
using diff::Parameter;
using diff::Tensor;
using diff::Value;

/// Stacks equally sized state encodings into a [T, d] tensor.
Tensor stack_states(const std::vector<std::vector<double>> &states);

/// Maps environment states to probability rows over the symbols.
class Grounder {
public:
  virtual ~Grounder() = default;

  [[nodiscard]] virtual std::size_t input_dim() const = 0;
  [[nodiscard]] virtual std::size_t num_symbols() const = 0;
  /// Rows of `states` [T, d] to symbol probabilities [T, |P|]. Dropout is
  /// applied only when an rng is supplied.
  virtual Value ground(Graph &g, const Tensor &states, std::mt19937_64 *dropout_rng = nullptr) = 0;
  virtual std::vector<Parameter *> parameters() { return {}; }

  /// Most probable symbol for each row, lowest index on ties.
  std::vector<SymbolId> predict(const Tensor &states);
  std::vector<double> probabilities(std::span<const double> state);
};

class NeuralGrounder final : public Grounder {
public:
  NeuralGrounder(std::size_t input_dim, std::size_t num_symbols, std::mt19937_64 &rng,
                 std::size_t hidden = 64, double dropout = 0.0);

  [[nodiscard]] std::size_t input_dim() const override { return net_.in(); }
  [[nodiscard]] std::size_t num_symbols() const override { return net_.out(); }
  Value ground(Graph &g, const Tensor &states, std::mt19937_64 *dropout_rng) override;
  std::vector<Parameter *> parameters() override { return net_.parameters(); }

private:
  diff::Mlp net_;
};

/// Exact labeler: one-hot rows from a ground-truth labeling function.
class OracleGrounder final : public Grounder {
public:
  using Labeler = std::function<SymbolId(std::span<const double>)>;

  OracleGrounder(std::size_t input_dim, std::size_t num_symbols, Labeler label);
  /// States are one-hot symbol encodings themselves.
  static OracleGrounder one_hot(std::size_t num_symbols);

  [[nodiscard]] std::size_t input_dim() const override { return input_dim_; }
  [[nodiscard]] std::size_t num_symbols() const override { return num_symbols_; }
  Value ground(Graph &g, const Tensor &states, std::mt19937_64 *dropout_rng) override;

private:
  std::size_t input_dim_;
  std::size_t num_symbols_;
  Labeler label_;
};

} // namespace nrm::neural
