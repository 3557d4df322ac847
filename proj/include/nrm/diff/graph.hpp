#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "nrm/diff/tensor.hpp"

namespace nrm::diff {

class Graph;

/// Handle to a node recorded in a Graph.
struct Value {
  Graph *graph = nullptr;
  std::uint32_t id = 0;

  [[nodiscard]] const Tensor &value() const;
  [[nodiscard]] const Shape &shape() const { return value().shape(); }
  [[nodiscard]] double item() const { return value().item(); }
};

/// Tape of a single forward pass. Nodes are appended in evaluation order,
/// so reverse tape order is a valid backward schedule.
class Graph {
public:
  Graph() = default;
  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  Value constant(Tensor t);
  /// Leaf reading p.value in place; backward accumulates into p.grad.
  Value param(Parameter &p);

  [[nodiscard]] const Tensor &value(Value v) const;
  /// Gradient of the last backward() target with respect to v.
  [[nodiscard]] const Tensor &grad(Value v) const;
  /// Reverse sweep from a single-element loss; throws NumericError if the loss
  /// is not finite.
  void backward(Value loss);
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  using Backward = std::function<void(Graph &, std::uint32_t self)>;
  /// Appends a node; used by the op implementations.
  Value record(Tensor value, Backward backward);
  Tensor &grad_mut(std::uint32_t id) { return nodes_[id].grad; }
  [[nodiscard]] const Tensor &value_of(std::uint32_t id) const;
  [[nodiscard]] const Tensor &grad_of(std::uint32_t id) const { return nodes_[id].grad; }

private:
  struct Node {
    Tensor value;
    const Tensor *external = nullptr;
    Parameter *param = nullptr;
    Tensor grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Elementwise and linear algebra. Shapes must match exactly unless noted.
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double s);
/// a [n, m] plus a row b [1, m] added to every row.
Value add_row(Value a, Value b);
Value concat_cols(std::span<const Value> parts);
Value concat_rows(std::span<const Value> parts);
Value slice_cols(Value a, std::size_t begin, std::size_t end);
Value slice_rows(Value a, std::size_t begin, std::size_t end);

Value tanh(Value a);
Value sigmoid(Value a);
Value relu(Value a);
Value log(Value a);

/// Softmax along the last axis.
Value softmax(Value a);
Value log_softmax(Value a);
/// softmax(a / tau) along the last axis; tau in (0, 1].
Value tau_softmax(Value a, double tau);

Value sum(Value a);
Value mean(Value a);
/// out[i] = a[i, index[i]] as a column [n, 1].
Value pick(Value a, std::span<const std::size_t> index);
/// Mean over rows of -log_softmax(logits)[i, target[i]].
Value cross_entropy_logits(Value logits, std::span<const std::size_t> target);
/// Mean over rows of -log(probs[i, target[i]]).
Value cross_entropy_probs(Value probs, std::span<const std::size_t> target);
/// Inverted dropout; identity when rate is 0 or training is false.
Value dropout(Value a, double rate, std::mt19937_64 &rng, bool training = true);
/// Row q [1, Q] pushed through the mixture of transition matrices weighted by
/// p [1, P]: out[j] = sum_i p[i] sum_k q[k] m[i, k, j], with m of shape [P, Q, Q].
Value mixture_transition(Value p, Value q, Value m);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }

} // namespace nrm::diff
