#include "nrm/neural/grounder.hpp"

#include <algorithm>

#include "nrm/errors.hpp"

namespace nrm::neural {

Tensor stack_states(const std::vector<std::vector<double>> &states) {
  if (states.empty())
    throw InputError("no states to stack");
  const std::size_t d = states.front().size();
  std::vector<double> data;
  data.reserve(states.size() * d);
  for (const auto &s : states) {
    if (s.size() != d)
      throw InputError("state encodings differ in size");
    data.insert(data.end(), s.begin(), s.end());
  }
  return Tensor({states.size(), d}, std::move(data));
}

std::vector<SymbolId> Grounder::predict(const Tensor &states) {
  Graph g;
  const Tensor &p = ground(g, states).value();
  std::vector<SymbolId> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double *row = p.data() + r * p.cols();
    out[r] = static_cast<SymbolId>(std::max_element(row, row + p.cols()) - row);
  }
  return out;
}

std::vector<double> Grounder::probabilities(std::span<const double> state) {
  Graph g;
  return ground(g, Tensor({1, state.size()}, {state.begin(), state.end()})).value().values();
}

NeuralGrounder::NeuralGrounder(std::size_t input_dim, std::size_t num_symbols,
                               std::mt19937_64 &rng, std::size_t hidden, double dropout)
    : net_(diff::make_grounder(input_dim, num_symbols, rng, hidden, dropout)) {}

Value NeuralGrounder::ground(Graph &g, const Tensor &states, std::mt19937_64 *dropout_rng) {
  return net_.forward(g, g.constant(states), dropout_rng);
}

OracleGrounder::OracleGrounder(std::size_t input_dim, std::size_t num_symbols, Labeler label)
    : input_dim_(input_dim), num_symbols_(num_symbols), label_(std::move(label)) {}

OracleGrounder OracleGrounder::one_hot(std::size_t num_symbols) {
  return OracleGrounder(num_symbols, num_symbols, [](std::span<const double> s) {
    return static_cast<SymbolId>(std::max_element(s.begin(), s.end()) - s.begin());
  });
}

Value OracleGrounder::ground(Graph &g, const Tensor &states, std::mt19937_64 *) {
  if (states.rank() != 2 || states.cols() != input_dim_)
    throw InputError("grounder input of shape " + diff::shape_string(states.shape()));
  Tensor out({states.rows(), num_symbols_});
  for (std::size_t r = 0; r < states.rows(); ++r) {
    const SymbolId p = label_({states.data() + r * input_dim_, input_dim_});
    if (p >= num_symbols_)
      throw InputError("labeler returned an unknown symbol");
    out.at(r, p) = 1.0;
  }
  return g.constant(std::move(out));
}

} // namespace nrm::neural
