#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nrm::automata {

using StateId = std::size_t;
using SymbolId = std::size_t;
using ClassId = std::size_t;

/// Output labels used by boolean machines (DFAs viewed as Moore machines).
inline constexpr std::string_view kReject = "reject";
inline constexpr std::string_view kAccept = "accept";

/// Deterministic Moore machine over a mutually exclusive symbol alphabet:
/// every time step consumes exactly one symbol.
///
/// States are the dense range [0, num_states). The transition table is stored
/// row-major, one row of |alphabet| successors per state. Values are immutable
/// once constructed; the constructor rejects partial tables, dangling indices
/// and duplicate names.
class MooreMachine {
public:
  MooreMachine(std::vector<std::string> alphabet, std::size_t num_states,
               StateId initial, std::vector<StateId> transitions,
               std::vector<ClassId> outputs,
               std::vector<std::string> output_classes);

  [[nodiscard]] const std::vector<std::string> &alphabet() const noexcept {
    return alphabet_;
  }
  [[nodiscard]] std::size_t num_symbols() const noexcept {
    return alphabet_.size();
  }
  [[nodiscard]] std::size_t num_states() const noexcept { return num_states_; }
  [[nodiscard]] StateId initial() const noexcept { return initial_; }
  [[nodiscard]] StateId next(StateId q, SymbolId p) const noexcept {
    return transitions_[q * alphabet_.size() + p];
  }
  [[nodiscard]] ClassId output(StateId q) const noexcept {
    return outputs_[q];
  }
  [[nodiscard]] const std::vector<std::string> &output_classes() const noexcept {
    return output_classes_;
  }
  [[nodiscard]] std::span<const StateId> transitions() const noexcept {
    return transitions_;
  }
  [[nodiscard]] std::span<const ClassId> outputs() const noexcept {
    return outputs_;
  }
  [[nodiscard]] std::optional<SymbolId> symbol_index(std::string_view name) const;
  [[nodiscard]] std::optional<ClassId> class_index(std::string_view label) const;

  bool operator==(const MooreMachine &) const = default;

private:
  std::vector<std::string> alphabet_;
  std::size_t num_states_;
  StateId initial_;
  std::vector<StateId> transitions_;
  std::vector<ClassId> outputs_;
  std::vector<std::string> output_classes_;
};

/// A total renaming of symbols: symbol p is read as image[p].
struct SymbolMap {
  std::vector<SymbolId> image;

  static SymbolMap identity(std::size_t num_symbols);
  [[nodiscard]] bool is_identity() const noexcept;
  [[nodiscard]] std::size_t size() const noexcept { return image.size(); }
  [[nodiscard]] SymbolId operator()(SymbolId p) const { return image.at(p); }
  /// (this ∘ inner)(p) = this(inner(p)).
  [[nodiscard]] SymbolMap compose(const SymbolMap &inner) const;
  /// Comma-separated image, e.g. "1,0,2,2,4".
  [[nodiscard]] std::string to_string() const;
  auto operator<=>(const SymbolMap &) const = default;
};

/// States q(0)..q(T) and outputs o(1)..o(T) produced while reading a string.
struct Run {
  std::vector<StateId> states;
  std::vector<ClassId> outputs;
};

/// Reads `symbols` from the initial state. Throws InputError on an
/// out-of-range symbol.
Run run_string(const MooreMachine &m, std::span<const SymbolId> symbols);

/// Resolves symbol names against the machine's alphabet.
std::vector<SymbolId> to_symbols(const MooreMachine &m,
                                 std::span<const std::string> names);

/// The machine that reads p as alpha(p): next'(q, p) = next(q, alpha(p)).
MooreMachine relabel(const MooreMachine &m, const SymbolMap &alpha);

/// True iff both machines emit the same output sequence on every string.
/// Requires identical alphabets; output classes are matched by label.
bool equivalent(const MooreMachine &a, const MooreMachine &b);

/// Canonical minimal machine: unreachable states dropped, output-equivalent
/// states merged, states renumbered in BFS order from the initial state.
MooreMachine minimize(const MooreMachine &m);

/// Renumbers reachable states in BFS order (symbols in alphabet order) without
/// merging anything.
MooreMachine canonicalize(const MooreMachine &m);

/// Reachable synchronized product of two boolean machines; a pair accepts
/// iff both components accept.
MooreMachine product_conjunction(const MooreMachine &a, const MooreMachine &b);

[[nodiscard]] bool is_absorbing(const MooreMachine &m, StateId q);
/// Sorted list of states that loop to themselves on every symbol.
std::vector<StateId> absorbing_states(const MooreMachine &m);

/// Builds a boolean machine with output classes {reject, accept}.
MooreMachine make_dfa(std::vector<std::string> alphabet, std::size_t num_states,
                      StateId initial, std::vector<StateId> transitions,
                      const std::vector<bool> &accepting);

[[nodiscard]] bool is_boolean(const MooreMachine &m);
[[nodiscard]] bool is_accepting(const MooreMachine &m, StateId q);

/// Distance-to-acceptance reward levels.
///
/// A state at BFS distance d from the nearest accepting state gets level
/// Dmax - d, where Dmax is the largest finite distance. States that cannot
/// reach acceptance share the dedicated level -1. Output classes are the
/// distinct levels in ascending order, labelled by their decimal value.
/// Throws SpecError when no state accepts.
MooreMachine shape_rewards(const MooreMachine &dfa);

/// Integer level of every output class of a shaped machine.
std::vector<int> class_levels(const MooreMachine &m);
/// Level of the state's output class.
[[nodiscard]] int state_level(const MooreMachine &m, StateId q);

std::string serialize(const MooreMachine &m);
/// Inverse of serialize. Throws ParseError with the 1-based line number.
MooreMachine deserialize(std::string_view text);
std::string export_dot(const MooreMachine &m);

} // namespace nrm::automata
