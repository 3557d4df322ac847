#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "nrm/automata/moore.hpp"

namespace nrm::urs {

using automata::MooreMachine;
using automata::StateId;
using automata::SymbolId;
using automata::SymbolMap;

/// All |P|^|P| maps: the identity first, then every other map in
/// lexicographic order of its image vector.
std::vector<SymbolMap> enumerate_maps(std::size_t num_symbols);
/// Streaming form of enumerate_maps; stops early when fn returns false.
void for_each_map(std::size_t num_symbols, const std::function<bool(const SymbolMap &)> &fn);

/// True iff alpha keeps the output sequence of every string in `dataset`.
bool is_working(const MooreMachine &m, const SymbolMap &alpha,
                const std::vector<std::vector<SymbolId>> &dataset);

/// Frontier of one candidate: reached state pairs (plain run, relabelled run),
/// with one representative string per pair when diagnostics are requested.
struct CandidateDataset {
  std::vector<std::pair<StateId, StateId>> pairs;
  std::vector<std::vector<SymbolId>> strings;
};

struct SearchOptions {
  /// Do not extend strings whose two runs both sit in absorbing states.
  bool absorbing_skip = true;
  /// Do not keep an extension that leaves both runs where they were.
  bool self_loop_skip = true;
  /// Never revisit a state pair already explored for this candidate.
  bool dedupe_visited = true;
  /// Keep a representative string per frontier pair.
  bool keep_strings = false;
  unsigned jobs = 1;
};

struct CandidateResult {
  SymbolMap alpha;
  bool survived = false;
  std::size_t iterations = 0;
  std::size_t peak_dataset = 0;
};

struct UrsReport {
  /// One entry per map, in enumerate_maps order.
  std::vector<CandidateResult> candidates;
  std::vector<SymbolMap> surviving;
  double seconds = 0.0;
  std::size_t max_iterations = 0;
  std::size_t peak_dataset = 0;

  [[nodiscard]] std::size_t count() const noexcept { return surviving.size(); }
};

/// Runs the dataset-growing search for a single candidate map.
/// `last_frontier`, when given, receives the final non-empty dataset.
CandidateResult check_candidate(const MooreMachine &m, const SymbolMap &alpha,
                                const SearchOptions &options = {},
                                CandidateDataset *last_frontier = nullptr);

/// Unremovable reasoning shortcuts of m: every map whose relabelling is
/// output-equivalent to m, identity included.
UrsReport find_urs(const MooreMachine &m, const SearchOptions &options = {});

/// Brute force: keep the maps alpha with equivalent(m, relabel(m, alpha)).
std::vector<SymbolMap> urs_oracle_exact(const MooreMachine &m, unsigned jobs = 1);

/// Maps that work on every string of length 1..max_len. Evaluates the full
/// conjunction for each map, one string length at a time over the set of
/// reachable state pairs (strings reaching the same pair are interchangeable).
std::vector<SymbolMap> urs_oracle_bounded(const MooreMachine &m, std::size_t max_len,
                                          unsigned jobs = 1);
bool works_up_to(const MooreMachine &m, const SymbolMap &alpha, std::size_t max_len);

} // namespace nrm::urs
