#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nrm/automata/moore.hpp"

namespace nrm::ltlf {

/// LTLf syntax tree. Parsed formulas only use Atom, Not, And, Eventually and
/// Globally; True, False and Or appear in residuals built while deriving.
struct Formula {
  enum class Kind { False, True, Atom, Not, And, Or, Eventually, Globally };

  Kind kind = Kind::True;
  std::string symbol;
  std::vector<Formula> children;

  static Formula truth() { return {Kind::True, {}, {}}; }
  static Formula falsity() { return {Kind::False, {}, {}}; }
  static Formula atom(std::string name) { return {Kind::Atom, std::move(name), {}}; }
  static Formula negation(Formula f);
  static Formula conjunction(std::vector<Formula> fs);
  static Formula disjunction(std::vector<Formula> fs);
  static Formula eventually(Formula f);
  static Formula globally(Formula f);

  /// Concrete syntax accepted by parse(), e.g. "F(a & F(b)) & G(!c)".
  [[nodiscard]] std::string to_string() const;
};

/// Total order used to normalize residuals: node kind, then symbol, then
/// children lexicographically.
int compare(const Formula &a, const Formula &b);
inline bool operator==(const Formula &a, const Formula &b) { return compare(a, b) == 0; }
inline bool operator<(const Formula &a, const Formula &b) { return compare(a, b) < 0; }

/// Parses the supported fragment: conjunctions of
///   Visit            F(p)
///   Sequenced visit  F(p1 & F(p2 & ... F(pn)))
///   Global avoidance G(!p1 & !p2 ...)
/// Tokens are `F(`, `G(`, `&`, `!`, parentheses and identifiers.
/// Throws ParseError on syntax errors and SpecError for constructs outside the
/// fragment.
Formula parse(std::string_view text);

/// Throws SpecError naming the first node outside the fragment.
void check_fragment(const Formula &f);

/// Atoms mentioned by the formula, in order of first appearance.
std::vector<std::string> atoms(const Formula &f);

/// Boolean machine recognising the formula, built from per-pattern templates
/// and minimized.
automata::MooreMachine compile_dfa(const Formula &f,
                                   const std::vector<std::string> &alphabet);

/// Canonical reward machine: template DFA, product, minimization, then
/// distance-to-acceptance reward levels.
automata::MooreMachine compile(const Formula &f,
                               const std::vector<std::string> &alphabet);

/// Independent construction through symbol-wise progression: states are
/// normalized residual formulas. Used to cross-check compile().
automata::MooreMachine compile_via_derivatives(const Formula &f,
                                               const std::vector<std::string> &alphabet);

/// Residual of `f` after reading `symbol`, normalized.
Formula derive(const Formula &f, std::string_view symbol);
/// Whether a residual is satisfied by the empty remainder of the trace.
bool accepts_empty(const Formula &f);
/// Flattens and sorts conjunctions/disjunctions, absorbs constants, dedupes.
Formula normalize(Formula f);

/// Benchmark tasks 1..8 (two classes of visit / sequenced-visit / avoidance
/// conjunctions) over the alphabet {a,b,c,d,e}.
std::string task_formula(int task_id);
inline constexpr int kNumTasks = 8;
std::vector<std::string> default_alphabet();

} // namespace nrm::ltlf
