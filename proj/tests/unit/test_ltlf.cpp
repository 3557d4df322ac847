#include <doctest.h>

#include <random>

#include "nrm/errors.hpp"
#include "nrm/ltlf/formula.hpp"
#include "random_machines.hpp"

using namespace nrm::ltlf;
using nrm::automata::MooreMachine;
using nrm::automata::SymbolId;
using Kind = Formula::Kind;

namespace {

// Direct finite-trace semantics, evaluated at position i of x.
bool holds(const Formula &f, const std::vector<std::string> &x, std::size_t i) {
  switch (f.kind) {
  case Kind::True:
    return true;
  case Kind::False:
    return false;
  case Kind::Atom:
    return i < x.size() && x[i] == f.symbol;
  case Kind::Not:
    return !holds(f.children[0], x, i);
  case Kind::And:
    for (const auto &c : f.children)
      if (!holds(c, x, i))
        return false;
    return true;
  case Kind::Or:
    for (const auto &c : f.children)
      if (holds(c, x, i))
        return true;
    return false;
  case Kind::Eventually:
    for (std::size_t j = i; j < x.size(); ++j)
      if (holds(f.children[0], x, j))
        return true;
    return false;
  case Kind::Globally:
    for (std::size_t j = i; j < x.size(); ++j)
      if (!holds(f.children[0], x, j))
        return false;
    return true;
  }
  return false;
}

void check_against_semantics(const Formula &f, const std::vector<std::string> &alphabet,
                             std::size_t max_len) {
  auto dfa = compile_dfa(f, alphabet);
  nrm::testing::for_each_string(alphabet.size(), max_len, [&](const std::vector<SymbolId> &x) {
    if (x.empty())
      return;
    std::vector<std::string> names;
    for (SymbolId p : x)
      names.push_back(alphabet[p]);
    auto run = nrm::automata::run_string(dfa, x);
    REQUIRE(nrm::automata::is_accepting(dfa, run.states.back()) == holds(f, names, 0));
  });
}

// Random formula inside the fragment over the atoms a..d.
Formula random_fragment(std::mt19937_64 &rng) {
  auto atom = [&] { return Formula::atom(std::string(1, static_cast<char>('a' + rng() % 4))); };
  std::vector<Formula> parts;
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) {
    if (rng() % 3 == 0) {
      std::vector<Formula> negs;
      for (int k = 0, m = 1 + static_cast<int>(rng() % 2); k < m; ++k)
        negs.push_back(Formula::negation(atom()));
      parts.push_back(Formula::globally(negs.size() == 1 ? negs[0] : Formula::conjunction(negs)));
    } else {
      // chain of length 1..3, built inside out
      Formula body = atom();
      for (int k = 0, m = static_cast<int>(rng() % 3); k < m; ++k)
        body = Formula::conjunction({atom(), Formula::eventually(body)});
      parts.push_back(Formula::eventually(body));
    }
  }
  return parts.size() == 1 ? parts[0] : Formula::conjunction(parts);
}

} // namespace

TEST_CASE("parse") {
  SUBCASE("visit conjunction") {
    auto f = parse("F(a) & F(b)");
    REQUIRE(f.kind == Kind::And);
    REQUIRE(f.children.size() == 2);
    CHECK(f.children[0] == Formula::eventually(Formula::atom("a")));
    CHECK(f.children[1] == Formula::eventually(Formula::atom("b")));
  }
  SUBCASE("sequenced visit nests eventually") {
    auto f = parse("F(a & F(b))");
    REQUIRE(f.kind == Kind::Eventually);
    const auto &body = f.children[0];
    REQUIRE(body.kind == Kind::And);
    CHECK(body.children[0] == Formula::atom("a"));
    CHECK(body.children[1] == Formula::eventually(Formula::atom("b")));
  }
  SUBCASE("avoidance and whitespace") {
    auto f = parse("  F(a)&F(b)&G( !c )  &G(!d & !e)");
    CHECK(f.children.size() == 4);
    CHECK(f.to_string() == "F(a) & F(b) & G(!c) & G(!d & !e)");
  }
  SUBCASE("positive atom under G is outside the fragment") {
    CHECK_THROWS_AS(parse("G(a)"), nrm::SpecError);
    try {
      parse("F(a) & G(a)");
    } catch (const nrm::SpecError &e) {
      CHECK(std::string(e.what()).find("G(a)") != std::string::npos);
    }
  }
  SUBCASE("other unsupported constructs") {
    CHECK_THROWS_AS(parse("a"), nrm::SpecError);
    CHECK_THROWS_AS(parse("!F(a)"), nrm::SpecError);
    CHECK_THROWS_AS(parse("F(!a)"), nrm::SpecError);
    CHECK_THROWS_AS(parse("F(a & b)"), nrm::SpecError);
    CHECK_THROWS_AS(parse("F(G(!a))"), nrm::SpecError);
  }
  SUBCASE("syntax errors carry a position") {
    CHECK_THROWS_AS(parse(""), nrm::ParseError);
    CHECK_THROWS_AS(parse("F(a | b)"), nrm::ParseError);
    try {
      parse("F(a) & F(b");
      FAIL("expected a parse error");
    } catch (const nrm::ParseError &e) {
      CHECK(e.position() == 10);
    }
    try {
      parse("F(a) # F(b)");
      FAIL("expected a parse error");
    } catch (const nrm::ParseError &e) {
      CHECK(e.position() == 5);
    }
  }
}

TEST_CASE("compile produces the canonical reward machines") {
  const auto alphabet = default_alphabet();
  SUBCASE("F(a) & F(b)") {
    auto m = compile(parse("F(a) & F(b)"), alphabet);
    CHECK(m.num_states() == 4);
    CHECK(m.output_classes() == std::vector<std::string>{"0", "1", "2"});
  }
  SUBCASE("F(a & F(b)) is a three-state chain") {
    auto m = compile(parse("F(a & F(b))"), alphabet);
    CHECK(m.num_states() == 3);
    CHECK(m.output_classes() == std::vector<std::string>{"0", "1", "2"});
    auto run = nrm::automata::run_string(m, std::vector<SymbolId>{1, 0, 2, 1});
    CHECK(run.outputs == std::vector<nrm::automata::ClassId>{0, 1, 1, 2});
  }
  SUBCASE("F(a) & F(b) & G(!c) has a dead state") {
    auto m = compile(parse("F(a) & F(b) & G(!c)"), alphabet);
    CHECK(m.num_states() == 5);
    CHECK(m.output_classes() == std::vector<std::string>{"-1", "0", "1", "2"});
  }
  SUBCASE("atom outside the alphabet") {
    CHECK_THROWS_AS(compile(parse("F(z)"), alphabet), nrm::InputError);
    CHECK_THROWS_AS(compile_via_derivatives(parse("F(z)"), alphabet), nrm::InputError);
  }
}

TEST_CASE("benchmark task machines") {
  const std::size_t expected_states[] = {4, 8, 3, 6, 5, 5, 4, 4};
  for (int t = 1; t <= kNumTasks; ++t) {
    CAPTURE(t);
    auto f = parse(task_formula(t));
    auto m = compile(f, default_alphabet());
    CHECK(m.num_states() == expected_states[t - 1]);
    CHECK(equivalent(m, compile_via_derivatives(f, default_alphabet())));
    check_against_semantics(f, default_alphabet(), 4);
  }
  CHECK_THROWS_AS(task_formula(9), nrm::InputError);
}

TEST_CASE("template and derivative compilation agree on random fragment formulas") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 60; ++i) {
    Formula f = random_fragment(rng);
    CAPTURE(f.to_string());
    check_fragment(f);
    check_against_semantics(f, alphabet, 4);
    if (!nrm::automata::is_accepting(compile_dfa(f, alphabet), 0)) {
      // unsatisfiable conjunctions cannot be shaped by either path
      bool satisfiable = false;
      auto dfa = compile_dfa(f, alphabet);
      for (std::size_t q = 0; q < dfa.num_states(); ++q)
        satisfiable |= nrm::automata::is_accepting(dfa, q);
      if (!satisfiable) {
        CHECK_THROWS_AS(compile(f, alphabet), nrm::SpecError);
        CHECK_THROWS_AS(compile_via_derivatives(f, alphabet), nrm::SpecError);
        continue;
      }
    }
    auto m = compile(f, alphabet);
    REQUIRE(equivalent(m, compile_via_derivatives(f, alphabet)));
    REQUIRE(m == compile_via_derivatives(f, alphabet));
  }
}

TEST_CASE("task-irrelevant symbols only add self-loops") {
  auto f = parse("F(a & F(b)) & G(!c)");
  auto small = compile(f, {"a", "b", "c"});
  auto large = compile(f, {"a", "b", "c", "x", "y"});
  REQUIRE(small.num_states() == large.num_states());
  CHECK(small.output_classes() == large.output_classes());
  for (std::size_t q = 0; q < large.num_states(); ++q) {
    CHECK(large.next(q, 3) == q);
    CHECK(large.next(q, 4) == q);
    CHECK(small.output(q) == large.output(q));
    for (SymbolId p = 0; p < 3; ++p)
      CHECK(small.next(q, p) == large.next(q, p));
  }
}

TEST_CASE("compile is deterministic") {
  for (int t = 1; t <= kNumTasks; ++t) {
    auto a = serialize(compile(parse(task_formula(t)), default_alphabet()));
    auto b = serialize(compile(parse(task_formula(t)), default_alphabet()));
    CHECK(a == b);
  }
}

TEST_CASE("derivatives") {
  auto f = parse("F(a & F(b))");
  auto after_a = derive(normalize(f), "a");
  CHECK_FALSE(accepts_empty(after_a));
  CHECK(derive(after_a, "b") == Formula::truth());
  CHECK(derive(normalize(parse("G(!c)")), "c") == Formula::falsity());
  CHECK(accepts_empty(normalize(parse("G(!c)"))));
  CHECK(normalize(Formula::conjunction({Formula::atom("b"), Formula::truth(), Formula::atom("a"),
                                        Formula::atom("b")})) ==
        Formula::conjunction({Formula::atom("a"), Formula::atom("b")}));
}
