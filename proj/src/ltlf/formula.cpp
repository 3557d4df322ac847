#include "nrm/ltlf/formula.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "nrm/errors.hpp"

namespace nrm::ltlf {

using automata::MooreMachine;
using automata::StateId;
using Kind = Formula::Kind;

Formula Formula::negation(Formula f) { return {Kind::Not, {}, {std::move(f)}}; }
Formula Formula::conjunction(std::vector<Formula> fs) { return {Kind::And, {}, std::move(fs)}; }
Formula Formula::disjunction(std::vector<Formula> fs) { return {Kind::Or, {}, std::move(fs)}; }
Formula Formula::eventually(Formula f) { return {Kind::Eventually, {}, {std::move(f)}}; }
Formula Formula::globally(Formula f) { return {Kind::Globally, {}, {std::move(f)}}; }

std::string Formula::to_string() const {
  auto join = [this](const char *sep) {
    std::string s;
    for (std::size_t i = 0; i < children.size(); ++i) {
      if (i)
        s += sep;
      const Formula &c = children[i];
      bool wrap = (c.kind == Kind::And || c.kind == Kind::Or) && c.kind != kind;
      s += wrap ? "(" + c.to_string() + ")" : c.to_string();
    }
    return s;
  };
  switch (kind) {
  case Kind::False:
    return "false";
  case Kind::True:
    return "true";
  case Kind::Atom:
    return symbol;
  case Kind::Not:
    return "!" + children[0].to_string();
  case Kind::And:
    return join(" & ");
  case Kind::Or:
    return join(" | ");
  case Kind::Eventually:
    return "F(" + children[0].to_string() + ")";
  case Kind::Globally:
    return "G(" + children[0].to_string() + ")";
  }
  return {};
}

int compare(const Formula &a, const Formula &b) {
  if (a.kind != b.kind)
    return a.kind < b.kind ? -1 : 1;
  if (int c = a.symbol.compare(b.symbol); c != 0)
    return c < 0 ? -1 : 1;
  const std::size_t n = std::min(a.children.size(), b.children.size());
  for (std::size_t i = 0; i < n; ++i)
    if (int c = compare(a.children[i], b.children[i]); c != 0)
      return c;
  if (a.children.size() != b.children.size())
    return a.children.size() < b.children.size() ? -1 : 1;
  return 0;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Formula parse_all() {
    Formula f = conjunction();
    skip_space();
    if (pos_ != text_.size())
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return f;
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size())
        throw ParseError(std::string("expected '") + c + "' before end of input", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }
  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  Formula conjunction() {
    std::vector<Formula> parts;
    parts.push_back(unary());
    while (accept('&'))
      parts.push_back(unary());
    if (parts.size() == 1)
      return std::move(parts[0]);
    std::vector<Formula> flat;
    for (auto &p : parts) {
      if (p.kind == Kind::And)
        for (auto &c : p.children)
          flat.push_back(std::move(c));
      else
        flat.push_back(std::move(p));
    }
    return Formula::conjunction(std::move(flat));
  }

  Formula unary() {
    skip_space();
    if (pos_ >= text_.size())
      throw ParseError("unexpected end of formula", pos_);
    if (accept('!'))
      return Formula::negation(unary());
    if (accept('(')) {
      Formula f = conjunction();
      expect(')');
      return f;
    }
    if (!ident_start(text_[pos_]))
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_]))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    const std::size_t after = pos_;
    if ((name == "F" || name == "G") && accept('(')) {
      Formula body = conjunction();
      expect(')');
      return name == "F" ? Formula::eventually(std::move(body))
                         : Formula::globally(std::move(body));
    }
    pos_ = after;
    return Formula::atom(std::move(name));
  }
};

[[noreturn]] void unsupported(const Formula &node, const std::string &why) {
  throw SpecError("unsupported construct '" + node.to_string() + "': " + why);
}

bool is_negated_atom(const Formula &f) {
  return f.kind == Kind::Not && f.children[0].kind == Kind::Atom;
}

// Body of an F: an atom, a nested F chain, or one atom conjoined with one
// nested F chain.
void check_visit_body(const Formula &body) {
  switch (body.kind) {
  case Kind::Atom:
    return;
  case Kind::Eventually:
    check_visit_body(body.children[0]);
    return;
  case Kind::And: {
    std::size_t n_atoms = 0, n_chains = 0;
    for (const auto &c : body.children) {
      if (c.kind == Kind::Atom)
        ++n_atoms;
      else if (c.kind == Kind::Eventually) {
        ++n_chains;
        check_visit_body(c.children[0]);
      } else {
        unsupported(c, "only atoms and F chains may appear inside F");
      }
    }
    if (n_atoms != 1 || n_chains != 1)
      unsupported(body, "F body must be one atom conjoined with one F chain");
    return;
  }
  default:
    unsupported(body, "only atoms and F chains may appear inside F");
  }
}

void check_pattern(const Formula &f) {
  if (f.kind == Kind::Eventually) {
    check_visit_body(f.children[0]);
  } else if (f.kind == Kind::Globally) {
    const Formula &body = f.children[0];
    if (is_negated_atom(body))
      return;
    if (body.kind == Kind::And &&
        std::all_of(body.children.begin(), body.children.end(), is_negated_atom))
      return;
    unsupported(f, "G body must be a conjunction of negated atoms");
  } else if (f.kind == Kind::Not) {
    unsupported(f, "negation is only allowed directly under G");
  } else {
    unsupported(f, "top-level conjuncts must be F(...) or G(...)");
  }
}

// Sequence p1..pn of a (sequenced) visit pattern.
void collect_chain(const Formula &body, std::vector<std::string> &out) {
  switch (body.kind) {
  case Kind::Atom:
    out.push_back(body.symbol);
    break;
  case Kind::Eventually:
    collect_chain(body.children[0], out);
    break;
  case Kind::And: {
    const Formula *nested = nullptr;
    for (const auto &c : body.children) {
      if (c.kind == Kind::Atom)
        out.push_back(c.symbol);
      else
        nested = &c;
    }
    collect_chain(nested->children[0], out);
    break;
  }
  default:
    break;
  }
}

void collect_atoms(const Formula &f, std::vector<std::string> &out) {
  if (f.kind == Kind::Atom) {
    if (std::find(out.begin(), out.end(), f.symbol) == out.end())
      out.push_back(f.symbol);
    return;
  }
  for (const auto &c : f.children)
    collect_atoms(c, out);
}

void require_atoms_in_alphabet(const Formula &f,
                               const std::vector<std::string> &alphabet) {
  for (const auto &a : atoms(f))
    if (std::find(alphabet.begin(), alphabet.end(), a) == alphabet.end())
      throw InputError("atom '" + a + "' is not in the alphabet");
}

// Chain template: state i means p1..pi have been seen in order. Reading s
// advances through every consecutive required symbol equal to s, since one
// position can satisfy several equal atoms of the chain.
MooreMachine chain_dfa(const std::vector<std::string> &seq,
                       const std::vector<std::string> &alphabet) {
  const std::size_t n = seq.size();
  std::vector<StateId> delta((n + 1) * alphabet.size());
  std::vector<bool> accepting(n + 1, false);
  accepting[n] = true;
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t p = 0; p < alphabet.size(); ++p) {
      std::size_t j = i;
      while (j < n && seq[j] == alphabet[p])
        ++j;
      delta[i * alphabet.size() + p] = j;
    }
  return automata::make_dfa(alphabet, n + 1, 0, std::move(delta), accepting);
}

// Avoidance template: 0 = alive (accepting), 1 = dead.
MooreMachine avoid_dfa(const std::vector<std::string> &forbidden,
                       const std::vector<std::string> &alphabet) {
  const std::size_t np = alphabet.size();
  std::vector<StateId> delta(2 * np, 1);
  for (std::size_t p = 0; p < np; ++p)
    if (std::find(forbidden.begin(), forbidden.end(), alphabet[p]) == forbidden.end())
      delta[p] = 0;
  return automata::make_dfa(alphabet, 2, 0, std::move(delta), {true, false});
}

void flatten_into(Kind kind, Formula f, std::vector<Formula> &out) {
  if (f.kind == kind) {
    for (auto &c : f.children)
      flatten_into(kind, std::move(c), out);
  } else {
    out.push_back(std::move(f));
  }
}

} // namespace

Formula parse(std::string_view text) {
  Formula f = Parser(text).parse_all();
  check_fragment(f);
  return f;
}

void check_fragment(const Formula &f) {
  if (f.kind == Kind::And) {
    for (const auto &c : f.children)
      check_pattern(c);
  } else {
    check_pattern(f);
  }
}

std::vector<std::string> atoms(const Formula &f) {
  std::vector<std::string> out;
  collect_atoms(f, out);
  return out;
}

MooreMachine compile_dfa(const Formula &f, const std::vector<std::string> &alphabet) {
  check_fragment(f);
  require_atoms_in_alphabet(f, alphabet);
  std::vector<Formula> conjuncts;
  if (f.kind == Kind::And)
    conjuncts = f.children;
  else
    conjuncts.push_back(f);

  // Start from the trivially-true machine.
  MooreMachine acc = automata::make_dfa(
      alphabet, 1, 0, std::vector<StateId>(alphabet.size(), 0), {true});
  for (const auto &c : conjuncts) {
    MooreMachine part = [&] {
      if (c.kind == Kind::Eventually) {
        std::vector<std::string> seq;
        collect_chain(c.children[0], seq);
        return chain_dfa(seq, alphabet);
      }
      std::vector<std::string> forbidden;
      const Formula &body = c.children[0];
      if (body.kind == Kind::Not)
        forbidden.push_back(body.children[0].symbol);
      else
        for (const auto &n : body.children)
          forbidden.push_back(n.children[0].symbol);
      return avoid_dfa(forbidden, alphabet);
    }();
    acc = automata::minimize(automata::product_conjunction(acc, part));
  }
  return acc;
}

MooreMachine compile(const Formula &f, const std::vector<std::string> &alphabet) {
  return automata::minimize(automata::shape_rewards(compile_dfa(f, alphabet)));
}

// ---------------------------------------------------------------------------
// Derivatives

Formula normalize(Formula f) {
  switch (f.kind) {
  case Kind::False:
  case Kind::True:
  case Kind::Atom:
    return f;
  case Kind::Not: {
    Formula inner = normalize(std::move(f.children[0]));
    if (inner.kind == Kind::True)
      return Formula::falsity();
    if (inner.kind == Kind::False)
      return Formula::truth();
    if (inner.kind == Kind::Not)
      return std::move(inner.children[0]);
    return Formula::negation(std::move(inner));
  }
  case Kind::Eventually:
  case Kind::Globally: {
    Formula inner = normalize(std::move(f.children[0]));
    if (inner.kind == Kind::True || inner.kind == Kind::False)
      return inner;
    if (inner.kind == f.kind) // F F x = F x, G G x = G x
      return inner;
    return {f.kind, {}, {std::move(inner)}};
  }
  case Kind::And:
  case Kind::Or: {
    const Kind absorbing = f.kind == Kind::And ? Kind::False : Kind::True;
    const Kind neutral = f.kind == Kind::And ? Kind::True : Kind::False;
    std::vector<Formula> flat;
    for (auto &c : f.children)
      flatten_into(f.kind, normalize(std::move(c)), flat);
    std::vector<Formula> kept;
    for (auto &c : flat) {
      if (c.kind == absorbing)
        return c;
      if (c.kind != neutral)
        kept.push_back(std::move(c));
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    if (kept.empty())
      return {neutral, {}, {}};
    if (kept.size() == 1)
      return std::move(kept[0]);
    return {f.kind, {}, std::move(kept)};
  }
  }
  return f;
}

namespace {

Formula progress(const Formula &f, std::string_view symbol) {
  switch (f.kind) {
  case Kind::False:
  case Kind::True:
    return f;
  case Kind::Atom:
    return f.symbol == symbol ? Formula::truth() : Formula::falsity();
  case Kind::Not:
    return Formula::negation(progress(f.children[0], symbol));
  case Kind::And:
  case Kind::Or: {
    std::vector<Formula> parts;
    for (const auto &c : f.children)
      parts.push_back(progress(c, symbol));
    return {f.kind, {}, std::move(parts)};
  }
  case Kind::Eventually: // F x = x | X F x
    return Formula::disjunction({progress(f.children[0], symbol), f});
  case Kind::Globally: // G x = x & X G x (weak next at the end)
    return Formula::conjunction({progress(f.children[0], symbol), f});
  }
  return f;
}

} // namespace

Formula derive(const Formula &f, std::string_view symbol) {
  return normalize(progress(f, symbol));
}

bool accepts_empty(const Formula &f) {
  switch (f.kind) {
  case Kind::False:
  case Kind::Atom:
  case Kind::Eventually:
    return false;
  case Kind::True:
  case Kind::Globally:
    return true;
  case Kind::Not:
    return !accepts_empty(f.children[0]);
  case Kind::And:
    return std::all_of(f.children.begin(), f.children.end(), accepts_empty);
  case Kind::Or:
    return std::any_of(f.children.begin(), f.children.end(), accepts_empty);
  }
  return false;
}

MooreMachine compile_via_derivatives(const Formula &f,
                                     const std::vector<std::string> &alphabet) {
  check_fragment(f);
  require_atoms_in_alphabet(f, alphabet);
  constexpr std::size_t kMaxStates = 100000;
  std::map<Formula, StateId> ids;
  std::vector<Formula> states;
  auto intern = [&](Formula g) {
    auto it = ids.find(g);
    if (it != ids.end())
      return it->second;
    if (states.size() >= kMaxStates)
      throw SpecError("derivative construction exceeded state limit");
    StateId id = states.size();
    ids.emplace(g, id);
    states.push_back(std::move(g));
    return id;
  };
  intern(normalize(f));
  std::vector<StateId> delta;
  for (std::size_t i = 0; i < states.size(); ++i)
    for (const auto &p : alphabet) {
      Formula next = derive(states[i], p);
      delta.push_back(intern(std::move(next)));
    }
  std::vector<bool> accepting;
  for (const auto &s : states)
    accepting.push_back(accepts_empty(s));
  MooreMachine dfa = automata::make_dfa(alphabet, states.size(), 0, std::move(delta), accepting);
  return automata::minimize(automata::shape_rewards(automata::minimize(dfa)));
}

std::string task_formula(int task_id) {
  switch (task_id) {
  case 1:
    return "F(a) & F(b)";
  case 2:
    return "F(a) & F(b) & F(c)";
  case 3:
    return "F(a & F(b))";
  case 4:
    return "F(a & F(b)) & F(c)";
  case 5:
    return "F(a) & F(b) & G(!c)";
  case 6:
    return "F(a) & F(b) & G(!c) & G(!d)";
  case 7:
    return "F(a & F(b)) & G(!c)";
  case 8:
    return "F(a & F(b)) & G(!c) & G(!d)";
  default:
    throw InputError("task id must be in 1..8, got " + std::to_string(task_id));
  }
}

std::vector<std::string> default_alphabet() { return {"a", "b", "c", "d", "e"}; }

} // namespace nrm::ltlf
