#include "nrm/automata/moore.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "nrm/errors.hpp"

namespace nrm::automata {

namespace {

bool valid_name(const std::string &name) {
  return !name.empty() &&
         std::none_of(name.begin(), name.end(), [](unsigned char c) {
           return std::isspace(c) || c == ',' || c == '"';
         });
}

void require_same_alphabet(const MooreMachine &a, const MooreMachine &b) {
  if (a.alphabet() != b.alphabet())
    throw InputError("machines are defined over different alphabets");
}

std::uint64_t pair_key(StateId a, StateId b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

} // namespace

MooreMachine::MooreMachine(std::vector<std::string> alphabet,
                           std::size_t num_states, StateId initial,
                           std::vector<StateId> transitions,
                           std::vector<ClassId> outputs,
                           std::vector<std::string> output_classes)
    : alphabet_(std::move(alphabet)), num_states_(num_states),
      initial_(initial), transitions_(std::move(transitions)),
      outputs_(std::move(outputs)), output_classes_(std::move(output_classes)) {
  if (alphabet_.empty())
    throw InputError("alphabet must not be empty");
  if (num_states_ == 0)
    throw InputError("machine needs at least one state");
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    if (!valid_name(alphabet_[i]))
      throw InputError("invalid symbol name '" + alphabet_[i] + "'");
    for (std::size_t j = 0; j < i; ++j)
      if (alphabet_[i] == alphabet_[j])
        throw InputError("duplicate symbol '" + alphabet_[i] + "'");
  }
  for (std::size_t i = 0; i < output_classes_.size(); ++i) {
    if (!valid_name(output_classes_[i]))
      throw InputError("invalid output class '" + output_classes_[i] + "'");
    for (std::size_t j = 0; j < i; ++j)
      if (output_classes_[i] == output_classes_[j])
        throw InputError("duplicate output class '" + output_classes_[i] + "'");
  }
  if (initial_ >= num_states_)
    throw InputError("initial state out of range");
  if (transitions_.size() != num_states_ * alphabet_.size())
    throw InputError("transition table is not total");
  for (StateId t : transitions_)
    if (t >= num_states_)
      throw InputError("transition target out of range");
  if (outputs_.size() != num_states_)
    throw InputError("output function is not total");
  for (ClassId c : outputs_)
    if (c >= output_classes_.size())
      throw InputError("output class index out of range");
}

std::optional<SymbolId> MooreMachine::symbol_index(std::string_view name) const {
  for (std::size_t i = 0; i < alphabet_.size(); ++i)
    if (alphabet_[i] == name)
      return i;
  return std::nullopt;
}

std::optional<ClassId> MooreMachine::class_index(std::string_view label) const {
  for (std::size_t i = 0; i < output_classes_.size(); ++i)
    if (output_classes_[i] == label)
      return i;
  return std::nullopt;
}

SymbolMap SymbolMap::identity(std::size_t num_symbols) {
  SymbolMap alpha;
  alpha.image.resize(num_symbols);
  std::iota(alpha.image.begin(), alpha.image.end(), SymbolId{0});
  return alpha;
}

bool SymbolMap::is_identity() const noexcept {
  for (std::size_t i = 0; i < image.size(); ++i)
    if (image[i] != i)
      return false;
  return true;
}

SymbolMap SymbolMap::compose(const SymbolMap &inner) const {
  SymbolMap out;
  out.image.reserve(inner.size());
  for (SymbolId p : inner.image)
    out.image.push_back(image.at(p));
  return out;
}

std::string SymbolMap::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (i)
      s += ',';
    s += std::to_string(image[i]);
  }
  return s;
}

Run run_string(const MooreMachine &m, std::span<const SymbolId> symbols) {
  Run run;
  run.states.reserve(symbols.size() + 1);
  run.outputs.reserve(symbols.size());
  StateId q = m.initial();
  run.states.push_back(q);
  for (SymbolId p : symbols) {
    if (p >= m.num_symbols())
      throw InputError("symbol index " + std::to_string(p) + " out of range");
    q = m.next(q, p);
    run.states.push_back(q);
    run.outputs.push_back(m.output(q));
  }
  return run;
}

std::vector<SymbolId> to_symbols(const MooreMachine &m,
                                 std::span<const std::string> names) {
  std::vector<SymbolId> out;
  out.reserve(names.size());
  for (const auto &name : names) {
    auto idx = m.symbol_index(name);
    if (!idx)
      throw InputError("unknown symbol '" + name + "'");
    out.push_back(*idx);
  }
  return out;
}

MooreMachine relabel(const MooreMachine &m, const SymbolMap &alpha) {
  const std::size_t np = m.num_symbols();
  if (alpha.size() != np)
    throw InputError("symbol map is not total on the alphabet");
  for (SymbolId p : alpha.image)
    if (p >= np)
      throw InputError("symbol map image out of range");
  std::vector<StateId> delta(m.num_states() * np);
  for (StateId q = 0; q < m.num_states(); ++q)
    for (SymbolId p = 0; p < np; ++p)
      delta[q * np + p] = m.next(q, alpha.image[p]);
  return MooreMachine(m.alphabet(), m.num_states(), m.initial(), std::move(delta),
                      {m.outputs().begin(), m.outputs().end()}, m.output_classes());
}

bool equivalent(const MooreMachine &a, const MooreMachine &b) {
  require_same_alphabet(a, b);
  // Translate b's class indices into a's by label; a label missing from a can
  // only match nothing.
  const std::size_t missing = a.output_classes().size();
  std::vector<ClassId> b_to_a(b.output_classes().size(), missing);
  for (std::size_t c = 0; c < b.output_classes().size(); ++c)
    if (auto idx = a.class_index(b.output_classes()[c]))
      b_to_a[c] = *idx;

  std::vector<char> seen(a.num_states() * b.num_states(), 0);
  std::queue<std::pair<StateId, StateId>> work;
  seen[a.initial() * b.num_states() + b.initial()] = 1;
  work.emplace(a.initial(), b.initial());
  while (!work.empty()) {
    auto [qa, qb] = work.front();
    work.pop();
    for (SymbolId p = 0; p < a.num_symbols(); ++p) {
      StateId na = a.next(qa, p);
      StateId nb = b.next(qb, p);
      if (a.output(na) != b_to_a[b.output(nb)])
        return false;
      char &flag = seen[na * b.num_states() + nb];
      if (!flag) {
        flag = 1;
        work.emplace(na, nb);
      }
    }
  }
  return true;
}

MooreMachine canonicalize(const MooreMachine &m) {
  const std::size_t np = m.num_symbols();
  constexpr StateId unset = static_cast<StateId>(-1);
  std::vector<StateId> order;
  std::vector<StateId> renumber(m.num_states(), unset);
  renumber[m.initial()] = 0;
  order.push_back(m.initial());
  for (std::size_t head = 0; head < order.size(); ++head) {
    StateId q = order[head];
    for (SymbolId p = 0; p < np; ++p) {
      StateId t = m.next(q, p);
      if (renumber[t] == unset) {
        renumber[t] = order.size();
        order.push_back(t);
      }
    }
  }
  std::vector<StateId> delta(order.size() * np);
  std::vector<ClassId> outputs(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    outputs[i] = m.output(order[i]);
    for (SymbolId p = 0; p < np; ++p)
      delta[i * np + p] = renumber[m.next(order[i], p)];
  }
  return MooreMachine(m.alphabet(), order.size(), 0, std::move(delta),
                      std::move(outputs), m.output_classes());
}

MooreMachine minimize(const MooreMachine &input) {
  // Moore-style partition refinement seeded by output classes.
  const MooreMachine m = canonicalize(input);
  const std::size_t n = m.num_states();
  const std::size_t np = m.num_symbols();
  std::vector<std::size_t> block(n);
  for (StateId q = 0; q < n; ++q)
    block[q] = m.output(q);
  std::size_t num_blocks = 0;
  for (;;) {
    std::map<std::vector<std::size_t>, std::size_t> ids;
    std::vector<std::size_t> next_block(n);
    std::vector<std::size_t> signature(np + 1);
    for (StateId q = 0; q < n; ++q) {
      signature[0] = block[q];
      for (SymbolId p = 0; p < np; ++p)
        signature[p + 1] = block[m.next(q, p)];
      auto [it, inserted] = ids.emplace(signature, ids.size());
      next_block[q] = it->second;
    }
    block = std::move(next_block);
    if (ids.size() == num_blocks)
      break;
    num_blocks = ids.size();
  }
  std::vector<StateId> rep(num_blocks, static_cast<StateId>(-1));
  for (StateId q = 0; q < n; ++q)
    if (rep[block[q]] == static_cast<StateId>(-1))
      rep[block[q]] = q;
  std::vector<StateId> delta(num_blocks * np);
  std::vector<ClassId> outputs(num_blocks);
  for (std::size_t b = 0; b < num_blocks; ++b) {
    outputs[b] = m.output(rep[b]);
    for (SymbolId p = 0; p < np; ++p)
      delta[b * np + p] = block[m.next(rep[b], p)];
  }
  return canonicalize(MooreMachine(m.alphabet(), num_blocks, block[m.initial()],
                                   std::move(delta), std::move(outputs),
                                   m.output_classes()));
}

MooreMachine make_dfa(std::vector<std::string> alphabet, std::size_t num_states,
                      StateId initial, std::vector<StateId> transitions,
                      const std::vector<bool> &accepting) {
  if (accepting.size() != num_states)
    throw InputError("acceptance vector does not cover every state");
  std::vector<ClassId> outputs(num_states);
  for (std::size_t q = 0; q < num_states; ++q)
    outputs[q] = accepting[q] ? 1 : 0;
  return MooreMachine(std::move(alphabet), num_states, initial,
                      std::move(transitions), std::move(outputs),
                      {std::string(kReject), std::string(kAccept)});
}

bool is_boolean(const MooreMachine &m) {
  const auto &c = m.output_classes();
  return c.size() == 2 && c[0] == kReject && c[1] == kAccept;
}

bool is_accepting(const MooreMachine &m, StateId q) {
  return m.output_classes()[m.output(q)] == kAccept;
}

MooreMachine product_conjunction(const MooreMachine &a, const MooreMachine &b) {
  require_same_alphabet(a, b);
  if (!is_boolean(a) || !is_boolean(b))
    throw InputError("product_conjunction expects boolean machines");
  const std::size_t np = a.num_symbols();
  std::unordered_map<std::uint64_t, StateId> index;
  std::vector<std::pair<StateId, StateId>> states;
  auto intern = [&](StateId qa, StateId qb) {
    auto [it, inserted] = index.emplace(pair_key(qa, qb), states.size());
    if (inserted)
      states.emplace_back(qa, qb);
    return it->second;
  };
  intern(a.initial(), b.initial());
  std::vector<StateId> delta;
  for (std::size_t i = 0; i < states.size(); ++i) {
    auto [qa, qb] = states[i];
    for (SymbolId p = 0; p < np; ++p)
      delta.push_back(intern(a.next(qa, p), b.next(qb, p)));
  }
  std::vector<bool> accepting(states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    accepting[i] = is_accepting(a, states[i].first) &&
                   is_accepting(b, states[i].second);
  return make_dfa(a.alphabet(), states.size(), 0, std::move(delta), accepting);
}

bool is_absorbing(const MooreMachine &m, StateId q) {
  for (SymbolId p = 0; p < m.num_symbols(); ++p)
    if (m.next(q, p) != q)
      return false;
  return true;
}

std::vector<StateId> absorbing_states(const MooreMachine &m) {
  std::vector<StateId> out;
  for (StateId q = 0; q < m.num_states(); ++q)
    if (is_absorbing(m, q))
      out.push_back(q);
  return out;
}

MooreMachine shape_rewards(const MooreMachine &dfa) {
  if (!is_boolean(dfa))
    throw InputError("shape_rewards expects a boolean machine");
  const std::size_t n = dfa.num_states();
  const std::size_t np = dfa.num_symbols();
  // Backward BFS from the accepting states over the reversed transition graph.
  std::vector<std::vector<StateId>> preds(n);
  for (StateId q = 0; q < n; ++q)
    for (SymbolId p = 0; p < np; ++p)
      preds[dfa.next(q, p)].push_back(q);
  constexpr std::size_t inf = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(n, inf);
  std::queue<StateId> work;
  for (StateId q = 0; q < n; ++q)
    if (is_accepting(dfa, q)) {
      dist[q] = 0;
      work.push(q);
    }
  if (work.empty())
    throw SpecError("task has no accepting state; reward shaping is undefined");
  while (!work.empty()) {
    StateId q = work.front();
    work.pop();
    for (StateId pq : preds[q])
      if (dist[pq] == inf) {
        dist[pq] = dist[q] + 1;
        work.push(pq);
      }
  }
  std::size_t dmax = 0;
  for (std::size_t d : dist)
    if (d != inf)
      dmax = std::max(dmax, d);
  std::vector<int> level(n);
  for (StateId q = 0; q < n; ++q)
    level[q] = dist[q] == inf ? -1 : static_cast<int>(dmax - dist[q]);
  std::vector<int> levels(level);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::string> labels;
  for (int l : levels)
    labels.push_back(std::to_string(l));
  std::vector<ClassId> outputs(n);
  for (StateId q = 0; q < n; ++q)
    outputs[q] = static_cast<ClassId>(
        std::lower_bound(levels.begin(), levels.end(), level[q]) - levels.begin());
  return MooreMachine(dfa.alphabet(), n, dfa.initial(),
                      {dfa.transitions().begin(), dfa.transitions().end()},
                      std::move(outputs), std::move(labels));
}

std::vector<int> class_levels(const MooreMachine &m) {
  std::vector<int> out;
  for (const auto &label : m.output_classes()) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
    if (ec != std::errc() || ptr != label.data() + label.size())
      throw InputError("output class '" + label + "' is not a reward level");
    out.push_back(value);
  }
  return out;
}

int state_level(const MooreMachine &m, StateId q) {
  return class_levels(m)[m.output(q)];
}

std::string serialize(const MooreMachine &m) {
  std::ostringstream out;
  out << "moore-machine v1\n";
  out << "alphabet";
  for (const auto &s : m.alphabet())
    out << ' ' << s;
  out << "\nclasses";
  for (const auto &c : m.output_classes())
    out << ' ' << c;
  out << "\nstates " << m.num_states() << "\ninitial " << m.initial() << '\n';
  for (StateId q = 0; q < m.num_states(); ++q) {
    out << "state " << q << " class " << m.output(q) << " next";
    for (SymbolId p = 0; p < m.num_symbols(); ++p)
      out << ' ' << m.next(q, p);
    out << '\n';
  }
  return out.str();
}

namespace {

std::size_t parse_index(const std::string &tok, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("expected a non-negative integer, got '" + tok + "'", line);
  return value;
}

} // namespace

MooreMachine deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool header = false;
  std::optional<std::vector<std::string>> alphabet, classes;
  std::optional<std::size_t> num_states, initial;
  std::vector<StateId> delta;
  std::vector<ClassId> outputs;
  std::size_t next_state = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;)
      tok.push_back(t);
    if (tok.empty())
      continue;
    if (!header) {
      if (tok.size() != 2 || tok[0] != "moore-machine" || tok[1] != "v1")
        throw ParseError("missing 'moore-machine v1' header", line_no);
      header = true;
      continue;
    }
    const std::string &key = tok[0];
    if (key == "alphabet") {
      alphabet.emplace(tok.begin() + 1, tok.end());
    } else if (key == "classes") {
      classes.emplace(tok.begin() + 1, tok.end());
    } else if (key == "states" && tok.size() == 2) {
      num_states = parse_index(tok[1], line_no);
    } else if (key == "initial" && tok.size() == 2) {
      initial = parse_index(tok[1], line_no);
    } else if (key == "state") {
      if (!alphabet || !num_states)
        throw ParseError("state line before alphabet/states", line_no);
      if (tok.size() != 5 + alphabet->size() || tok[2] != "class" || tok[4] != "next")
        throw ParseError("malformed state line", line_no);
      if (parse_index(tok[1], line_no) != next_state)
        throw ParseError("state lines must be listed in order", line_no);
      outputs.push_back(parse_index(tok[3], line_no));
      for (std::size_t i = 0; i < alphabet->size(); ++i)
        delta.push_back(parse_index(tok[5 + i], line_no));
      ++next_state;
    } else {
      throw ParseError("unknown directive '" + key + "'", line_no);
    }
  }
  if (!header || !alphabet || !classes || !num_states || !initial)
    throw ParseError("incomplete machine description", line_no);
  if (next_state != *num_states)
    throw ParseError("expected " + std::to_string(*num_states) + " state lines", line_no);
  try {
    return MooreMachine(std::move(*alphabet), *num_states, *initial,
                        std::move(delta), std::move(outputs), std::move(*classes));
  } catch (const InputError &e) {
    throw ParseError(e.what(), line_no);
  }
}

std::string export_dot(const MooreMachine &m) {
  std::ostringstream out;
  const ClassId top = m.output_classes().size() - 1;
  out << "digraph moore {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=circle];\n";
  out << "  start [shape=point];\n";
  out << "  start -> q" << m.initial() << ";\n";
  for (StateId q = 0; q < m.num_states(); ++q) {
    out << "  q" << q << " [label=\"q" << q << " / "
        << m.output_classes()[m.output(q)] << "\"";
    if (m.output(q) == top)
      out << ", shape=doublecircle";
    out << "];\n";
  }
  for (StateId q = 0; q < m.num_states(); ++q) {
    // One edge per distinct target, labels joined in alphabet order.
    std::vector<std::pair<StateId, std::string>> edges;
    for (SymbolId p = 0; p < m.num_symbols(); ++p) {
      StateId t = m.next(q, p);
      auto it = std::find_if(edges.begin(), edges.end(),
                             [t](const auto &e) { return e.first == t; });
      if (it == edges.end())
        edges.emplace_back(t, m.alphabet()[p]);
      else
        it->second += "," + m.alphabet()[p];
    }
    for (const auto &[t, label] : edges)
      out << "  q" << q << " -> q" << t << " [label=\"" << label << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

} // namespace nrm::automata
