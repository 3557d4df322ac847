#include "nrm/gridworld/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "nrm/errors.hpp"

namespace nrm::grid {

namespace {

std::string cell_string(Cell c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T> T parse_number(const std::string &text, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError("expected a number, got '" + text + "'", line);
  return value;
}

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep))
    out.push_back(field);
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

} // namespace

void GridConfig::validate(const std::vector<std::string> &required) const {
  if (width == 0 || height == 0)
    throw SpecError("grid must have at least one cell");
  if (horizon == 0)
    throw SpecError("horizon must be positive");
  if (start.x >= width || start.y >= height)
    throw SpecError("start cell " + cell_string(start) + " is outside the grid");
  std::set<Cell> used;
  for (const auto &[cell, symbol] : items) {
    if (cell.x >= width || cell.y >= height)
      throw SpecError("item '" + symbol + "' at " + cell_string(cell) + " is outside the grid");
    if (!used.insert(cell).second)
      throw SpecError("two items share cell " + cell_string(cell));
    if (symbol == empty_symbol)
      throw SpecError("the empty symbol cannot be placed as an item");
  }
  for (const auto &sym : required) {
    if (sym == empty_symbol)
      continue;
    const bool placed = std::any_of(items.begin(), items.end(),
                                    [&](const auto &it) { return it.second == sym; });
    if (!placed)
      throw SpecError("symbol '" + sym + "' is not placed on the grid");
  }
}

GridConfig default_config() {
  GridConfig c;
  c.items = {{{1, 2}, "a"}, {{3, 4}, "b"}, {{2, 1}, "c"}, {{3, 2}, "d"}};
  return c;
}

GridConfig parse_map(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  GridConfig c;
  c.items.clear();
  bool header = false, in_map = false, have_start = false;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!in_map) {
      line = trim(line);
      if (line.empty() || line[0] == '#')
        continue;
    } else if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!header) {
      if (line != "grid-map v1")
        throw ParseError("expected header 'grid-map v1'", lineno);
      header = true;
      continue;
    }
    if (in_map) {
      if (trim(line).empty())
        continue;
      rows.push_back(trim(line));
      const std::size_t y = rows.size() - 1;
      if (rows.back().size() != rows.front().size())
        throw ParseError("map rows differ in width", lineno);
      for (std::size_t x = 0; x < rows.back().size(); ++x) {
        const char ch = rows.back()[x];
        if (ch == '.')
          continue;
        if (ch == 'S') {
          if (have_start)
            throw ParseError("more than one start cell", lineno);
          c.start = {x, y};
          have_start = true;
        } else {
          c.items.push_back({{x, y}, std::string(1, ch)});
        }
      }
      continue;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string value = sp == std::string::npos ? "" : trim(line.substr(sp + 1));
    if (key == "map" && value.empty())
      in_map = true;
    else if (key == "horizon")
      c.horizon = parse_number<std::size_t>(value, lineno);
    else if (key == "empty" && !value.empty())
      c.empty_symbol = value;
    else
      throw ParseError("unknown line '" + line + "'", lineno);
  }
  if (!header)
    throw ParseError("empty map file", lineno);
  if (rows.empty())
    throw ParseError("map has no rows", lineno);
  if (!have_start)
    throw ParseError("map has no start cell 'S'", lineno);
  c.width = rows.front().size();
  c.height = rows.size();
  c.validate();
  return c;
}

GridConfig load_map(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str());
}

std::string format_map(const GridConfig &config) {
  std::vector<std::string> rows(config.height, std::string(config.width, '.'));
  for (const auto &[cell, symbol] : config.items)
    rows[cell.y][cell.x] = symbol.size() == 1 ? symbol[0] : '?';
  rows[config.start.y][config.start.x] = 'S';
  std::string out = "grid-map v1\nhorizon " + std::to_string(config.horizon) + "\nempty " +
                    config.empty_symbol + "\nmap\n";
  for (const auto &r : rows)
    out += r + "\n";
  return out;
}

GridWorld::GridWorld(GridConfig config, MooreMachine machine)
    : config_(std::move(config)), machine_(std::move(machine)) {
  // Symbols that move some state must be reachable on the grid.
  std::vector<std::string> required;
  for (SymbolId p = 0; p < machine_.num_symbols(); ++p)
    for (StateId q = 0; q < machine_.num_states(); ++q)
      if (machine_.next(q, p) != q) {
        required.push_back(machine_.alphabet()[p]);
        break;
      }
  config_.validate(required);
  const auto empty = machine_.symbol_index(config_.empty_symbol);
  if (!empty)
    throw SpecError("empty symbol '" + config_.empty_symbol + "' is not in the task alphabet");
  labels_.assign(config_.width * config_.height, *empty);
  for (const auto &[cell, symbol] : config_.items) {
    const auto id = machine_.symbol_index(symbol);
    if (!id)
      throw SpecError("item '" + symbol + "' is not in the task alphabet");
    labels_[cell.y * config_.width + cell.x] = *id;
  }
  const auto levels = automata::class_levels(machine_);
  for (StateId q = 0; q < machine_.num_states(); ++q)
    level_.push_back(levels[machine_.output(q)]);
  pot_max_ = *std::max_element(level_.begin(), level_.end());
  const double range = pot_max_ - level_[machine_.initial()];
  if (range <= 0.0)
    throw SpecError("the initial machine state already has the top reward level");
  pot_scale_ = 100.0 / range;
}

std::vector<double> GridWorld::reset() {
  pos_ = config_.start;
  q_ = machine_.initial();
  t_ = 0;
  done_ = false;
  return encode(pos_);
}

StepResult GridWorld::step(Action action) {
  if (done_)
    throw UsageError("step() on a finished episode; call reset()");
  pos_ = move(pos_, action);
  const SymbolId p = label(pos_);
  const StateId prev = q_;
  q_ = machine_.next(q_, p);
  ++t_;
  done_ = is_terminal(q_) || t_ >= config_.horizon;
  return {encode(pos_), shaped_reward(prev, q_), machine_.output(q_), done_, p};
}

SymbolId GridWorld::label(Cell c) const {
  if (c.x >= config_.width || c.y >= config_.height)
    throw InputError("cell " + cell_string(c) + " is outside the grid");
  return labels_[c.y * config_.width + c.x];
}

std::vector<double> GridWorld::encode(Cell c) const {
  auto norm = [](std::size_t v, std::size_t n) {
    return n > 1 ? static_cast<double>(v) / static_cast<double>(n - 1) : 0.0;
  };
  return {norm(c.x, config_.width), norm(c.y, config_.height)};
}

Cell GridWorld::move(Cell c, Action a) const {
  switch (a) {
  case Action::Up:
    if (c.y > 0)
      --c.y;
    break;
  case Action::Down:
    if (c.y + 1 < config_.height)
      ++c.y;
    break;
  case Action::Left:
    if (c.x > 0)
      --c.x;
    break;
  case Action::Right:
    if (c.x + 1 < config_.width)
      ++c.x;
    break;
  }
  return c;
}

bool GridWorld::is_terminal(StateId q) const {
  return is_goal(q) || level_[q] < 0.0;
}

double GridWorld::shaped_reward(StateId q, StateId q2) const {
  return (level_[q2] - level_[q]) * pot_scale_;
}

std::vector<ClassId> GridWorld::classes_from_rewards(const std::vector<double> &rewards) const {
  const auto levels = automata::class_levels(machine_);
  std::vector<ClassId> out;
  double cumulative = 0.0;
  for (double r : rewards) {
    cumulative += r;
    const double level = level_[machine_.initial()] + cumulative / pot_scale_;
    auto best = std::min_element(levels.begin(), levels.end(), [&](int a, int b) {
      return std::abs(a - level) < std::abs(b - level);
    });
    out.push_back(static_cast<ClassId>(best - levels.begin()));
  }
  return out;
}

OptimalPolicy::OptimalPolicy(const GridWorld &env) : env_(&env) {
  const auto &cfg = env.config();
  const auto &m = env.machine();
  const std::size_t nc = cfg.width * cfg.height, nq = m.num_states();
  dist_.assign(nc * nq, npos);
  // Backward BFS from accepting product states over reversed moves.
  std::vector<std::vector<std::size_t>> preds(nc * nq);
  std::deque<std::size_t> queue;
  for (std::size_t y = 0; y < cfg.height; ++y)
    for (std::size_t x = 0; x < cfg.width; ++x)
      for (StateId q = 0; q < nq; ++q) {
        const std::size_t id = (y * cfg.width + x) * nq + q;
        if (env.is_terminal(q)) {
          if (env.is_goal(q)) {
            dist_[id] = 0;
            queue.push_back(id);
          }
          continue;
        }
        for (std::size_t a = 0; a < kNumActions; ++a) {
          const Cell c2 = env.move({x, y}, static_cast<Action>(a));
          const StateId q2 = m.next(q, env.label(c2));
          preds[(c2.y * cfg.width + c2.x) * nq + q2].push_back(id);
        }
      }
  while (!queue.empty()) {
    const std::size_t id = queue.front();
    queue.pop_front();
    for (std::size_t p : preds[id])
      if (dist_[p] == npos) {
        dist_[p] = dist_[id] + 1;
        queue.push_back(p);
      }
  }
  if (distance(cfg.start, m.initial()) == npos)
    throw SpecError("the task cannot be completed on this grid");
}

std::size_t OptimalPolicy::distance(Cell c, StateId q) const {
  const auto &cfg = env_->config();
  return dist_[(c.y * cfg.width + c.x) * env_->machine().num_states() + q];
}

Action OptimalPolicy::action(Cell c, StateId q) const {
  const std::size_t d = distance(c, q);
  if (d == npos || d == 0)
    throw UsageError("no optimal action from this state");
  for (std::size_t a = 0; a < kNumActions; ++a) {
    const Cell c2 = env_->move(c, static_cast<Action>(a));
    const StateId q2 = env_->machine().next(q, env_->label(c2));
    if (distance(c2, q2) == d - 1)
      return static_cast<Action>(a);
  }
  throw UsageError("inconsistent distance table");
}

EpisodeTrace run_episode(GridWorld &env, SynthPolicy policy, double epsilon,
                         std::mt19937_64 &rng) {
  std::uniform_int_distribution<std::size_t> any_action(0, kNumActions - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::optional<OptimalPolicy> optimal;
  if (policy != SynthPolicy::Random)
    optimal.emplace(env);
  EpisodeTrace trace;
  env.reset();
  while (!env.done()) {
    Action a;
    const std::size_t d = optimal ? optimal->distance(env.position(), env.machine_state())
                                  : OptimalPolicy::npos;
    if (policy == SynthPolicy::Random || d == OptimalPolicy::npos || unit(rng) < epsilon)
      a = static_cast<Action>(any_action(rng));
    else
      a = optimal->action(env.position(), env.machine_state());
    auto r = env.step(a);
    trace.x_s.push_back(std::move(r.state));
    trace.x_r.push_back(r.reward_class);
    trace.scalar_rewards.push_back(r.reward);
    trace.x_p.push_back(r.symbol);
    trace.cells.push_back(env.position());
    trace.episode_return += r.reward;
  }
  return trace;
}

std::vector<EpisodeTrace> synth_dataset(const GridConfig &config, const MooreMachine &machine,
                                        std::size_t n, std::mt19937_64 &rng,
                                        SynthOptions options) {
  GridWorld env(config, machine);
  std::vector<EpisodeTrace> out;
  out.reserve(n);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    SynthPolicy p = options.policy;
    if (p == SynthPolicy::Mixture)
      p = coin(rng) ? SynthPolicy::Random : SynthPolicy::EpsilonOptimal;
    out.push_back(run_episode(env, p, options.epsilon, rng));
  }
  return out;
}

void write_traces_csv(std::ostream &out, const std::vector<EpisodeTrace> &traces) {
  out << "episode,t,x,y,reward_class,scalar_reward\n";
  char buf[128];
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const auto &tr = traces[e];
    for (std::size_t t = 0; t < tr.length(); ++t) {
      if (tr.x_s[t].size() != 2)
        throw InputError("trace CSV stores two-dimensional states only");
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%zu,%.17g\n", e, t, tr.x_s[t][0],
                    tr.x_s[t][1], tr.x_r[t], tr.scalar_rewards[t]);
      out << buf;
    }
  }
}

void write_traces_csv(const std::string &path, const std::vector<EpisodeTrace> &traces) {
  std::ofstream out(path);
  if (!out)
    throw InputError("cannot open " + path + " for writing");
  write_traces_csv(out, traces);
}

std::vector<EpisodeTrace> read_traces_csv(std::istream &in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || trim(line) != "episode,t,x,y,reward_class,scalar_reward")
    throw ParseError("expected trace CSV header", lineno);
  std::vector<EpisodeTrace> out;
  std::map<std::size_t, std::size_t> index;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty())
      continue;
    const auto f = split(line, ',');
    if (f.size() != 6)
      throw ParseError("expected 6 fields", lineno);
    const auto episode = parse_number<std::size_t>(f[0], lineno);
    const auto t = parse_number<std::size_t>(f[1], lineno);
    auto [it, fresh] = index.try_emplace(episode, out.size());
    if (fresh)
      out.emplace_back();
    auto &tr = out[it->second];
    if (t != tr.length())
      throw ParseError("steps of episode " + f[0] + " are not consecutive", lineno);
    tr.x_s.push_back({parse_number<double>(f[2], lineno), parse_number<double>(f[3], lineno)});
    tr.x_r.push_back(parse_number<std::size_t>(f[4], lineno));
    tr.scalar_rewards.push_back(parse_number<double>(f[5], lineno));
    tr.episode_return += tr.scalar_rewards.back();
  }
  return out;
}

std::vector<EpisodeTrace> read_traces_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path);
  return read_traces_csv(in);
}

const char *action_name(Action a) {
  switch (a) {
  case Action::Up:
    return "up";
  case Action::Down:
    return "down";
  case Action::Left:
    return "left";
  case Action::Right:
    return "right";
  }
  return "?";
}

} // namespace nrm::grid
