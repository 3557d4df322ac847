#include "config.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <variant>

#include "nrm/errors.hpp"
#include "nrm/ltlf/formula.hpp"

namespace nrm::cli {

namespace {

using SizeField = std::size_t rl::TrainConfig::*;
using RealField = double rl::TrainConfig::*;
using Field = std::variant<SizeField, RealField>;

struct TrainKey {
  const char *name;
  Field field;
};

// Every TrainConfig field, in declaration order.
const TrainKey kTrainKeys[] = {
    {"episodes", &rl::TrainConfig::episodes},
    {"n_step", &rl::TrainConfig::n_step},
    {"lr", &rl::TrainConfig::lr},
    {"coef_actor", &rl::TrainConfig::coef_actor},
    {"coef_critic", &rl::TrainConfig::coef_critic},
    {"coef_entropy", &rl::TrainConfig::coef_entropy},
    {"gamma", &rl::TrainConfig::gamma},
    {"clip_norm", &rl::TrainConfig::clip_norm},
    {"hidden", &rl::TrainConfig::hidden},
    {"rnn_hidden", &rl::TrainConfig::rnn_hidden},
    {"rnn_layers", &rl::TrainConfig::rnn_layers},
    {"grounder_hidden", &rl::TrainConfig::grounder_hidden},
    {"grounder_period", &rl::TrainConfig::grounder_period},
    {"grounder_epochs", &rl::TrainConfig::grounder_epochs},
    {"grounder_batch", &rl::TrainConfig::grounder_batch},
    {"grounder_patience", &rl::TrainConfig::grounder_patience},
    {"grounder_target_loss", &rl::TrainConfig::grounder_target_loss},
    {"buffer_recent", &rl::TrainConfig::buffer_recent},
    {"buffer_elite", &rl::TrainConfig::buffer_elite},
    {"window", &rl::TrainConfig::window},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T> std::optional<T> parse_number(const std::string &s) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size())
    return std::nullopt;
  return v;
}

template <typename T> T number_or_throw(const std::string &s, const std::string &what) {
  if (auto v = parse_number<T>(s))
    return *v;
  throw InputError("'" + s + "' is not a valid " + what);
}

// Shortest text that parses back to the same double.
std::string format_real(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T, typename F> std::string join(const std::vector<T> &xs, F &&fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

} // namespace

ExperimentConfig::ExperimentConfig()
    : alphabet(ltlf::default_alphabet()), grid(grid::default_config()),
      agents{rl::AgentKind::RM, rl::AgentKind::NRM, rl::AgentKind::RNN}, seeds{0, 1, 2} {}

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty())
      out.push_back(std::move(t));
  if (out.empty())
    throw InputError("empty list '" + text + "'");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string &text) {
  std::vector<std::uint64_t> out;
  for (const auto &s : split_list(text))
    out.push_back(number_or_throw<std::uint64_t>(s, "seed"));
  return out;
}

std::vector<rl::AgentKind> parse_agents(const std::string &text) {
  std::vector<rl::AgentKind> out;
  for (const auto &s : split_list(text))
    out.push_back(rl::parse_agent(s));
  return out;
}

std::string resolve_task(const std::string &task) {
  if (auto id = parse_number<int>(trim(task))) {
    if (*id < 1 || *id > ltlf::kNumTasks)
      throw InputError("task id must be 1.." + std::to_string(ltlf::kNumTasks));
    return ltlf::task_formula(*id);
  }
  if (trim(task).empty())
    throw InputError("no task given");
  return task;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path &base_dir) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line, section;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  std::optional<std::size_t> horizon;
  bool header = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    if (!header) {
      if (line != kConfigHeader)
        throw ParseError("expected header '" + std::string(kConfigHeader) + "'", lineno);
      header = true;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", lineno);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "task" && section != "grid" && section != "run" && section != "train")
        throw ParseError("unknown section [" + section + "]", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key = value", lineno);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty())
      throw ParseError("key '" + key + "' outside a section", lineno);
    if (!seen.insert(section + "." + key).second)
      throw ParseError("repeated key " + section + "." + key, lineno);

    try {
      if (section == "task" && key == "task") {
        cfg.task = value;
      } else if (section == "task" && key == "alphabet") {
        cfg.alphabet = split_list(value);
      } else if (section == "grid" && key == "map") {
        const std::filesystem::path p(value);
        cfg.grid = grid::load_map((p.is_absolute() ? p : base_dir / p).string());
      } else if (section == "grid" && key == "horizon") {
        horizon = number_or_throw<std::size_t>(value, "horizon");
      } else if (section == "run" && key == "agents") {
        cfg.agents = parse_agents(value);
      } else if (section == "run" && key == "seeds") {
        cfg.seeds = parse_seeds(value);
      } else if (section == "train") {
        const TrainKey *match = nullptr;
        for (const auto &k : kTrainKeys)
          if (key == k.name)
            match = &k;
        if (!match)
          throw ParseError("unknown key train." + key, lineno);
        if (const auto *f = std::get_if<SizeField>(&match->field))
          cfg.train.*(*f) = number_or_throw<std::size_t>(value, key);
        else
          cfg.train.*std::get<RealField>(match->field) = number_or_throw<double>(value, key);
      } else {
        throw ParseError("unknown key " + section + "." + key, lineno);
      }
    } catch (const ParseError &) {
      throw;
    } catch (const Error &e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!header)
    throw ParseError("empty config", lineno);
  if (horizon)
    cfg.grid.horizon = *horizon;
  try {
    cfg.train.validate();
  } catch (const Error &e) {
    throw ParseError(e.what(), lineno);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

std::string format_config(const ExperimentConfig &config, const std::string &map_file) {
  std::ostringstream out;
  out << kConfigHeader << "\n\n[task]\n";
  if (!config.task.empty())
    out << "task = " << config.task << "\n";
  out << "alphabet = " << join(config.alphabet, [](const std::string &s) { return s; }) << "\n";
  out << "\n[grid]\nmap = " << map_file << "\n";
  out << "\n[run]\nagents = "
      << join(config.agents, [](rl::AgentKind k) { return std::string(rl::agent_name(k)); })
      << "\nseeds = " << join(config.seeds, [](std::uint64_t s) { return std::to_string(s); })
      << "\n\n[train]\n";
  for (const auto &k : kTrainKeys) {
    out << k.name << " = ";
    if (const auto *f = std::get_if<SizeField>(&k.field))
      out << config.train.*(*f);
    else
      out << format_real(config.train.*std::get<RealField>(k.field));
    out << "\n";
  }
  return out.str();
}

} // namespace nrm::cli
