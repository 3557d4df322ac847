#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nrm/gridworld/grid.hpp"
#include "nrm/rl/experiment.hpp"

namespace nrm::cli {

inline constexpr std::string_view kConfigHeader = "nrm-experiment v1";

/// Everything a `train` run needs. Command-line flags override it.
///
/// File format: the header line, then `[section]` lines and `key = value`
/// lines. `#` starts a comment. Sections are task, grid, run and train; keys
/// of [train] are the TrainConfig field names. Unknown sections or keys and
/// repeated keys are errors.
struct ExperimentConfig {
  /// Formula text or a task id 1..8; empty when unset.
  std::string task;
  std::vector<std::string> alphabet;
  grid::GridConfig grid;
  std::vector<rl::AgentKind> agents;
  std::vector<std::uint64_t> seeds;
  rl::TrainConfig train;

  ExperimentConfig();
};

/// Relative `map` paths resolve against `base_dir`. Throws ParseError with
/// the 1-based line number.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path &base_dir = {});
ExperimentConfig load_config(const std::string &path);
/// Config text that parses back to `config`, with the grid stored in
/// `map_file` (written by the caller).
std::string format_config(const ExperimentConfig &config, const std::string &map_file);

/// A task id 1..8 becomes its formula; anything else is taken as formula text.
std::string resolve_task(const std::string &task);

std::vector<std::string> split_list(const std::string &text);
std::vector<std::uint64_t> parse_seeds(const std::string &text);
std::vector<rl::AgentKind> parse_agents(const std::string &text);

} // namespace nrm::cli
