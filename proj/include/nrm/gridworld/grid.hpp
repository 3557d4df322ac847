#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nrm/automata/moore.hpp"

namespace nrm::grid {

using automata::ClassId;
using automata::MooreMachine;
using automata::StateId;
using automata::SymbolId;

enum class Action { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr std::size_t kNumActions = 4;

/// Column x grows to the right, row y grows downwards; (0, 0) is top-left.
struct Cell {
  std::size_t x = 0;
  std::size_t y = 0;
  auto operator<=>(const Cell &) const = default;
};

struct GridConfig {
  std::size_t width = 5;
  std::size_t height = 5;
  /// Item placements; every other cell carries `empty_symbol`.
  std::vector<std::pair<Cell, std::string>> items;
  std::string empty_symbol = "e";
  Cell start{};
  std::size_t horizon = 60;

  /// Throws SpecError on overlapping items, an out-of-bounds start or item,
  /// or when a symbol of `required` is placed nowhere.
  void validate(const std::vector<std::string> &required = {}) const;
};

/// The 5x5 default layout with items a..d, start at the top-left corner.
GridConfig default_config();

/// Map file: a `grid-map v1` header, optional `horizon N` and `empty S`
/// lines, then `map` followed by one text row per grid row. '.' is empty,
/// 'S' is the (empty) start cell, any other character is an item symbol.
GridConfig parse_map(const std::string &text);
GridConfig load_map(const std::string &path);
std::string format_map(const GridConfig &config);

/// One recorded episode. Step t (0-based) holds the state reached by the
/// t-th action and the reward emitted on entering it.
struct EpisodeTrace {
  std::vector<std::vector<double>> x_s;
  std::vector<ClassId> x_r;
  std::vector<double> scalar_rewards;
  /// Ground-truth symbols; diagnostics only.
  std::vector<SymbolId> x_p;
  std::vector<Cell> cells;
  double episode_return = 0.0;

  [[nodiscard]] std::size_t length() const noexcept { return x_r.size(); }
};

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  ClassId reward_class = 0;
  bool done = false;
  SymbolId symbol = 0;
};

/// Non-Markovian grid task: deterministic moves, labels from item cells, and
/// potential-shaped rewards from a ground-truth reward machine.
class GridWorld {
public:
  /// The machine's alphabet names the symbols; its output class labels are
  /// numeric potential levels as produced by shape_rewards.
  GridWorld(GridConfig config, MooreMachine machine);

  std::vector<double> reset();
  StepResult step(Action action);

  [[nodiscard]] SymbolId label(Cell c) const;
  [[nodiscard]] std::vector<double> encode(Cell c) const;
  [[nodiscard]] Cell move(Cell c, Action a) const;

  [[nodiscard]] const GridConfig &config() const noexcept { return config_; }
  [[nodiscard]] const MooreMachine &machine() const noexcept { return machine_; }
  [[nodiscard]] Cell position() const noexcept { return pos_; }
  [[nodiscard]] StateId machine_state() const noexcept { return q_; }
  [[nodiscard]] std::size_t time() const noexcept { return t_; }
  [[nodiscard]] bool done() const noexcept { return done_; }
  [[nodiscard]] std::size_t state_dim() const noexcept { return 2; }

  [[nodiscard]] double potential(StateId q) const { return level_[q]; }
  /// Accepting: the top reward level.
  [[nodiscard]] bool is_goal(StateId q) const { return level_[q] == pot_max_; }
  [[nodiscard]] bool is_terminal(StateId q) const;
  /// Scalar reward for the machine moving from q to q2.
  [[nodiscard]] double shaped_reward(StateId q, StateId q2) const;
  /// Inverse of the shaping: reward classes implied by a reward sequence.
  [[nodiscard]] std::vector<ClassId> classes_from_rewards(const std::vector<double> &rewards) const;

private:
  GridConfig config_;
  MooreMachine machine_;
  std::vector<SymbolId> labels_;
  std::vector<double> level_;
  double pot_max_ = 0.0;
  double pot_scale_ = 1.0;
  Cell pos_{};
  StateId q_ = 0;
  std::size_t t_ = 0;
  bool done_ = true;
};

/// Shortest-path policy on the product of grid cells and machine states.
class OptimalPolicy {
public:
  /// Throws SpecError if acceptance is unreachable from the start.
  explicit OptimalPolicy(const GridWorld &env);

  /// Steps to acceptance from (cell, q); npos when unreachable.
  [[nodiscard]] std::size_t distance(Cell c, StateId q) const;
  /// Lowest-index action on a shortest path; throws if none exists.
  [[nodiscard]] Action action(Cell c, StateId q) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
  const GridWorld *env_;
  std::vector<std::size_t> dist_;
};

enum class SynthPolicy { Random, EpsilonOptimal, Mixture };

struct SynthOptions {
  SynthPolicy policy = SynthPolicy::Mixture;
  /// Random-action probability of the epsilon-optimal policy.
  double epsilon = 0.3;
};

EpisodeTrace run_episode(GridWorld &env, SynthPolicy policy, double epsilon,
                         std::mt19937_64 &rng);
std::vector<EpisodeTrace> synth_dataset(const GridConfig &config, const MooreMachine &machine,
                                        std::size_t n, std::mt19937_64 &rng,
                                        SynthOptions options = {});

/// CSV with header `episode,t,x,y,reward_class,scalar_reward`.
void write_traces_csv(std::ostream &out, const std::vector<EpisodeTrace> &traces);
void write_traces_csv(const std::string &path, const std::vector<EpisodeTrace> &traces);
/// Rebuilds x_s, x_r and scalar rewards; symbols and cells are not stored.
std::vector<EpisodeTrace> read_traces_csv(std::istream &in);
std::vector<EpisodeTrace> read_traces_csv(const std::string &path);

const char *action_name(Action a);

} // namespace nrm::grid
