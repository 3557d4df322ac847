#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nrm/gridworld/grid.hpp"
#include "nrm/neural/machine.hpp"
#include "nrm/rl/a2c.hpp"

namespace nrm::rl {

using grid::EpisodeTrace;
using grid::GridWorld;

enum class AgentKind { RM, NRM, RNN };

const char *agent_name(AgentKind kind);
/// Accepts rm, nrm and rnn in any case.
AgentKind parse_agent(const std::string &name);

/// Builds the policy input from what the agent can see.
class StateTracker {
public:
  virtual ~StateTracker() = default;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  virtual std::vector<double> reset(const GridWorld &env, std::span<const double> state) = 0;
  virtual std::vector<double> step(const GridWorld &env, const grid::StepResult &result) = 0;
};

/// Environment encoding plus the exact machine state, one-hot.
class ExactTracker final : public StateTracker {
public:
  explicit ExactTracker(const GridWorld &env);
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  std::vector<double> reset(const GridWorld &env, std::span<const double> state) override;
  std::vector<double> step(const GridWorld &env, const grid::StepResult &result) override;

private:
  std::size_t dim_;
};

/// Environment encoding plus the machine-state distribution obtained by
/// grounding every visited state and running the probabilistic machine.
class GroundedTracker final : public StateTracker {
public:
  GroundedTracker(const GridWorld &env, neural::Grounder &grounder);
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  std::vector<double> reset(const GridWorld &env, std::span<const double> state) override;
  std::vector<double> step(const GridWorld &env, const grid::StepResult &result) override;
  [[nodiscard]] const std::vector<double> &machine_state() const { return q_; }

private:
  neural::Grounder *grounder_;
  Tensor mt_;
  std::vector<double> q0_;
  std::vector<double> q_;
  std::size_t dim_;
};

/// Environment encoding only.
class RawTracker final : public StateTracker {
public:
  explicit RawTracker(const GridWorld &env) : dim_(env.state_dim()) {}
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  std::vector<double> reset(const GridWorld &, std::span<const double> state) override;
  std::vector<double> step(const GridWorld &, const grid::StepResult &result) override;

private:
  std::size_t dim_;
};

/// Training set for symbol grounding: the most recent episodes plus the
/// highest-return ones seen so far, each episode at most once.
class GrounderBuffer {
public:
  GrounderBuffer(std::size_t recent, std::size_t elite);
  void add(EpisodeTrace trace);
  [[nodiscard]] std::vector<EpisodeTrace> contents() const;
  [[nodiscard]] std::size_t size() const;
  /// Highest return among all episodes ever added.
  [[nodiscard]] std::optional<double> best_return() const;

private:
  struct Entry {
    std::uint64_t id;
    std::shared_ptr<const EpisodeTrace> trace;
  };
  std::size_t recent_cap_, elite_cap_;
  std::uint64_t next_id_ = 0;
  std::deque<Entry> recent_;
  std::vector<Entry> elite_; // sorted by return, best first; ties keep the older episode
};

struct RunOptions {
  AgentKind agent = AgentKind::RM;
  std::uint64_t seed = 0;
  TrainConfig train;
  /// NRM only: ground states with the true labeling function and skip the
  /// grounding rounds. The agent then sees exactly what the RM agent sees.
  bool oracle_grounding = false;
};

/// Ground-truth grounder of a grid: decodes the cell from the state encoding.
/// Keeps a reference to `env`.
neural::OracleGrounder cell_oracle(const GridWorld &env);

struct RunResult {
  std::vector<double> returns;
  /// Mean grounder loss after each grounding round (NRM only).
  std::vector<double> grounder_losses;
  /// URS-corrected accuracy of the grounder on every grid cell after each
  /// grounding round (NRM only).
  std::vector<double> grounder_accuracy;
};

/// Trains one agent on one task for config.episodes episodes. The machine
/// must be reward-shaped as accepted by GridWorld.
RunResult run_experiment(const grid::GridConfig &grid, const automata::MooreMachine &machine,
                         const RunOptions &options);

/// Trailing mean over at most `window` episodes ending at each index.
std::vector<double> smooth(const std::vector<double> &values, std::size_t window);
/// Mean of the last `window` values (all of them when fewer).
double final_mean(const std::vector<double> &values, std::size_t window);

/// One column of returns per seed: `episode,return`.
void write_returns_csv(std::ostream &out, const std::vector<double> &returns);
std::vector<double> read_returns_csv(std::istream &in);
std::vector<double> read_returns_csv(const std::string &path);

struct CurveSummary {
  std::vector<double> mean, min, max;
};
/// Per-episode mean and range over seeds of the smoothed curves. All runs
/// must have the same length.
CurveSummary summarize(const std::vector<std::vector<double>> &runs, std::size_t window);
/// `episode,mean,min,max`.
void write_summary_csv(std::ostream &out, const CurveSummary &summary);

struct PlotSeries {
  std::string label;
  CurveSummary curve;
  std::size_t seeds = 1;
};
/// Learning curves as a standalone SVG: one mean line per series, plus a
/// min/max band when the series covers more than one seed.
std::string render_svg(const std::vector<PlotSeries> &series, const std::string &title);

} // namespace nrm::rl
