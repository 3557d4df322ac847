#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrm/automata/moore.hpp"
#include "nrm/diff/nn.hpp"
#include "nrm/gridworld/grid.hpp"
#include "nrm/neural/grounder.hpp"

namespace nrm::neural {

using automata::ClassId;
using automata::MooreMachine;
using automata::SymbolMap;
using grid::EpisodeTrace;

/// Matrix form of a (possibly learnable) reward machine.
///
/// mt has shape [P, Q, Q] and mr shape [Q, R]. Frozen tensors hold exact
/// one-hot rows and are used as they are; learnable ones hold logits that go
/// through tau_softmax along their last axis before use.
struct ProbMachineParams {
  std::vector<std::string> alphabet;
  std::vector<std::string> classes;
  Parameter mt;
  Parameter mr;
  Tensor q0;
  double tau = 1.0;
  bool frozen_mt = false;
  bool frozen_mr = false;

  /// Knowledge initialisation: one-hot rows, both tensors frozen.
  static ProbMachineParams from_machine(const MooreMachine &m);
  /// Learnable logits drawn from N(0, scale^2); the start state is state 0.
  static ProbMachineParams learnable(std::vector<std::string> alphabet,
                                     std::vector<std::string> classes, std::size_t num_states,
                                     std::mt19937_64 &rng, double scale = 0.1);

  [[nodiscard]] std::size_t num_symbols() const { return mt.value.dim(0); }
  [[nodiscard]] std::size_t num_states() const { return mt.value.dim(1); }
  [[nodiscard]] std::size_t num_classes() const { return mr.value.dim(1); }

  /// Transition and reward matrices as used by the forward pass.
  [[nodiscard]] Tensor transitions() const;
  [[nodiscard]] Tensor rewards() const;
  Value transitions(Graph &g);
  Value rewards(Graph &g);
  /// Learnable tensors only.
  std::vector<Parameter *> parameters();
};

/// Probability sequences of one trace, each [T, n] with rows summing to one.
struct ProbTraces {
  Tensor x_pp;
  Tensor x_qp;
  Tensor x_rp;
};

struct ForwardValues {
  Value x_pp;
  Value x_qp;
  Value x_rp;
};

/// q(t) = sum_i p(t)[i] q(t-1) Mt[i] from q(0) = q0; r(t) = q(t) Mr.
ForwardValues forward(Graph &g, ProbMachineParams &params, Grounder &grounder,
                      const Tensor &states, std::mt19937_64 *dropout_rng = nullptr);
ProbTraces forward(ProbMachineParams &params, Grounder &grounder,
                   const std::vector<std::vector<double>> &x_s);

/// One step of the recurrence outside any graph; `mt` is transitions().
std::vector<double> advance(const Tensor &mt, std::span<const double> p,
                            std::span<const double> q);

/// Mean per-step cross-entropy between predicted and observed reward classes.
Value sg_loss(Graph &g, ProbMachineParams &params, Grounder &grounder, const EpisodeTrace &trace,
              std::mt19937_64 *dropout_rng = nullptr);
double sg_loss(ProbMachineParams &params, Grounder &grounder, const EpisodeTrace &trace);
double mean_sg_loss(ProbMachineParams &params, Grounder &grounder,
                    const std::vector<EpisodeTrace> &traces);

struct GrounderTraining {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  /// Stop once the best epoch loss has not improved by min_delta for this
  /// many epochs; 0 disables the check.
  std::size_t patience = 5;
  double min_delta = 1e-5;
  /// Stop as soon as an epoch's mean loss is at or below this value; 0 disables.
  double target_loss = 0.0;
  /// Dropout is only used when the grounder was built with a rate.
  bool use_dropout = false;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  [[nodiscard]] std::size_t epochs_run() const { return epoch_losses.size(); }
};

/// Fits the grounder to the reward classes of `dataset` through the frozen
/// machine. The machine tensors are never modified.
TrainReport train_grounder(ProbMachineParams &params, Grounder &grounder,
                           const std::vector<EpisodeTrace> &dataset, diff::Adam &optimizer,
                           std::mt19937_64 &rng, const GrounderTraining &options = {});

struct PureLearningOptions {
  std::size_t epochs = 120;
  std::size_t batch_size = 16;
  double lr = 4e-4;
  /// tau(k) = max(tau_min, tau_decay^k) at epoch k; tau_decay = 1 keeps tau at 1.
  double tau_decay = 0.97;
  double tau_min = 0.05;
  double init_scale = 0.1;
};

struct PureLearningResult {
  ProbMachineParams params;
  std::vector<double> epoch_losses;
};

/// Learns Mt, Mr and the grounder jointly from reward-class sequences.
PureLearningResult pure_learning(const std::vector<EpisodeTrace> &dataset,
                                 std::vector<std::string> alphabet,
                                 std::vector<std::string> classes, std::size_t num_states,
                                 Grounder &grounder, std::mt19937_64 &rng,
                                 const PureLearningOptions &options = {});

/// Argmax discretisation of the processed matrices, lowest index on ties.
MooreMachine extract_machine(const ProbMachineParams &params);

/// max over alpha in urs of the fraction of i with alpha(predicted[i]) == label[i].
double urs_corrected_accuracy(std::span<const SymbolId> predicted,
                              std::span<const SymbolId> labels, std::span<const SymbolMap> urs);
double urs_corrected_accuracy(Grounder &grounder, const std::vector<std::vector<double>> &states,
                              std::span<const SymbolId> labels, std::span<const SymbolMap> urs);

} // namespace nrm::neural
