#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrm/diff/nn.hpp"

namespace nrm::rl {

using diff::Graph;
using diff::Parameter;
using diff::Tensor;
using diff::Value;

struct TrainConfig {
  std::size_t episodes = 10000;
  std::size_t n_step = 5;
  double lr = 4e-4;
  double coef_actor = 0.3;
  double coef_critic = 0.5;
  double coef_entropy = 1e-4;
  double gamma = 0.99;
  double clip_norm = 5.0;
  std::size_t hidden = 120;
  std::size_t rnn_hidden = 50;
  std::size_t rnn_layers = 2;
  std::size_t grounder_hidden = 64;
  std::size_t grounder_period = 120;
  std::size_t grounder_epochs = 100;
  std::size_t grounder_batch = 8;
  /// Early-stopping patience of each grounding round in epochs; 0 runs every
  /// round to grounder_epochs unless the loss reaches grounder_target_loss.
  std::size_t grounder_patience = 0;
  double grounder_target_loss = 1e-4;
  std::size_t buffer_recent = 60;
  std::size_t buffer_elite = 60;
  std::size_t window = 100;

  /// Throws InputError unless every size and rate is positive and gamma is
  /// in (0, 1].
  void validate() const;
};

/// Policy and value outputs for a sequence of observations.
struct Evaluation {
  Value logits; // [n, actions]; the policy is their softmax
  Value values; // [n, 1]
};

/// Actor-critic network. Recurrent implementations carry hidden state from
/// act() to act() and restart it at reset().
class ActorCritic {
public:
  virtual ~ActorCritic() = default;

  [[nodiscard]] virtual std::size_t input_dim() const = 0;
  [[nodiscard]] virtual std::size_t num_actions() const = 0;
  virtual void reset() = 0;
  /// Marks the current hidden state as the start of the next update segment.
  virtual void begin_segment() = 0;
  /// Action probabilities for `obs`; advances the hidden state.
  virtual std::vector<double> act(std::span<const double> obs) = 0;
  /// State value of `obs` without advancing the hidden state.
  virtual double value(std::span<const double> obs) = 0;
  /// Differentiable outputs for the observations since begin_segment().
  virtual Evaluation evaluate(Graph &g, const std::vector<std::vector<double>> &obs) = 0;
  virtual std::vector<Parameter *> parameters() = 0;
  /// Parameter sets whose gradient norms are clipped independently.
  virtual std::vector<std::vector<Parameter *>> clip_groups() { return {parameters()}; }
};

/// Separate actor and critic MLPs on a Markovian (augmented) state.
class MlpActorCritic final : public ActorCritic {
public:
  MlpActorCritic(std::size_t input_dim, std::size_t actions, std::size_t hidden,
                 std::mt19937_64 &rng);

  [[nodiscard]] std::size_t input_dim() const override { return actor_.in(); }
  [[nodiscard]] std::size_t num_actions() const override { return actor_.out(); }
  void reset() override {}
  void begin_segment() override {}
  std::vector<double> act(std::span<const double> obs) override;
  double value(std::span<const double> obs) override;
  Evaluation evaluate(Graph &g, const std::vector<std::vector<double>> &obs) override;
  std::vector<Parameter *> parameters() override;
  /// Actor and critic separately, so large value errors cannot shrink the
  /// policy step.
  std::vector<std::vector<Parameter *>> clip_groups() override;

private:
  diff::Mlp actor_;
  diff::Mlp critic_;
};

/// Stacked LSTM trunk with linear policy and value heads. Gradients are
/// truncated at segment boundaries.
class LstmActorCritic final : public ActorCritic {
public:
  LstmActorCritic(std::size_t input_dim, std::size_t actions, std::size_t hidden,
                  std::size_t layers, std::mt19937_64 &rng);

  [[nodiscard]] std::size_t input_dim() const override { return input_dim_; }
  [[nodiscard]] std::size_t num_actions() const override { return policy_.out(); }
  void reset() override;
  void begin_segment() override;
  std::vector<double> act(std::span<const double> obs) override;
  double value(std::span<const double> obs) override;
  Evaluation evaluate(Graph &g, const std::vector<std::vector<double>> &obs) override;
  std::vector<Parameter *> parameters() override;

private:
  struct Memory {
    std::vector<Tensor> h, c;
  };
  diff::Lstm::State load(Graph &g, const Memory &m) const;
  static Memory save(const diff::Lstm::State &s);

  std::size_t input_dim_;
  diff::Lstm lstm_;
  diff::Linear policy_;
  diff::Linear critic_;
  Memory current_;
  Memory segment_start_;
};

/// One n-step rollout piece. obs[i] is the input at which actions[i] was
/// taken; rewards[i] followed it.
struct Segment {
  std::vector<std::vector<double>> obs;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  /// Value estimate of the state after the last step; ignored when terminal.
  double bootstrap = 0.0;
  bool terminal = false;
};

struct A2CLosses {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  /// Largest per-group gradient norm before clipping.
  double grad_norm = 0.0;
};

/// Discounted n-step targets R_i = r_i + gamma R_{i+1}, seeded with the
/// bootstrap (zero at a terminal).
std::vector<double> nstep_returns(const Segment &segment, double gamma);

/// total = coef_actor * policy + coef_critic * value - coef_entropy * entropy,
/// followed by per-group gradient clipping and one optimizer step.
A2CLosses a2c_update(ActorCritic &net, diff::Adam &optimizer, const Segment &segment,
                     const TrainConfig &config);

/// Environment encoding followed by the machine-state vector.
std::vector<double> augment_state(std::span<const double> env_state,
                                  std::span<const double> machine_state);

/// Index drawn from a categorical distribution.
std::size_t sample_action(std::span<const double> probs, std::mt19937_64 &rng);

} // namespace nrm::rl
