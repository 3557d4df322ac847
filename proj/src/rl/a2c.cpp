#include "nrm/rl/a2c.hpp"

#include <algorithm>
#include <cmath>

#include "nrm/errors.hpp"

namespace nrm::rl {

namespace {

Tensor row_tensor(std::span<const double> v) { return Tensor({1, v.size()}, {v.begin(), v.end()}); }

Tensor stack(const std::vector<std::vector<double>> &rows) {
  if (rows.empty())
    throw InputError("empty observation sequence");
  std::vector<double> data;
  for (const auto &r : rows) {
    if (r.size() != rows.front().size())
      throw InputError("observations differ in size");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), rows.front().size()}, std::move(data));
}

} // namespace

void TrainConfig::validate() const {
  if (episodes == 0 || n_step == 0 || hidden == 0 || rnn_hidden == 0 || rnn_layers == 0 ||
      grounder_hidden == 0 || grounder_period == 0 || grounder_epochs == 0 ||
      grounder_batch == 0 || buffer_recent + buffer_elite == 0 || window == 0)
    throw InputError("training sizes must be positive");
  if (!(lr > 0.0) || !(coef_actor > 0.0) || !(coef_critic > 0.0) || !(coef_entropy >= 0.0) ||
      !(clip_norm > 0.0))
    throw InputError("training rates must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InputError("gamma must lie in (0, 1]");
}

MlpActorCritic::MlpActorCritic(std::size_t input_dim, std::size_t actions, std::size_t hidden,
                               std::mt19937_64 &rng)
    : actor_(diff::make_actor(input_dim, actions, rng, hidden)),
      critic_(diff::make_critic(input_dim, rng, hidden)) {}

std::vector<double> MlpActorCritic::act(std::span<const double> obs) {
  Graph g;
  return actor_.forward(g, g.constant(row_tensor(obs))).value().values();
}

double MlpActorCritic::value(std::span<const double> obs) {
  Graph g;
  return critic_.forward(g, g.constant(row_tensor(obs))).item();
}

Evaluation MlpActorCritic::evaluate(Graph &g, const std::vector<std::vector<double>> &obs) {
  const Value x = g.constant(stack(obs));
  return {actor_.forward_logits(g, x), critic_.forward(g, x)};
}

std::vector<std::vector<Parameter *>> MlpActorCritic::clip_groups() {
  return {actor_.parameters(), critic_.parameters()};
}

std::vector<Parameter *> MlpActorCritic::parameters() {
  auto out = actor_.parameters();
  for (Parameter *p : critic_.parameters())
    out.push_back(p);
  return out;
}

LstmActorCritic::LstmActorCritic(std::size_t input_dim, std::size_t actions, std::size_t hidden,
                                 std::size_t layers, std::mt19937_64 &rng)
    : input_dim_(input_dim), lstm_("lstm", input_dim, hidden, layers, rng),
      policy_("policy", hidden, actions, rng), critic_("value", hidden, 1, rng) {
  reset();
}

diff::Lstm::State LstmActorCritic::load(Graph &g, const Memory &m) const {
  diff::Lstm::State s;
  for (std::size_t l = 0; l < m.h.size(); ++l) {
    s.h.push_back(g.constant(m.h[l]));
    s.c.push_back(g.constant(m.c[l]));
  }
  return s;
}

LstmActorCritic::Memory LstmActorCritic::save(const diff::Lstm::State &s) {
  Memory m;
  for (std::size_t l = 0; l < s.h.size(); ++l) {
    m.h.push_back(s.h[l].value());
    m.c.push_back(s.c[l].value());
  }
  return m;
}

void LstmActorCritic::reset() {
  Graph g;
  current_ = segment_start_ = save(lstm_.zero_state(g));
}

void LstmActorCritic::begin_segment() { segment_start_ = current_; }

std::vector<double> LstmActorCritic::act(std::span<const double> obs) {
  Graph g;
  auto state = load(g, current_);
  const Value h = lstm_.step(g, g.constant(row_tensor(obs)), state);
  current_ = save(state);
  return diff::softmax(policy_.forward(g, h)).value().values();
}

double LstmActorCritic::value(std::span<const double> obs) {
  Graph g;
  auto state = load(g, current_);
  return critic_.forward(g, lstm_.step(g, g.constant(row_tensor(obs)), state)).item();
}

Evaluation LstmActorCritic::evaluate(Graph &g, const std::vector<std::vector<double>> &obs) {
  auto state = load(g, segment_start_);
  std::vector<Value> hs;
  for (const auto &o : obs)
    hs.push_back(lstm_.step(g, g.constant(row_tensor(o)), state));
  const Value h = diff::concat_rows(hs);
  return {policy_.forward(g, h), critic_.forward(g, h)};
}

std::vector<Parameter *> LstmActorCritic::parameters() {
  auto out = lstm_.parameters();
  for (Parameter *p : {&policy_.weight, &policy_.bias, &critic_.weight, &critic_.bias})
    out.push_back(p);
  return out;
}

std::vector<double> nstep_returns(const Segment &segment, double gamma) {
  std::vector<double> out(segment.rewards.size());
  double r = segment.terminal ? 0.0 : segment.bootstrap;
  for (std::size_t i = out.size(); i-- > 0;) {
    r = segment.rewards[i] + gamma * r;
    out[i] = r;
  }
  return out;
}

A2CLosses a2c_update(ActorCritic &net, diff::Adam &optimizer, const Segment &segment,
                     const TrainConfig &config) {
  const std::size_t n = segment.obs.size();
  if (n == 0 || segment.actions.size() != n || segment.rewards.size() != n)
    throw InputError("segment observations, actions and rewards differ in length");
  const auto returns = nstep_returns(segment, config.gamma);

  Graph g;
  const Evaluation ev = net.evaluate(g, segment.obs);
  const Tensor &v = ev.values.value();
  Tensor advantage({n, 1}), target({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = returns[i];
    advantage[i] = returns[i] - v[i];
  }
  // From logits, so a nearly deterministic policy keeps bounded gradients.
  const Value log_probs = diff::log_softmax(ev.logits);
  const Value probs = diff::softmax(ev.logits);
  const Value policy = diff::scale(diff::mean(diff::pick(log_probs, segment.actions) *
                                              g.constant(advantage)),
                                   -1.0);
  const Value err = g.constant(target) - ev.values;
  const Value value = diff::mean(err * err);
  const Value entropy =
      diff::scale(diff::sum(probs * log_probs), -1.0 / static_cast<double>(n));
  const Value total = diff::scale(policy, config.coef_actor) +
                      diff::scale(value, config.coef_critic) -
                      diff::scale(entropy, config.coef_entropy);

  optimizer.zero_grad();
  g.backward(total);
  A2CLosses out{policy.item(), value.item(), entropy.item(), total.item(), 0.0};
  for (const auto &group : net.clip_groups())
    out.grad_norm = std::max(out.grad_norm, diff::clip_grad_norm(group, config.clip_norm));
  optimizer.step();
  return out;
}

std::vector<double> augment_state(std::span<const double> env_state,
                                  std::span<const double> machine_state) {
  std::vector<double> out(env_state.begin(), env_state.end());
  out.insert(out.end(), machine_state.begin(), machine_state.end());
  return out;
}

std::size_t sample_action(std::span<const double> probs, std::mt19937_64 &rng) {
  if (probs.empty())
    throw InputError("no actions to sample");
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    if (u < probs[i])
      return i;
    u -= probs[i];
  }
  return probs.size() - 1;
}

} // namespace nrm::rl
