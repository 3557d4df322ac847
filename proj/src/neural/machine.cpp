#include "nrm/neural/machine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nrm/errors.hpp"

namespace nrm::neural {

namespace {

std::size_t argmax(const double *row, std::size_t n) {
  return static_cast<std::size_t>(std::max_element(row, row + n) - row);
}

// Softmax of x / tau along the last axis, without a graph.
Tensor process(const Tensor &logits, double tau) {
  Graph g;
  return diff::tau_softmax(g.constant(logits), tau).value();
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64 &rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void check_dataset(const std::vector<EpisodeTrace> &dataset, std::size_t num_classes) {
  for (const auto &tr : dataset) {
    if (tr.length() == 0)
      throw InputError("dataset contains an empty trace");
    if (tr.x_s.size() != tr.length())
      throw InputError("trace states and reward classes differ in length");
    for (ClassId c : tr.x_r)
      if (c >= num_classes)
        throw InputError("trace reward class out of range");
  }
}

} // namespace

ProbMachineParams ProbMachineParams::from_machine(const MooreMachine &m) {
  const std::size_t np = m.num_symbols(), nq = m.num_states(), nr = m.output_classes().size();
  ProbMachineParams p;
  p.alphabet = m.alphabet();
  p.classes = m.output_classes();
  Tensor mt({np, nq, nq});
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t k = 0; k < nq; ++k)
      mt[(i * nq + k) * nq + m.next(k, i)] = 1.0;
  Tensor mr({nq, nr});
  for (std::size_t k = 0; k < nq; ++k)
    mr.at(k, m.output(k)) = 1.0;
  p.mt = Parameter("mt", std::move(mt));
  p.mr = Parameter("mr", std::move(mr));
  p.q0 = Tensor({1, nq});
  p.q0[m.initial()] = 1.0;
  p.frozen_mt = p.frozen_mr = true;
  return p;
}

ProbMachineParams ProbMachineParams::learnable(std::vector<std::string> alphabet,
                                               std::vector<std::string> classes,
                                               std::size_t num_states, std::mt19937_64 &rng,
                                               double scale) {
  if (alphabet.empty() || classes.empty() || num_states == 0)
    throw InputError("learnable machine needs symbols, classes and states");
  const std::size_t np = alphabet.size(), nr = classes.size();
  std::normal_distribution<double> n(0.0, scale);
  Tensor mt({np, num_states, num_states}), mr({num_states, nr});
  for (double &v : mt.values())
    v = n(rng);
  for (double &v : mr.values())
    v = n(rng);
  ProbMachineParams p;
  p.alphabet = std::move(alphabet);
  p.classes = std::move(classes);
  p.mt = Parameter("mt", std::move(mt));
  p.mr = Parameter("mr", std::move(mr));
  p.q0 = Tensor({1, num_states});
  p.q0[0] = 1.0;
  return p;
}

Tensor ProbMachineParams::transitions() const {
  return frozen_mt ? mt.value : process(mt.value, tau);
}

Tensor ProbMachineParams::rewards() const {
  return frozen_mr ? mr.value : process(mr.value, tau);
}

Value ProbMachineParams::transitions(Graph &g) {
  return frozen_mt ? g.constant(mt.value) : diff::tau_softmax(g.param(mt), tau);
}

Value ProbMachineParams::rewards(Graph &g) {
  return frozen_mr ? g.constant(mr.value) : diff::tau_softmax(g.param(mr), tau);
}

std::vector<Parameter *> ProbMachineParams::parameters() {
  std::vector<Parameter *> out;
  if (!frozen_mt)
    out.push_back(&mt);
  if (!frozen_mr)
    out.push_back(&mr);
  return out;
}

ForwardValues forward(Graph &g, ProbMachineParams &params, Grounder &grounder,
                      const Tensor &states, std::mt19937_64 *dropout_rng) {
  if (states.rank() != 2 || states.rows() == 0)
    throw InputError("forward needs a non-empty [T, d] state sequence");
  if (states.cols() != grounder.input_dim())
    throw InputError("state encoding has width " + std::to_string(states.cols()) +
                     ", grounder expects " + std::to_string(grounder.input_dim()));
  if (grounder.num_symbols() != params.num_symbols())
    throw InputError("grounder and machine disagree on the number of symbols");
  const Value mt = params.transitions(g);
  const Value mr = params.rewards(g);
  const Value x_pp = grounder.ground(g, states, dropout_rng);
  std::vector<Value> qs;
  qs.reserve(states.rows());
  Value q = g.constant(params.q0);
  for (std::size_t t = 0; t < states.rows(); ++t) {
    q = diff::mixture_transition(diff::slice_rows(x_pp, t, t + 1), q, mt);
    qs.push_back(q);
  }
  const Value x_qp = diff::concat_rows(qs);
  return {x_pp, x_qp, diff::matmul(x_qp, mr)};
}

ProbTraces forward(ProbMachineParams &params, Grounder &grounder,
                   const std::vector<std::vector<double>> &x_s) {
  Graph g;
  auto v = forward(g, params, grounder, stack_states(x_s));
  return {v.x_pp.value(), v.x_qp.value(), v.x_rp.value()};
}

std::vector<double> advance(const Tensor &mt, std::span<const double> p,
                            std::span<const double> q) {
  const std::size_t np = mt.dim(0), nq = mt.dim(1);
  if (p.size() != np || q.size() != nq)
    throw InputError("advance: vector sizes do not match the transitions");
  std::vector<double> out(nq, 0.0);
  for (std::size_t i = 0; i < np; ++i) {
    if (p[i] == 0.0)
      continue;
    for (std::size_t k = 0; k < nq; ++k) {
      const double w = p[i] * q[k];
      if (w == 0.0)
        continue;
      const double *row = mt.data() + (i * nq + k) * nq;
      for (std::size_t j = 0; j < nq; ++j)
        out[j] += w * row[j];
    }
  }
  return out;
}

Value sg_loss(Graph &g, ProbMachineParams &params, Grounder &grounder, const EpisodeTrace &trace,
              std::mt19937_64 *dropout_rng) {
  check_dataset({trace}, params.num_classes());
  auto v = forward(g, params, grounder, stack_states(trace.x_s), dropout_rng);
  return diff::cross_entropy_probs(v.x_rp, trace.x_r);
}

double sg_loss(ProbMachineParams &params, Grounder &grounder, const EpisodeTrace &trace) {
  Graph g;
  return sg_loss(g, params, grounder, trace).item();
}

double mean_sg_loss(ProbMachineParams &params, Grounder &grounder,
                    const std::vector<EpisodeTrace> &traces) {
  if (traces.empty())
    return 0.0;
  double total = 0.0;
  for (const auto &tr : traces)
    total += sg_loss(params, grounder, tr);
  return total / static_cast<double>(traces.size());
}

namespace {

// One pass over the dataset in shuffled mini-batches; returns the mean loss.
double run_epoch(ProbMachineParams &params, Grounder &grounder,
                 const std::vector<EpisodeTrace> &dataset, diff::Adam &optimizer,
                 std::mt19937_64 &rng, std::size_t batch_size, bool use_dropout) {
  const auto order = shuffled(dataset.size(), rng);
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    optimizer.zero_grad();
    Graph g;
    std::vector<Value> losses;
    for (std::size_t k = start; k < end; ++k)
      losses.push_back(sg_loss(g, params, grounder, dataset[order[k]],
                               use_dropout ? &rng : nullptr));
    const Value batch = diff::mean(diff::concat_rows(losses));
    g.backward(batch);
    optimizer.step();
    total += batch.item() * static_cast<double>(end - start);
  }
  return total / static_cast<double>(dataset.size());
}

} // namespace

TrainReport train_grounder(ProbMachineParams &params, Grounder &grounder,
                           const std::vector<EpisodeTrace> &dataset, diff::Adam &optimizer,
                           std::mt19937_64 &rng, const GrounderTraining &options) {
  TrainReport report;
  if (dataset.empty())
    return report;
  if (options.batch_size == 0)
    throw InputError("batch size must be positive");
  check_dataset(dataset, params.num_classes());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss = run_epoch(params, grounder, dataset, optimizer, rng, options.batch_size,
                                  options.use_dropout);
    report.epoch_losses.push_back(loss);
    if (options.target_loss > 0.0 && loss <= options.target_loss)
      break;
    if (loss < best - options.min_delta) {
      best = loss;
      best_epoch = epoch;
    } else if (options.patience > 0 && epoch - best_epoch >= options.patience) {
      break;
    }
  }
  return report;
}

PureLearningResult pure_learning(const std::vector<EpisodeTrace> &dataset,
                                 std::vector<std::string> alphabet,
                                 std::vector<std::string> classes, std::size_t num_states,
                                 Grounder &grounder, std::mt19937_64 &rng,
                                 const PureLearningOptions &options) {
  if (dataset.empty())
    throw InputError("pure learning needs a non-empty dataset");
  check_dataset(dataset, classes.size());
  PureLearningResult result{ProbMachineParams::learnable(std::move(alphabet), std::move(classes),
                                                         num_states, rng, options.init_scale),
                            {}};
  auto &params = result.params;
  std::vector<Parameter *> trainable = params.parameters();
  for (Parameter *p : grounder.parameters())
    trainable.push_back(p);
  diff::Adam optimizer(trainable, {options.lr});
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    params.tau = std::max(options.tau_min, std::pow(options.tau_decay, static_cast<double>(epoch)));
    result.epoch_losses.push_back(
        run_epoch(params, grounder, dataset, optimizer, rng, options.batch_size, false));
  }
  return result;
}

MooreMachine extract_machine(const ProbMachineParams &params) {
  const Tensor mt = params.transitions();
  const Tensor mr = params.rewards();
  const std::size_t np = params.num_symbols(), nq = params.num_states(), nr = params.num_classes();
  std::vector<automata::StateId> delta(nq * np);
  for (std::size_t k = 0; k < nq; ++k)
    for (std::size_t i = 0; i < np; ++i)
      delta[k * np + i] = argmax(mt.data() + (i * nq + k) * nq, nq);
  std::vector<ClassId> outputs(nq);
  for (std::size_t k = 0; k < nq; ++k)
    outputs[k] = argmax(mr.data() + k * nr, nr);
  return MooreMachine(params.alphabet, nq, argmax(params.q0.data(), nq), std::move(delta),
                      std::move(outputs), params.classes);
}

double urs_corrected_accuracy(std::span<const SymbolId> predicted,
                              std::span<const SymbolId> labels, std::span<const SymbolMap> urs) {
  if (predicted.size() != labels.size())
    throw InputError("predictions and labels differ in length");
  if (predicted.empty())
    throw InputError("no labeled states");
  if (urs.empty())
    throw InputError("the URS set is empty");
  double best = 0.0;
  for (const auto &alpha : urs) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      hits += alpha.image.at(predicted[i]) == labels[i];
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(predicted.size()));
  }
  return best;
}

double urs_corrected_accuracy(Grounder &grounder, const std::vector<std::vector<double>> &states,
                              std::span<const SymbolId> labels, std::span<const SymbolMap> urs) {
  const auto predicted = grounder.predict(stack_states(states));
  return urs_corrected_accuracy(predicted, labels, urs);
}

} // namespace nrm::neural
