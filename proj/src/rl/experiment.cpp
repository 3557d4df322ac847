#include "nrm/rl/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "nrm/errors.hpp"
#include "nrm/seeding.hpp"
#include "nrm/urs/search.hpp"

namespace nrm::rl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> one_hot(std::size_t i, std::size_t n) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

} // namespace

const char *agent_name(AgentKind kind) {
  switch (kind) {
  case AgentKind::RM:
    return "rm";
  case AgentKind::NRM:
    return "nrm";
  case AgentKind::RNN:
    return "rnn";
  }
  return "?";
}

AgentKind parse_agent(const std::string &name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "rm")
    return AgentKind::RM;
  if (s == "nrm")
    return AgentKind::NRM;
  if (s == "rnn")
    return AgentKind::RNN;
  throw InputError("unknown agent '" + name + "' (expected rm, nrm or rnn)");
}

ExactTracker::ExactTracker(const GridWorld &env)
    : dim_(env.state_dim() + env.machine().num_states()) {}

std::vector<double> ExactTracker::reset(const GridWorld &env, std::span<const double> state) {
  return augment_state(state, one_hot(env.machine_state(), env.machine().num_states()));
}

std::vector<double> ExactTracker::step(const GridWorld &env, const grid::StepResult &result) {
  return augment_state(result.state, one_hot(env.machine_state(), env.machine().num_states()));
}

GroundedTracker::GroundedTracker(const GridWorld &env, neural::Grounder &grounder)
    : grounder_(&grounder), dim_(env.state_dim() + env.machine().num_states()) {
  auto params = neural::ProbMachineParams::from_machine(env.machine());
  mt_ = params.transitions();
  q0_ = params.q0.values();
  q_ = q0_;
}

std::vector<double> GroundedTracker::reset(const GridWorld &, std::span<const double> state) {
  q_ = q0_;
  return augment_state(state, q_);
}

std::vector<double> GroundedTracker::step(const GridWorld &, const grid::StepResult &result) {
  q_ = neural::advance(mt_, grounder_->probabilities(result.state), q_);
  return augment_state(result.state, q_);
}

std::vector<double> RawTracker::reset(const GridWorld &, std::span<const double> state) {
  return {state.begin(), state.end()};
}

std::vector<double> RawTracker::step(const GridWorld &, const grid::StepResult &result) {
  return result.state;
}

GrounderBuffer::GrounderBuffer(std::size_t recent, std::size_t elite)
    : recent_cap_(recent), elite_cap_(elite) {}

void GrounderBuffer::add(EpisodeTrace trace) {
  Entry e{next_id_++, std::make_shared<const EpisodeTrace>(std::move(trace))};
  if (recent_cap_ > 0) {
    recent_.push_back(e);
    if (recent_.size() > recent_cap_)
      recent_.pop_front();
  }
  if (elite_cap_ > 0) {
    const double r = e.trace->episode_return;
    auto pos = std::find_if(elite_.begin(), elite_.end(),
                            [r](const Entry &x) { return x.trace->episode_return < r; });
    elite_.insert(pos, e);
    if (elite_.size() > elite_cap_)
      elite_.pop_back();
  }
}

std::vector<EpisodeTrace> GrounderBuffer::contents() const {
  std::vector<const Entry *> all;
  for (const auto &e : recent_)
    all.push_back(&e);
  for (const auto &e : elite_)
    all.push_back(&e);
  std::sort(all.begin(), all.end(), [](const Entry *a, const Entry *b) { return a->id < b->id; });
  all.erase(std::unique(all.begin(), all.end(),
                        [](const Entry *a, const Entry *b) { return a->id == b->id; }),
            all.end());
  std::vector<EpisodeTrace> out;
  out.reserve(all.size());
  for (const Entry *e : all)
    out.push_back(*e->trace);
  return out;
}

std::size_t GrounderBuffer::size() const {
  std::size_t shared = 0;
  for (const auto &e : elite_)
    shared += std::any_of(recent_.begin(), recent_.end(),
                          [&](const Entry &r) { return r.id == e.id; });
  return recent_.size() + elite_.size() - shared;
}

std::optional<double> GrounderBuffer::best_return() const {
  if (elite_.empty())
    return std::nullopt;
  return elite_.front().trace->episode_return;
}

neural::OracleGrounder cell_oracle(const GridWorld &env) {
  const GridWorld *e = &env;
  return neural::OracleGrounder(
      env.state_dim(), env.machine().num_symbols(), [e](std::span<const double> s) {
        auto cell = [](double v, std::size_t n) {
          return static_cast<std::size_t>(std::lround(v * static_cast<double>(n - 1)));
        };
        return e->label({cell(s[0], e->config().width), cell(s[1], e->config().height)});
      });
}

namespace {

// Grounding accuracy over every cell of the grid, up to the task's URS.
double cell_accuracy(const GridWorld &env, neural::Grounder &grounder,
                     const std::vector<automata::SymbolMap> &urs) {
  std::vector<std::vector<double>> states;
  std::vector<automata::SymbolId> labels;
  for (std::size_t y = 0; y < env.config().height; ++y)
    for (std::size_t x = 0; x < env.config().width; ++x) {
      states.push_back(env.encode({x, y}));
      labels.push_back(env.label({x, y}));
    }
  return neural::urs_corrected_accuracy(grounder, states, labels, urs);
}

} // namespace

RunResult run_experiment(const grid::GridConfig &grid, const automata::MooreMachine &machine,
                         const RunOptions &options) {
  const TrainConfig &cfg = options.train;
  cfg.validate();
  GridWorld env(grid, machine);
  std::mt19937_64 weight_rng(derive_seed(options.seed, kWeightsStream));
  std::mt19937_64 explore_rng(derive_seed(options.seed, kExplorationStream));
  std::mt19937_64 grounder_rng(derive_seed(options.seed, kGrounderStream));

  std::unique_ptr<neural::Grounder> grounder;
  bool learn_grounding = false;
  std::unique_ptr<StateTracker> tracker;
  std::unique_ptr<ActorCritic> net;
  switch (options.agent) {
  case AgentKind::RM:
    tracker = std::make_unique<ExactTracker>(env);
    break;
  case AgentKind::NRM:
    learn_grounding = !options.oracle_grounding;
    if (learn_grounding)
      grounder = std::make_unique<neural::NeuralGrounder>(env.state_dim(), machine.num_symbols(),
                                                          grounder_rng, cfg.grounder_hidden);
    else
      grounder = std::make_unique<neural::OracleGrounder>(cell_oracle(env));
    tracker = std::make_unique<GroundedTracker>(env, *grounder);
    break;
  case AgentKind::RNN:
    tracker = std::make_unique<RawTracker>(env);
    break;
  }
  if (options.agent == AgentKind::RNN)
    net = std::make_unique<LstmActorCritic>(tracker->dim(), grid::kNumActions, cfg.rnn_hidden,
                                            cfg.rnn_layers, weight_rng);
  else
    net = std::make_unique<MlpActorCritic>(tracker->dim(), grid::kNumActions, cfg.hidden,
                                           weight_rng);
  diff::Adam optimizer(net->parameters(), {cfg.lr});

  // Symbol grounding state, NRM only.
  auto machine_params = neural::ProbMachineParams::from_machine(machine);
  std::unique_ptr<diff::Adam> grounder_opt;
  std::vector<automata::SymbolMap> urs;
  if (learn_grounding) {
    grounder_opt = std::make_unique<diff::Adam>(grounder->parameters(), diff::AdamConfig{cfg.lr});
    urs = urs::find_urs(machine).surviving;
  }
  GrounderBuffer buffer(cfg.buffer_recent, cfg.buffer_elite);
  neural::GrounderTraining grounding;
  grounding.epochs = cfg.grounder_epochs;
  grounding.batch_size = cfg.grounder_batch;
  grounding.patience = cfg.grounder_patience;
  grounding.target_loss = cfg.grounder_target_loss;

  RunResult result;
  result.returns.reserve(cfg.episodes);
  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    const auto s0 = env.reset();
    net->reset();
    std::vector<double> obs = tracker->reset(env, s0);
    EpisodeTrace trace;
    while (!env.done()) {
      net->begin_segment();
      Segment seg;
      while (seg.obs.size() < cfg.n_step && !env.done()) {
        const auto probs = net->act(obs);
        const std::size_t a = sample_action(probs, explore_rng);
        const auto step = env.step(static_cast<grid::Action>(a));
        seg.obs.push_back(std::move(obs));
        seg.actions.push_back(a);
        seg.rewards.push_back(step.reward);
        trace.x_s.push_back(step.state);
        trace.x_r.push_back(step.reward_class);
        trace.scalar_rewards.push_back(step.reward);
        trace.x_p.push_back(step.symbol);
        trace.cells.push_back(env.position());
        trace.episode_return += step.reward;
        obs = tracker->step(env, step);
      }
      // A horizon cut-off is not a terminal: time is not part of the state, so
      // the return is bootstrapped as for any other segment end.
      seg.terminal = env.done() && env.is_terminal(env.machine_state());
      if (!seg.terminal)
        seg.bootstrap = net->value(obs);
      a2c_update(*net, optimizer, seg, cfg);
    }
    result.returns.push_back(trace.episode_return);
    if (learn_grounding) {
      buffer.add(std::move(trace));
      if ((episode + 1) % cfg.grounder_period == 0) {
        const auto data = buffer.contents();
        neural::train_grounder(machine_params, *grounder, data, *grounder_opt, grounder_rng,
                               grounding);
        result.grounder_losses.push_back(neural::mean_sg_loss(machine_params, *grounder, data));
        result.grounder_accuracy.push_back(cell_accuracy(env, *grounder, urs));
      }
    }
  }
  return result;
}

std::vector<double> smooth(const std::vector<double> &values, std::size_t window) {
  if (window == 0)
    throw InputError("smoothing window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window)
      sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

double final_mean(const std::vector<double> &values, std::size_t window) {
  if (values.empty())
    throw InputError("no values to average");
  const std::size_t n = std::min(window, values.size());
  double sum = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i)
    sum += values[i];
  return sum / static_cast<double>(n);
}

void write_returns_csv(std::ostream &out, const std::vector<double> &returns) {
  out << "episode,return\n";
  for (std::size_t i = 0; i < returns.size(); ++i)
    out << i << ',' << fmt(returns[i]) << '\n';
}

std::vector<double> read_returns_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line != "episode,return")
    throw InputError("returns CSV must start with 'episode,return'");
  std::vector<double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto comma = line.find(',');
    char *end = nullptr;
    const double v = comma == std::string::npos ? 0.0 : std::strtod(line.c_str() + comma + 1, &end);
    if (comma == std::string::npos || end == line.c_str() + comma + 1 || *end != '\0' ||
        std::stoul(line.substr(0, comma)) != out.size())
      throw InputError("malformed returns CSV at line " + std::to_string(lineno));
    out.push_back(v);
  }
  if (out.empty())
    throw InputError("returns CSV has no episodes");
  return out;
}

std::vector<double> read_returns_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path);
  return read_returns_csv(in);
}

CurveSummary summarize(const std::vector<std::vector<double>> &runs, std::size_t window) {
  if (runs.empty() || runs.front().empty())
    throw InputError("no runs to summarize");
  const std::size_t n = runs.front().size();
  std::vector<std::vector<double>> smoothed;
  for (const auto &r : runs) {
    if (r.size() != n)
      throw InputError("runs differ in length");
    smoothed.push_back(smooth(r, window));
  }
  CurveSummary s;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto &r : smoothed) {
      sum += r[i];
      lo = std::min(lo, r[i]);
      hi = std::max(hi, r[i]);
    }
    s.mean.push_back(sum / static_cast<double>(smoothed.size()));
    s.min.push_back(lo);
    s.max.push_back(hi);
  }
  return s;
}

void write_summary_csv(std::ostream &out, const CurveSummary &summary) {
  out << "episode,mean,min,max\n";
  for (std::size_t i = 0; i < summary.mean.size(); ++i)
    out << i << ',' << fmt(summary.mean[i]) << ',' << fmt(summary.min[i]) << ','
        << fmt(summary.max[i]) << '\n';
}

namespace {

constexpr const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&':
      out += "&amp;";
      break;
    case '<':
      out += "&lt;";
      break;
    case '>':
      out += "&gt;";
      break;
    case '"':
      out += "&quot;";
      break;
    default:
      out += c;
    }
  }
  return out;
}

} // namespace

std::string render_svg(const std::vector<PlotSeries> &series, const std::string &title) {
  if (series.empty())
    throw InputError("nothing to plot");
  std::size_t n = 0;
  double lo = 0.0, hi = 0.0;
  for (const auto &s : series) {
    if (s.curve.mean.empty())
      throw InputError("series '" + s.label + "' is empty");
    n = std::max(n, s.curve.mean.size());
    for (std::size_t i = 0; i < s.curve.mean.size(); ++i) {
      lo = std::min({lo, s.curve.min[i], s.curve.mean[i]});
      hi = std::max({hi, s.curve.max[i], s.curve.mean[i]});
    }
  }
  if (hi <= lo)
    hi = lo + 1.0;
  const double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](std::size_t i) {
    return left + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
  };
  auto py = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">"
    << escape(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
    << top + ph << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << left - 6 << "\" y=\"" << num(py(v) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(v)
      << "</text>\n";
  }
  o << "<text x=\"" << left << "\" y=\"" << H - 20
    << "\" font-family=\"sans-serif\" font-size=\"11\">0</text>\n";
  o << "<text x=\"" << left + pw << "\" y=\"" << H - 20
    << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << n - 1
    << "</text>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 8
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">episode</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto &s = series[k];
    const char *color = kPalette[k % std::size(kPalette)];
    const std::size_t m = s.curve.mean.size();
    if (s.seeds > 1) {
      o << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" points=\"";
      for (std::size_t i = 0; i < m; ++i)
        o << num(px(i)) << ',' << num(py(s.curve.max[i])) << ' ';
      for (std::size_t i = m; i-- > 0;)
        o << num(px(i)) << ',' << num(py(s.curve.min[i])) << (i ? " " : "");
      o << "\"/>\n";
    }
    o << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < m; ++i)
      o << num(px(i)) << ',' << num(py(s.curve.mean[i])) << (i + 1 < m ? " " : "");
    o << "\"/>\n";
    o << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 16 * static_cast<double>(k)
      << "\" fill=\"" << color << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

} // namespace nrm::rl
