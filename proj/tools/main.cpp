// nrm: compile task formulas, search reasoning shortcuts, ground symbols and
// train agents. Exit codes: 0 success, 1 usage error, 2 bad data or task.
#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "nrm/errors.hpp"
#include "nrm/ltlf/formula.hpp"
#include "nrm/seeding.hpp"
#include "nrm/urs/search.hpp"

namespace fs = std::filesystem;
using namespace nrm;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!(out << text))
    throw InputError("cannot write " + path);
}

automata::MooreMachine load_machine(const std::string &path) {
  return automata::deserialize(read_file(path));
}

grid::GridConfig load_grid(const std::string &map) {
  return map.empty() || map == "default" ? grid::default_config() : grid::load_map(map);
}

// ---- compile ---------------------------------------------------------------

struct CompileArgs {
  std::string formula;
  std::string alphabet = "a,b,c,d,e";
  std::string dot, machine;
};

int run_compile(const CompileArgs &a) {
  const auto m = ltlf::compile(ltlf::parse(a.formula), cli::split_list(a.alphabet));
  if (!a.dot.empty())
    write_file(a.dot, automata::export_dot(m));
  if (!a.machine.empty())
    write_file(a.machine, automata::serialize(m));
  if (a.dot.empty() && a.machine.empty())
    std::cout << automata::serialize(m);
  else
    std::cerr << m.num_states() << " states, " << m.output_classes().size()
              << " reward classes\n";
  return 0;
}

// ---- urs -------------------------------------------------------------------

struct UrsArgs {
  std::string machine;
  std::string oracle = "none";
  unsigned jobs = 1;
  std::string out, timings;
};

std::string map_names(const automata::MooreMachine &m, const automata::SymbolMap &alpha) {
  std::string s;
  for (std::size_t p = 0; p < alpha.size(); ++p)
    s += (p ? " " : "") + m.alphabet()[alpha(p)];
  return s;
}

int run_urs(const UrsArgs &a) {
  const auto m = load_machine(a.machine);
  urs::SearchOptions options;
  options.jobs = std::max(1u, a.jobs);
  const auto report = urs::find_urs(m, options);

  std::optional<std::vector<automata::SymbolMap>> oracle;
  double oracle_seconds = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  if (a.oracle == "exact") {
    oracle = urs::urs_oracle_exact(m, options.jobs);
  } else if (a.oracle.rfind("bounded", 0) == 0) {
    std::size_t len = m.num_states() * m.num_states();
    if (a.oracle.size() > 7) {
      if (a.oracle[7] != ':')
        throw CLI::ValidationError("--oracle", "expected exact, bounded[:L] or none");
      len = std::stoul(a.oracle.substr(8));
    }
    oracle = urs::urs_oracle_bounded(m, len, options.jobs);
  } else if (a.oracle != "none") {
    throw CLI::ValidationError("--oracle", "expected exact, bounded[:L] or none");
  }
  oracle_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // The report holds nothing time-dependent, so equal inputs give equal bytes.
  std::ostringstream csv;
  csv << "alpha,survived,iterations\n";
  for (const auto &c : report.candidates)
    csv << map_names(m, c.alpha) << "," << (c.survived ? 1 : 0) << "," << c.iterations << "\n";
  csv << "count," << report.count() << "," << report.max_iterations << "\n";
  if (a.out.empty())
    std::cout << csv.str();
  else
    write_file(a.out, csv.str());

  char line[160];
  std::snprintf(line, sizeof line, "count %zu, search %.6f s, oracle %s %.6f s\n", report.count(),
                report.seconds, a.oracle.c_str(), oracle_seconds);
  std::cerr << line;
  if (!a.timings.empty()) {
    std::snprintf(line, sizeof line, "count,algorithm_seconds,oracle,oracle_seconds\n%zu,%.6f,%s,%.6f\n",
                  report.count(), report.seconds, a.oracle.c_str(), oracle_seconds);
    write_file(a.timings, line);
  }
  if (oracle && *oracle != report.surviving) {
    std::cerr << "error: the oracle finds " << oracle->size() << " maps, the search "
              << report.count() << "\n";
    return kDataError;
  }
  return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string machine, map, out;
  std::string policy = "mixture";
  std::size_t episodes = 500;
  double epsilon = 0.3;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs &a) {
  const auto m = load_machine(a.machine);
  grid::SynthOptions options;
  options.epsilon = a.epsilon;
  if (a.policy == "random")
    options.policy = grid::SynthPolicy::Random;
  else if (a.policy == "epsilon")
    options.policy = grid::SynthPolicy::EpsilonOptimal;
  else if (a.policy != "mixture")
    throw CLI::ValidationError("--policy", "expected random, epsilon or mixture");
  std::mt19937_64 rng(derive_seed(a.seed, kDataStream));
  const auto traces = grid::synth_dataset(load_grid(a.map), m, a.episodes, rng, options);
  if (a.out.empty())
    grid::write_traces_csv(std::cout, traces);
  else
    grid::write_traces_csv(a.out, traces);
  return 0;
}

// ---- ground ----------------------------------------------------------------

struct GroundArgs {
  std::string machine, traces, out, map;
  std::size_t epochs = 100, batch = 8, hidden = 64, patience = 5;
  double lr = 4e-4;
  std::uint64_t seed = 0;
};

int run_ground(const GroundArgs &a) {
  const auto m = load_machine(a.machine);
  const auto data = grid::read_traces_csv(a.traces);
  if (data.empty() || data.front().x_s.empty())
    throw InputError(a.traces + " holds no steps");
  std::mt19937_64 weight_rng(derive_seed(a.seed, kWeightsStream));
  std::mt19937_64 rng(derive_seed(a.seed, kGrounderStream));
  auto params = neural::ProbMachineParams::from_machine(m);
  neural::NeuralGrounder grounder(data.front().x_s.front().size(), m.num_symbols(), weight_rng,
                                  a.hidden);
  diff::Adam opt(grounder.parameters(), {a.lr});
  neural::GrounderTraining options;
  options.epochs = a.epochs;
  options.batch_size = a.batch;
  options.patience = a.patience;
  const auto report = neural::train_grounder(params, grounder, data, opt, rng, options);

  char line[128];
  std::snprintf(line, sizeof line, "epochs %zu, loss %.6f\n", report.epochs_run(),
                report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back());
  std::cout << line;
  if (!a.map.empty()) {
    const grid::GridWorld env(load_grid(a.map), m);
    std::vector<std::vector<double>> states;
    std::vector<automata::SymbolId> labels;
    for (std::size_t y = 0; y < env.config().height; ++y)
      for (std::size_t x = 0; x < env.config().width; ++x) {
        states.push_back(env.encode({x, y}));
        labels.push_back(env.label({x, y}));
      }
    const auto urs_set = urs::find_urs(m).surviving;
    std::snprintf(line, sizeof line, "cell accuracy %.4f\n",
                  neural::urs_corrected_accuracy(grounder, states, labels, urs_set));
    std::cout << line;
  }
  if (!a.out.empty()) {
    auto tensors = grounder.parameters();
    tensors.insert(tensors.begin(), {&params.mt, &params.mr});
    diff::save_parameters(a.out, tensors);
  }
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config, task, agents, seeds, out, map;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  unsigned jobs = 1;
};

std::string returns_name(rl::AgentKind agent, std::uint64_t seed) {
  return std::string(rl::agent_name(agent)) + "_seed" + std::to_string(seed) + ".csv";
}

int run_train(const TrainArgs &a) {
  cli::ExperimentConfig cfg = a.config.empty() ? cli::ExperimentConfig{} : cli::load_config(a.config);
  if (!a.task.empty())
    cfg.task = a.task;
  if (!a.agents.empty())
    cfg.agents = cli::parse_agents(a.agents);
  if (!a.seeds.empty())
    cfg.seeds = cli::parse_seeds(a.seeds);
  if (a.seed)
    cfg.seeds = {*a.seed};
  if (a.episodes)
    cfg.train.episodes = *a.episodes;
  if (!a.map.empty())
    cfg.grid = load_grid(a.map);
  cfg.train.validate();

  const auto machine = ltlf::compile(ltlf::parse(cli::resolve_task(cfg.task)), cfg.alphabet);
  (void)grid::GridWorld(cfg.grid, machine); // validates the layout before any work starts
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_file((dir / "map.txt").string(), grid::format_map(cfg.grid));
  write_file((dir / "config.ini").string(), cli::format_config(cfg, "map.txt"));

  struct Job {
    rl::AgentKind agent;
    std::uint64_t seed;
    rl::RunResult result;
  };
  std::vector<Job> jobs;
  for (auto agent : cfg.agents)
    for (auto seed : cfg.seeds)
      jobs.push_back({agent, seed, {}});

  // Runs are independent; each owns its environment, networks and streams.
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        jobs[i].result =
            rl::run_experiment(cfg.grid, machine, {jobs[i].agent, jobs[i].seed, cfg.train});
        std::lock_guard lock(log_mutex);
        char line[96];
        std::snprintf(line, sizeof line, "%s seed %llu: final mean %.2f\n",
                      rl::agent_name(jobs[i].agent),
                      static_cast<unsigned long long>(jobs[i].seed),
                      rl::final_mean(jobs[i].result.returns, cfg.train.window));
        std::cerr << line;
      } catch (...) {
        std::lock_guard lock(log_mutex);
        failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::clamp(a.jobs, 1u, static_cast<unsigned>(jobs.size())); ++t)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);

  std::vector<rl::PlotSeries> series;
  for (auto agent : cfg.agents) {
    std::vector<std::vector<double>> runs;
    for (const auto &j : jobs) {
      if (j.agent != agent)
        continue;
      runs.push_back(j.result.returns);
      std::ofstream out(dir / returns_name(agent, j.seed));
      rl::write_returns_csv(out, j.result.returns);
      if (!j.result.grounder_losses.empty()) {
        std::ofstream g(dir / (std::string(rl::agent_name(agent)) + "_seed" +
                               std::to_string(j.seed) + "_grounder.csv"));
        g << "round,loss,cell_accuracy\n";
        char line[96];
        for (std::size_t r = 0; r < j.result.grounder_losses.size(); ++r) {
          std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", r, j.result.grounder_losses[r],
                        j.result.grounder_accuracy[r]);
          g << line;
        }
      }
    }
    auto summary = rl::summarize(runs, cfg.train.window);
    std::ofstream out(dir / (std::string(rl::agent_name(agent)) + "_summary.csv"));
    rl::write_summary_csv(out, summary);
    series.push_back({rl::agent_name(agent), std::move(summary), runs.size()});
  }
  write_file((dir / "curves.svg").string(),
             rl::render_svg(series, cli::resolve_task(cfg.task)));
  return 0;
}

// ---- plot ------------------------------------------------------------------

struct PlotArgs {
  std::vector<std::string> files;
  std::string out, label = "returns", title = "learning curve";
  std::size_t window = 100;
};

int run_plot(const PlotArgs &a) {
  std::vector<std::vector<double>> runs;
  for (const auto &f : a.files)
    runs.push_back(rl::read_returns_csv(f));
  const std::string svg =
      rl::render_svg({{a.label, rl::summarize(runs, a.window), runs.size()}}, a.title);
  if (a.out.empty())
    std::cout << svg;
  else
    write_file(a.out, svg);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Reward machines, reasoning shortcuts and neural reward machine agents", "nrm"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", "nrm 1.0");

  CompileArgs compile;
  auto *c = app.add_subcommand("compile", "Compile a task formula into a reward machine");
  c->add_option("--formula", compile.formula, "Formula, e.g. \"F(a) & F(b)\"")->required();
  c->add_option("--alphabet", compile.alphabet, "Comma-separated symbols")->capture_default_str();
  c->add_option("--dot", compile.dot, "Write Graphviz DOT here");
  c->add_option("--machine", compile.machine, "Write the machine (.mm) here");

  UrsArgs urs_args;
  auto *u = app.add_subcommand("urs", "Find the unremovable reasoning shortcuts of a machine");
  u->add_option("--machine", urs_args.machine, "Machine file (.mm)")->required()->check(CLI::ExistingFile);
  u->add_option("--oracle", urs_args.oracle, "Cross-check with exact, bounded[:L] or none")
      ->capture_default_str();
  u->add_option("--jobs", urs_args.jobs, "Worker threads")->capture_default_str();
  u->add_option("--out", urs_args.out, "Report CSV (stdout when omitted)");
  u->add_option("--timings", urs_args.timings, "Write wall-clock times as CSV here");

  SynthArgs synth;
  auto *s = app.add_subcommand("synth", "Record grid episodes of a scripted policy");
  s->add_option("--machine", synth.machine, "Reward machine (.mm)")->required()->check(CLI::ExistingFile);
  s->add_option("--map", synth.map, "Grid map file, or 'default'");
  s->add_option("--episodes", synth.episodes)->capture_default_str();
  s->add_option("--policy", synth.policy, "random, epsilon or mixture")->capture_default_str();
  s->add_option("--epsilon", synth.epsilon)->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--out", synth.out, "Trace CSV (stdout when omitted)");

  GroundArgs ground;
  auto *g = app.add_subcommand("ground", "Learn a symbol grounder from reward traces");
  g->add_option("--machine", ground.machine, "Reward machine (.mm)")->required()->check(CLI::ExistingFile);
  g->add_option("--traces", ground.traces, "Trace CSV")->required()->check(CLI::ExistingFile);
  g->add_option("--epochs", ground.epochs)->capture_default_str();
  g->add_option("--batch", ground.batch)->capture_default_str();
  g->add_option("--hidden", ground.hidden)->capture_default_str();
  g->add_option("--patience", ground.patience, "0 disables early stopping")->capture_default_str();
  g->add_option("--lr", ground.lr)->capture_default_str();
  g->add_option("--seed", ground.seed)->capture_default_str();
  g->add_option("--map", ground.map, "Report cell accuracy on this map ('default' allowed)");
  g->add_option("--out", ground.out, "Checkpoint of the machine tensors and grounder");

  TrainArgs train;
  auto *t = app.add_subcommand("train", "Train agents on a grid task");
  t->add_option("--config", train.config, "Experiment config file")->check(CLI::ExistingFile);
  t->add_option("--task", train.task, "Formula or task id 1..8");
  t->add_option("--agent,--agents", train.agents, "rm, nrm, rnn or a comma-separated list");
  auto *seeds_opt = t->add_option("--seeds", train.seeds, "Comma-separated seeds");
  t->add_option("--seed", train.seed, "Single seed")->excludes(seeds_opt);
  t->add_option("--episodes", train.episodes);
  t->add_option("--map", train.map, "Grid map file, or 'default'");
  t->add_option("--jobs", train.jobs, "Runs in parallel")->capture_default_str();
  t->add_option("--out", train.out, "Output directory")->required();

  PlotArgs plot;
  auto *p = app.add_subcommand("plot", "Plot return CSVs of one agent as an SVG");
  p->add_option("files", plot.files, "Return CSVs, one per seed")->required()->check(CLI::ExistingFile);
  p->add_option("--out", plot.out, "SVG file (stdout when omitted)");
  p->add_option("--label", plot.label)->capture_default_str();
  p->add_option("--title", plot.title)->capture_default_str();
  p->add_option("--window", plot.window, "Smoothing window")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*c)
      return run_compile(compile);
    if (*u)
      return run_urs(urs_args);
    if (*s)
      return run_synth(synth);
    if (*g)
      return run_ground(ground);
    if (*t)
      return run_train(train);
    return run_plot(plot);
  } catch (const CLI::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
}
