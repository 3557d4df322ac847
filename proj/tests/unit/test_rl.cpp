#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "nrm/errors.hpp"
#include "nrm/ltlf/formula.hpp"
#include "nrm/rl/experiment.hpp"

using namespace nrm::rl;
using nrm::grid::default_config;

namespace {

nrm::automata::MooreMachine task_machine(int t) {
  return nrm::ltlf::compile(nrm::ltlf::parse(nrm::ltlf::task_formula(t)),
                            nrm::ltlf::default_alphabet());
}

TrainConfig short_config(std::size_t episodes) {
  TrainConfig c;
  c.episodes = episodes;
  return c;
}

EpisodeTrace trace_with_return(double r) {
  EpisodeTrace t;
  t.x_s = {{0.0, 0.0}};
  t.x_r = {0};
  t.episode_return = r;
  return t;
}

double sum(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST_CASE("augmented states") {
  GridWorld env(default_config(), task_machine(1));
  const std::size_t nq = env.machine().num_states();
  const auto s0 = env.reset();

  ExactTracker exact(env);
  auto x = exact.reset(env, s0);
  REQUIRE(x.size() == env.state_dim() + nq);
  CHECK(x[env.state_dim() + env.machine().initial()] == 1.0);
  CHECK(sum({x.begin() + 2, x.end()}) == 1.0);

  std::mt19937_64 rng(1);
  nrm::neural::NeuralGrounder g(2, env.machine().num_symbols(), rng);
  GroundedTracker grounded(env, g);
  CHECK(grounded.dim() == env.state_dim() + nq);
  grounded.reset(env, s0);
  for (auto a : {nrm::grid::Action::Down, nrm::grid::Action::Down, nrm::grid::Action::Right}) {
    auto y = grounded.step(env, env.step(a));
    CHECK(sum({y.begin() + 2, y.end()}) == doctest::Approx(1.0).epsilon(1e-12));
  }

  RawTracker raw(env);
  CHECK(raw.reset(env, s0) == s0);
  CHECK(augment_state(std::vector<double>{1, 2}, std::vector<double>{3}) ==
        std::vector<double>{1, 2, 3});
}

TEST_CASE("oracle grounding reproduces the exact machine state") {
  GridWorld env(default_config(), task_machine(3));
  auto oracle = cell_oracle(env);
  ExactTracker exact(env);
  GroundedTracker grounded(env, oracle);
  std::mt19937_64 rng(2);
  for (int episode = 0; episode < 20; ++episode) {
    const auto s0 = env.reset();
    REQUIRE(exact.reset(env, s0) == grounded.reset(env, s0));
    while (!env.done()) {
      const auto r = env.step(static_cast<nrm::grid::Action>(rng() % 4));
      REQUIRE(exact.step(env, r) == grounded.step(env, r));
    }
  }
}

TEST_CASE("n-step returns") {
  Segment seg;
  seg.rewards = {1.0, 0.0, 2.0};
  seg.bootstrap = 10.0;
  auto r = nstep_returns(seg, 0.5);
  CHECK(r[2] == doctest::Approx(2.0 + 5.0));
  CHECK(r[1] == doctest::Approx(0.5 * 7.0));
  CHECK(r[0] == doctest::Approx(1.0 + 0.5 * 3.5));
  seg.terminal = true;
  CHECK(nstep_returns(seg, 0.5)[2] == 2.0);
}

TEST_CASE("a2c_update") {
  std::mt19937_64 rng(3);
  TrainConfig cfg;
  MlpActorCritic net(3, 4, 16, rng);
  CHECK(net.clip_groups().size() == 2);
  nrm::diff::Adam opt(net.parameters(), {cfg.lr});
  const std::vector<double> obs{0.2, 0.4, 1.0};

  SUBCASE("uniform policy entropy") {
    auto ps = net.parameters();
    ps[4]->value.fill(0.0); // last actor layer
    ps[5]->value.fill(0.0);
    CHECK(net.act(obs) == std::vector<double>(4, 0.25));
    Segment seg{{obs}, {1}, {0.0}, 0.0, true};
    auto losses = a2c_update(net, opt, seg, cfg);
    CHECK(losses.entropy == doctest::Approx(std::log(4.0)));
  }
  SUBCASE("zero advantage") {
    Segment seg{{obs}, {2}, {net.value(obs)}, 0.0, true};
    auto losses = a2c_update(net, opt, seg, cfg);
    CHECK(std::abs(losses.policy) < 1e-12);
    CHECK(losses.value < 1e-20);
  }
  SUBCASE("value loss falls on a fixed reward") {
    Segment seg{{obs, obs}, {0, 3}, {1.0, 1.0}, 0.0, true};
    const double first = a2c_update(net, opt, seg, cfg).value;
    double last = first;
    for (int i = 0; i < 50; ++i)
      last = a2c_update(net, opt, seg, cfg).value;
    CHECK(last < 0.5 * first);
  }
  SUBCASE("bad segment") {
    Segment seg{{obs}, {0, 1}, {0.0}, 0.0, true};
    CHECK_THROWS_AS(a2c_update(net, opt, seg, cfg), nrm::InputError);
  }
}

TEST_CASE("recurrent actor-critic") {
  std::mt19937_64 rng(4);
  LstmActorCritic net(2, 4, 8, 2, rng);
  CHECK(net.clip_groups().size() == 1);
  const std::vector<std::vector<double>> obs{{0.0, 0.0}, {0.25, 0.0}, {0.25, 0.25}};
  net.reset();
  net.act(obs[0]);
  net.begin_segment();
  // value() peeks without moving the hidden state
  const double v = net.value(obs[1]);
  CHECK(net.value(obs[1]) == v);
  std::vector<std::vector<double>> acted;
  for (std::size_t i = 1; i < obs.size(); ++i)
    acted.push_back(net.act(obs[i]));
  Graph g;
  auto ev = net.evaluate(g, {obs.begin() + 1, obs.end()});
  const auto probs = nrm::diff::softmax(ev.logits).value();
  for (std::size_t t = 0; t < acted.size(); ++t)
    for (std::size_t a = 0; a < 4; ++a)
      CHECK(probs.at(t, a) == doctest::Approx(acted[t][a]).epsilon(1e-12));
  CHECK(ev.values.value()[0] == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("sampling") {
  std::mt19937_64 rng(5);
  std::vector<int> counts(3);
  for (int i = 0; i < 30000; ++i)
    ++counts[sample_action(std::vector<double>{0.2, 0.0, 0.8}, rng)];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[0] / 30000.0 - 0.2) < 0.01);
  CHECK_THROWS_AS(sample_action(std::vector<double>{}, rng), nrm::InputError);
}

TEST_CASE("grounder buffer") {
  GrounderBuffer buf(60, 60);
  buf.add(trace_with_return(5.0));
  CHECK(buf.size() == 1);
  CHECK(buf.contents().size() == 1);

  std::mt19937_64 rng(6);
  double best = 5.0;
  for (int i = 1; i < 500; ++i) {
    const double r = std::uniform_real_distribution<double>(0, 100)(rng);
    best = std::max(best, r);
    buf.add(trace_with_return(r));
    REQUIRE(buf.size() <= 120);
    REQUIRE(buf.contents().size() == buf.size());
  }
  CHECK(*buf.best_return() == best);
  const auto all = buf.contents();
  CHECK(std::any_of(all.begin(), all.end(),
                    [&](const EpisodeTrace &t) { return t.episode_return == best; }));

  // one episode that is both recent and elite is stored once
  GrounderBuffer small(2, 2);
  small.add(trace_with_return(1.0));
  small.add(trace_with_return(2.0));
  CHECK(small.size() == 2);
  small.add(trace_with_return(0.0));
  CHECK(small.size() == 3);
}

TEST_CASE("curves") {
  CHECK(smooth({1, 2, 3, 4}, 2) == std::vector<double>{1, 1.5, 2.5, 3.5});
  CHECK(final_mean({1, 2, 3, 4}, 3) == 3.0);
  CHECK(final_mean({4}, 100) == 4.0);
  CHECK_THROWS_AS(final_mean({}, 3), nrm::InputError);

  auto s = summarize({{0, 2}, {2, 4}, {1, 0}}, 1);
  CHECK(s.mean == std::vector<double>{1, 2});
  CHECK(s.min == std::vector<double>{0, 0});
  CHECK(s.max == std::vector<double>{2, 4});
  CHECK_THROWS_AS(summarize({{1, 2}, {1}}, 1), nrm::InputError);

  std::stringstream csv;
  write_returns_csv(csv, {0.1, 50.0, -1.0 / 3.0});
  CHECK(read_returns_csv(csv) == std::vector<double>{0.1, 50.0, -1.0 / 3.0});
  std::stringstream empty("episode,return\n");
  CHECK_THROWS_AS(read_returns_csv(empty), nrm::InputError);
  std::stringstream bad("episode,return\n0,x\n");
  CHECK_THROWS_AS(read_returns_csv(bad), nrm::InputError);

  const auto one = render_svg({{"rm", summarize({{1, 2, 3}}, 2), 1}}, "t");
  CHECK(one.find("<polyline") != std::string::npos);
  CHECK(one.find("<polygon") == std::string::npos);
  const auto three = render_svg({{"a<b", summarize({{1, 2}, {2, 3}, {0, 1}}, 2), 3}}, "t");
  CHECK(three.find("<polygon") != std::string::npos);
  CHECK(three.find("a&lt;b") != std::string::npos);
}

TEST_CASE("configuration checks") {
  CHECK(parse_agent("NRM") == AgentKind::NRM);
  CHECK_THROWS_AS(parse_agent("dqn"), nrm::InputError);
  TrainConfig c;
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), nrm::InputError);
  c = TrainConfig{};
  c.n_step = 0;
  CHECK_THROWS_AS(c.validate(), nrm::InputError);
}

TEST_CASE("experiments") {
  const auto m = task_machine(1);
  RunOptions rm{AgentKind::RM, 7, short_config(200)};

  SUBCASE("oracle-grounded NRM matches RM exactly") {
    RunOptions nrm = rm;
    nrm.agent = AgentKind::NRM;
    nrm.oracle_grounding = true;
    CHECK(run_experiment(default_config(), m, nrm).returns ==
          run_experiment(default_config(), m, rm).returns);
  }
  SUBCASE("reproducible and seed dependent") {
    RunOptions nrm{AgentKind::NRM, 3, short_config(130)};
    const auto a = run_experiment(default_config(), m, nrm);
    const auto b = run_experiment(default_config(), m, nrm);
    CHECK(a.returns == b.returns);
    CHECK(a.grounder_losses == b.grounder_losses);
    REQUIRE(a.grounder_losses.size() == 1);
    nrm.seed = 4;
    CHECK(run_experiment(default_config(), m, nrm).returns != a.returns);

    RunOptions rnn{AgentKind::RNN, 3, short_config(20)};
    CHECK(run_experiment(default_config(), m, rnn).returns ==
          run_experiment(default_config(), m, rnn).returns);
  }
  SUBCASE("the RM agent learns Task 1") {
    rm.train.episodes = 500;
    CHECK(final_mean(run_experiment(default_config(), m, rm).returns, 100) >= 90.0);
  }
}
