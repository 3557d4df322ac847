#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "config.hpp"
#include "nrm/errors.hpp"
#include "nrm/ltlf/formula.hpp"

using namespace nrm::cli;
using nrm::rl::AgentKind;

namespace {

std::size_t error_line(const std::string &text) {
  try {
    parse_config(text);
  } catch (const nrm::ParseError &e) {
    return e.position();
  }
  return 0;
}

} // namespace

TEST_CASE("config files") {
  const auto cfg = parse_config(R"(nrm-experiment v1
# Task 4, two agents
[task]
task = 4
alphabet = a, b, c, d, e

[grid]
horizon = 40   # shorter episodes

[run]
agents = RM,nrm
seeds = 5,6

[train]
episodes = 250
gamma = 0.95
grounder_period = 50
)");
  CHECK(cfg.task == "4");
  CHECK(cfg.alphabet == nrm::ltlf::default_alphabet());
  CHECK(cfg.grid.horizon == 40);
  CHECK(cfg.grid.items == nrm::grid::default_config().items);
  CHECK(cfg.agents == std::vector{AgentKind::RM, AgentKind::NRM});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{5, 6});
  CHECK(cfg.train.episodes == 250);
  CHECK(cfg.train.gamma == 0.95);
  CHECK(cfg.train.grounder_period == 50);
  CHECK(cfg.train.lr == nrm::rl::TrainConfig{}.lr);

  SUBCASE("defaults") {
    const auto d = parse_config("nrm-experiment v1\n");
    CHECK(d.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(d.agents.size() == 3);
  }
  SUBCASE("errors name the line") {
    CHECK(error_line("") == 0);
    CHECK(error_line("nrm-experiment v2\n") == 1);
    CHECK(error_line("nrm-experiment v1\n[train]\nwindow = 10\nlearning_rate = 1\n") == 4);
    CHECK(error_line("nrm-experiment v1\n[train]\nwindow = 10\nwindow = 20\n") == 4);
    CHECK(error_line("nrm-experiment v1\n[model]\n") == 2);
    CHECK(error_line("nrm-experiment v1\nepisodes = 3\n") == 2);
    CHECK(error_line("nrm-experiment v1\n[train]\nepisodes = many\n") == 3);
    CHECK(error_line("nrm-experiment v1\n[train]\nepisodes\n") == 3);
    CHECK(error_line("nrm-experiment v1\n[run]\nagents = rm,dqn\n") == 3);
    CHECK_THROWS_AS(parse_config("nrm-experiment v1\n[train]\ngamma = 2\n"), nrm::ParseError);
  }
  SUBCASE("format round trip") {
    auto copy = cfg;
    copy.train.lr = 1.0 / 3.0;
    const auto dir = std::filesystem::temp_directory_path() / "nrm_config_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream map(dir / "layout.txt");
      map << nrm::grid::format_map(copy.grid);
    }
    const auto back = parse_config(format_config(copy, "layout.txt"), dir);
    CHECK(back.task == copy.task);
    CHECK(back.alphabet == copy.alphabet);
    CHECK(back.agents == copy.agents);
    CHECK(back.seeds == copy.seeds);
    CHECK(back.train.lr == copy.train.lr);
    CHECK(back.train.grounder_period == copy.train.grounder_period);
    CHECK(back.grid.horizon == 40);
    auto items = back.grid.items, expected = copy.grid.items;
    std::sort(items.begin(), items.end());
    std::sort(expected.begin(), expected.end());
    CHECK(items == expected);
    CHECK(format_config(back, "layout.txt") == format_config(copy, "layout.txt"));
    std::filesystem::remove_all(dir);
  }
  SUBCASE("a bad file through load_config") {
    CHECK_THROWS_AS(load_config(NRM_GOLDEN_DIR "/unknown_key.ini"), nrm::ParseError);
    CHECK_THROWS_AS(load_config(NRM_GOLDEN_DIR "/missing.ini"), nrm::InputError);
  }
}

TEST_CASE("command-line values") {
  CHECK(resolve_task("3") == nrm::ltlf::task_formula(3));
  CHECK(resolve_task("F(a)") == "F(a)");
  CHECK_THROWS_AS(resolve_task("0"), nrm::InputError);
  CHECK_THROWS_AS(resolve_task(" "), nrm::InputError);
  CHECK(parse_seeds("0, 1,2") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK_THROWS_AS(parse_seeds("1,-2"), nrm::InputError);
  CHECK_THROWS_AS(parse_seeds(","), nrm::InputError);
  CHECK(parse_agents("rnn") == std::vector{AgentKind::RNN});
}
