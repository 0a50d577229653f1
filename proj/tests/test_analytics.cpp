#include "topogrid/analytics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "stub_envs.hpp"
#include "support.hpp"
#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"

using namespace topogrid;
using test_support::find_action_id;
using test_support::flat_scenario;
using test_support::forked_grid;
using test_support::parallel_grid;

namespace {

TopologySequence two_state(int first_dwell, int second_dwell) {
  TopologySequence sequence;
  sequence.topologies = {{1, 1, 1, 1}, {1, 1, 2, 2}};
  sequence.runs = {{0, first_dwell}, {1, second_dwell}};
  return sequence;
}

EpisodeStep make_step(int step, int action_id, bool applied,
                      bool done = false,
                      EndCause cause = EndCause::none) {
  EpisodeStep s;
  s.step = step;
  s.action_id = action_id;
  s.applied = applied;
  s.reward = 0.9;
  s.max_loading = 0.5;
  s.done = done;
  s.cause = cause;
  return s;
}

EpisodeRecord make_record(const std::vector<std::pair<int, bool>>& actions) {
  EpisodeRecord record;
  record.scenario_id = "hand";
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const bool last = i + 1 == actions.size();
    record.steps.push_back(make_step(static_cast<int>(i) + 1, actions[i].first,
                                     actions[i].second, last,
                                     last ? EndCause::scenario_complete
                                          : EndCause::none));
  }
  return record;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string temp_dir(const std::string& stem) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("topogrid_analytics_" + stem);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

PolicyNet single_minded_net(int action) {
  PolicyNet net(99);
  net.bias(2)[action] += 50.0;
  return net;
}

EpisodeAnalysis stub_analysis(const std::string& scenario, const std::string& signature,
                              double entropy, bool success, double reward) {
  EpisodeAnalysis analysis;
  analysis.scenario_id = scenario;
  analysis.signature = signature;
  analysis.entropy = entropy;
  analysis.success = success;
  analysis.total_reward = reward;
  return analysis;
}

}  // namespace

TEST_CASE("entropy reproduces the pinned values") {
  TopologySequence single;
  single.topologies = {{1, 1, 1}};
  single.runs = {{0, 2016}};
  CHECK(topological_entropy(single) == 0.0);

  CHECK(topological_entropy(two_state(1008, 1008)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const double late_switch = topological_entropy(two_state(2015, 1));
  CHECK(late_switch == doctest::Approx(0.0043).epsilon(0.12));
  CHECK(std::abs(late_switch - 0.0043) < 5e-4);
  const double analytic = (2015.0 / 2016.0) * std::log(2016.0 / 2015.0) +
                          std::log(2016.0) / 2016.0;
  CHECK(late_switch == doctest::Approx(analytic).epsilon(1e-12));

  SUBCASE("revisited topologies aggregate their dwell") {
    TopologySequence revisit;
    revisit.topologies = {{1, 1, 1, 1}, {1, 1, 2, 2}};
    revisit.runs = {{0, 1000}, {1, 8}, {0, 1008}};
    revisit.revisit = true;
    CHECK(topological_entropy(revisit) ==
          doctest::Approx(topological_entropy(two_state(2008, 8))).epsilon(1e-15));
  }

  SUBCASE("entropy is bounded by the distinct-topology count") {
    TopologySequence three;
    three.topologies = {{1}, {2}, {3}};
    three.runs = {{0, 5}, {1, 7}, {2, 11}};
    const double entropy = topological_entropy(three);
    CHECK(entropy > 0.0);
    CHECK(entropy <= std::log(3.0));
  }

  SUBCASE("degenerate sequences are rejected") {
    TopologySequence empty;
    CHECK_THROWS_AS(topological_entropy(empty), ContractViolation);
    TopologySequence zero_dwell = two_state(5, 0);
    CHECK_THROWS_AS(topological_entropy(zero_dwell), ContractViolation);
  }
}

TEST_CASE("signatures label the base and the variants in order") {
  TopologySequence sequence;
  sequence.topologies = {{1, 1, 1, 1}, {1, 1, 2, 2}, {1, 2, 1, 2}};
  sequence.runs = {{0, 10}, {1, 5}, {0, 3}, {2, 2}};
  CHECK(sequence_signature(sequence) == "B->T1->B->T2");

  TopologySequence never_base;
  never_base.topologies = {{1, 2, 2, 1}};
  never_base.runs = {{0, 4}};
  CHECK(sequence_signature(never_base) == "T1");
}

TEST_CASE("topology sequences come straight from the record") {
  const GridModel grid = forked_grid();
  const ActionCatalog catalog = build_action_catalog(grid);
  const int split_a = find_action_id(catalog, 1, {1, 1, 2, 2});
  const int split_b = find_action_id(catalog, 1, {1, 2, 1, 2});
  const int identity_1 = find_action_id(catalog, 1, {1, 1, 1, 1});

  SUBCASE("all do-nothing stays a single run") {
    const EpisodeRecord record =
        make_record({{0, false}, {0, false}, {0, false}, {0, false}, {0, false}});
    const TopologySequence sequence = topology_sequence(grid, catalog, record);
    REQUIRE(sequence.runs.size() == 1);
    CHECK(sequence.runs[0].dwell == 6);
    CHECK(sequence.total_rows() == 6);
    CHECK_FALSE(sequence.revisit);
    CHECK(sequence_signature(sequence) == "B");
    CHECK(topological_entropy(sequence) == 0.0);
  }

  SUBCASE("one applied switch opens a second run") {
    const EpisodeRecord record = make_record(
        {{0, false}, {0, false}, {split_a, true}, {split_b, false}, {0, false}});
    const TopologySequence sequence = topology_sequence(grid, catalog, record);
    REQUIRE(sequence.runs.size() == 2);
    CHECK(sequence.runs[0].dwell == 3);
    CHECK(sequence.runs[1].dwell == 3);
    CHECK_FALSE(sequence.revisit);
    CHECK(sequence_signature(sequence) == "B->T1");

    SUBCASE("the blocked reconfiguration left no trace") {
      CHECK(sequence.topologies.size() == 2);
    }
  }

  SUBCASE("returning to base and splitting again marks a revisit") {
    const EpisodeRecord record = make_record({{split_a, true},
                                              {0, false},
                                              {identity_1, true},
                                              {0, false},
                                              {split_b, true}});
    const TopologySequence sequence = topology_sequence(grid, catalog, record);
    REQUIRE(sequence.runs.size() == 4);
    CHECK(sequence.runs[0].dwell == 1);
    CHECK(sequence.runs[1].dwell == 2);
    CHECK(sequence.runs[2].dwell == 2);
    CHECK(sequence.runs[3].dwell == 1);
    CHECK(sequence.topologies.size() == 3);
    CHECK(sequence.revisit);
    CHECK(sequence_signature(sequence) == "B->T1->B->T2");

    const double entropy = topological_entropy(sequence);
    const double expected = -(0.5 * std::log(0.5) +
                              (2.0 / 6.0) * std::log(2.0 / 6.0) +
                              (1.0 / 6.0) * std::log(1.0 / 6.0));
    CHECK(entropy == doctest::Approx(expected).epsilon(1e-15));
  }

  SUBCASE("an applied identity changes nothing") {
    const EpisodeRecord record =
        make_record({{0, false}, {identity_1, true}, {0, false}});
    const TopologySequence sequence = topology_sequence(grid, catalog, record);
    CHECK(sequence.runs.size() == 1);
    CHECK(sequence.runs[0].dwell == 4);
  }

  SUBCASE("an empty record cannot be sequenced") {
    EpisodeRecord record;
    CHECK_THROWS_AS(topology_sequence(grid, catalog, record), ContractViolation);
  }
}

TEST_CASE("transient line outages never open a topology run") {
  const GridModel grid = parallel_grid();
  const ActionCatalog catalog = build_action_catalog(grid);
  EnvConfig cfg;
  cfg.mode = SolverMode::dc;
  cfg.horizon = 16;

  Scenario sc = flat_scenario(grid, 16, 30.0);
  sc.load_p.row(1).setConstant(574.0);  // spikes the stiff line to ~1.6
  for (int row = 2; row < 16; ++row) {
    sc.load_p.row(row).setConstant(300.0);
  }

  GridEpisodeEnv env(grid, catalog, sc, cfg);
  const PolicyNet net = single_minded_net(0);
  const RolloutResult rolled = rollout_episode(net, env, 12, 0.95);

  REQUIRE(rolled.record.steps.size() == 15);
  CHECK(rolled.record.success());
  CHECK(rolled.record.steps[0].max_loading > 1.5);
  for (const EpisodeStep& step : rolled.record.steps) {
    CHECK(step.action_id == 0);
  }

  const EpisodeAnalysis analysis = analyze_episode(grid, catalog, rolled.record);
  CHECK(analysis.sequence.runs.size() == 1);
  CHECK(analysis.sequence.total_rows() == 16);
  CHECK(analysis.signature == "B");
  CHECK(analysis.entropy == 0.0);
  CHECK_FALSE(analysis.revisit);
  CHECK(analysis.success);
}

TEST_CASE("evaluation aggregates per-scenario outcomes") {
  const GridModel grid = parallel_grid();
  const ActionCatalog catalog = build_action_catalog(grid);
  EnvConfig cfg;
  cfg.mode = SolverMode::dc;
  cfg.horizon = 8;

  std::vector<Scenario> scenarios;
  scenarios.push_back(flat_scenario(grid, 8, 30.0));
  scenarios.back().id = "quiet-0";
  scenarios.push_back(flat_scenario(grid, 8, 45.0));
  scenarios.back().id = "quiet-1";
  Scenario doomed = flat_scenario(grid, 8, 30.0);
  for (int row = 1; row < 8; ++row) {
    doomed.load_p.row(row).setConstant(2500.0);
  }
  doomed.id = "doomed";
  scenarios.push_back(doomed);

  const PolicyNet net = single_minded_net(0);
  const EvaluationSummary summary =
      evaluate_agent(net, grid, catalog, scenarios, 2, 99, cfg);

  REQUIRE(summary.scenarios.size() == 3);
  CHECK(summary.episodes_total == 6);
  CHECK(summary.success_fraction == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  CHECK(summary.scenarios[0].scenario_id == "quiet-0");
  CHECK(summary.scenarios[0].success);
  CHECK(summary.scenarios[1].success);
  CHECK_FALSE(summary.scenarios[2].success);

  for (int si : {0, 1}) {
    const ScenarioEvaluation& evaluation = summary.scenarios[si];
    REQUIRE(evaluation.episodes.size() == 2);
    CHECK(evaluation.episodes[0].total_reward == evaluation.episodes[1].total_reward);
    CHECK(evaluation.episodes[0].signature == "B");
    CHECK(evaluation.episodes[0].entropy == 0.0);
    CHECK(evaluation.episodes[0].success);
    CHECK(evaluation.episodes[0].scenario_id == evaluation.scenario_id);
  }

  const ScenarioEvaluation& failed = summary.scenarios[2];
  REQUIRE(failed.episodes.size() == 2);
  CHECK(failed.episodes[0].total_reward == 0.0);
  CHECK_FALSE(failed.episodes[0].success);
  CHECK(failed.best_episode == 0);

  SUBCASE("the summary is job-count independent") {
    const EvaluationSummary threaded =
        evaluate_agent(net, grid, catalog, scenarios, 2, 99, cfg, 0.95, 3);
    REQUIRE(threaded.scenarios.size() == summary.scenarios.size());
    for (std::size_t si = 0; si < summary.scenarios.size(); ++si) {
      REQUIRE(threaded.scenarios[si].episodes.size() ==
              summary.scenarios[si].episodes.size());
      for (std::size_t ei = 0; ei < summary.scenarios[si].episodes.size(); ++ei) {
        CHECK(threaded.scenarios[si].episodes[ei].total_reward ==
              summary.scenarios[si].episodes[ei].total_reward);
        CHECK(threaded.scenarios[si].episodes[ei].signature ==
              summary.scenarios[si].episodes[ei].signature);
      }
    }
    CHECK(threaded.success_fraction == summary.success_fraction);
  }

  SUBCASE("invalid arguments are rejected") {
    CHECK_THROWS_AS(evaluate_agent(net, grid, catalog, scenarios, 0, 99, cfg),
                    ContractViolation);
    CHECK_THROWS_AS(evaluate_agent(net, grid, catalog, scenarios, 2, 99, cfg, 0.95, 0),
                    ContractViolation);
    CHECK_THROWS_AS(evaluate_agent(net, grid, catalog, {}, 2, 99, cfg), DomainError);
  }
}

TEST_CASE("stochastic evaluation keeps the episode invariants") {
  const GridModel grid = parallel_grid();
  const ActionCatalog catalog = build_action_catalog(grid);
  EnvConfig cfg;
  cfg.mode = SolverMode::dc;
  cfg.horizon = 10;

  std::vector<Scenario> scenarios;
  scenarios.push_back(flat_scenario(grid, 10, 351.4));
  scenarios.back().id = "hot";

  const PolicyNet net(3);
  const EvaluationSummary summary =
      evaluate_agent(net, grid, catalog, scenarios, 4, 5, cfg);

  REQUIRE(summary.scenarios.size() == 1);
  REQUIRE(summary.scenarios[0].episodes.size() == 4);
  for (const EpisodeAnalysis& episode : summary.scenarios[0].episodes) {
    CHECK(episode.sequence.total_rows() == 10);
    CHECK(!episode.signature.empty());
    CHECK(episode.entropy >= 0.0);
    CHECK(episode.entropy <=
          std::log(static_cast<double>(episode.sequence.topologies.size())) + 1e-15);
    CHECK(episode.signature == "B");
    CHECK(episode.success);
  }
}

TEST_CASE("reports land in three csv files") {
  std::vector<ScenarioScore> scores(4);
  scores[0].scenario_id = "A";
  scores[0].days_above = 3;
  scores[0].max_loading = 1.2;
  scores[1].scenario_id = "B";
  scores[1].days_above = 1;
  scores[1].max_loading = 0.98;
  scores[2].scenario_id = "C";
  scores[2].days_above = 0;
  scores[2].max_loading = 0.5;
  scores[3].scenario_id = "D";
  scores[3].days_above = 5;
  scores[3].max_loading = 1.4;

  std::vector<BatchStats> history(2);
  history[0].batch = 0;
  history[0].mean_reward = 1500.0;
  history[0].reward_boundary = 1600.0;
  history[0].successes = 12;
  history[1].batch = 1;
  history[1].mean_reward = 1700.0;
  history[1].reward_boundary = 1750.0;
  history[1].successes = 18;

  EvaluationSummary summary;
  summary.scenarios.resize(3);
  summary.scenarios[0].scenario_id = "A";
  summary.scenarios[0].episodes = {stub_analysis("A", "B->T1", 0.1, true, 1900.0)};
  summary.scenarios[0].success = true;
  summary.scenarios[1].scenario_id = "B";
  summary.scenarios[1].episodes = {stub_analysis("B", "B->T1", 0.5, true, 1800.0)};
  summary.scenarios[1].success = true;
  summary.scenarios[2].scenario_id = "C";
  summary.scenarios[2].episodes = {stub_analysis("C", "B", 0.0, false, 400.0)};
  summary.scenarios[2].success = false;
  summary.episodes_total = 3;
  summary.success_fraction = 2.0 / 3.0;

  const std::string out = temp_dir("reports");
  emit_reports(scores, history, summary, out, {"seed=9"});

  const CsvTable scatter = read_csv(out + "/scenario_scatter.csv");
  CHECK(scatter.header == std::vector<std::string>{"scenario", "days_above",
                                                   "max_loading", "trained_success"});
  REQUIRE(scatter.rows.size() == 4);
  CHECK(scatter.rows[0] == std::vector<std::string>{"A", "3", "1.2", "1"});
  CHECK(scatter.rows[2] == std::vector<std::string>{"C", "0", "0.5", "0"});
  CHECK(scatter.rows[3][3] == "na");
  CHECK(scatter.comment_fields().at("seed") == "9");

  const CsvTable curve = read_csv(out + "/training_curve.csv");
  CHECK(curve.header == std::vector<std::string>{"batch", "mean_reward",
                                                 "reward_boundary", "successes"});
  REQUIRE(curve.rows.size() == 2);
  CHECK(curve.rows[1] == std::vector<std::string>{"1", "1700", "1750", "18"});

  const CsvTable table = read_csv(out + "/topology_table.csv");
  CHECK(table.header == std::vector<std::string>{"sequence", "episodes",
                                                 "entropy_min", "entropy_max"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0] == std::vector<std::string>{"B->T1", "2", "0.1", "0.5"});
  CHECK(table.rows[1] == std::vector<std::string>{"B", "1", "0", "0"});

  SUBCASE("re-emission is byte-identical") {
    const std::string again = temp_dir("reports_again");
    emit_reports(scores, history, summary, again, {"seed=9"});
    for (const std::string file :
         {"scenario_scatter.csv", "training_curve.csv", "topology_table.csv"}) {
      CHECK(read_file(out + "/" + file) == read_file(again + "/" + file));
    }
    std::filesystem::remove_all(again);
  }

  SUBCASE("empty inputs leave headers only") {
    const std::string bare = temp_dir("reports_bare");
    emit_reports({}, {}, EvaluationSummary{}, bare);
    CHECK(read_csv(bare + "/scenario_scatter.csv").rows.empty());
    CHECK(read_csv(bare + "/training_curve.csv").rows.empty());
    CHECK(read_csv(bare + "/topology_table.csv").rows.empty());
    std::filesystem::remove_all(bare);
  }

  std::filesystem::remove_all(out);
}
