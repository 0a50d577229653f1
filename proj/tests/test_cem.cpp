#include "topogrid/cem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "stub_envs.hpp"
#include "support.hpp"
#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/rng.hpp"

using namespace topogrid;
using test_support::flat_scenario;
using test_support::parallel_grid;

namespace {

std::string temp_dir(const std::string& stem) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("topogrid_cem_" + stem);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::vector<double> elite_rewards(const std::vector<double>& rewards,
                                  double percentile) {
  std::vector<double> kept;
  for (const int index : select_elite_indices(rewards, percentile)) {
    kept.push_back(rewards[index]);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// A policy whose softmax puts essentially all mass on one action.
PolicyNet single_minded_net(int action) {
  PolicyNet net(99);
  net.bias(2)[action] += 50.0;
  return net;
}

TrainerConfig small_config() {
  TrainerConfig config;
  config.batch_size = 8;
  config.elite_percentile = 75.0;
  config.learning_rate = 0.02;
  config.activity_threshold = 0.95;
  config.max_batches = 6;
  config.seed = 123;
  return config;
}

}  // namespace

TEST_CASE("percentile cutoff follows the floor convention") {
  std::vector<double> rewards;
  for (int r = 20; r >= 1; --r) {
    rewards.push_back(static_cast<double>(r));
  }
  CHECK(reward_percentile_cutoff(rewards, 75.0) == 16.0);
  CHECK(reward_percentile_cutoff(rewards, 50.0) == 11.0);
  CHECK(reward_percentile_cutoff(rewards, 95.0) == 20.0);

  CHECK(reward_percentile_cutoff({3.5, 3.5, 3.5, 3.5}, 75.0) == 3.5);
  CHECK(reward_percentile_cutoff({1.0}, 75.0) == 1.0);
  CHECK(reward_percentile_cutoff({2.0, 1.0}, 75.0) == 2.0);
  CHECK_THROWS_AS(reward_percentile_cutoff({}, 75.0), DomainError);
}

TEST_CASE("elite selection keeps ties and ignores input order") {
  std::vector<double> rewards;
  for (int r = 1; r <= 20; ++r) {
    rewards.push_back(static_cast<double>(r));
  }
  std::mt19937_64 rng(11);
  std::shuffle(rewards.begin(), rewards.end(), rng);

  const std::vector<double> kept = elite_rewards(rewards, 75.0);
  CHECK(kept == std::vector<double>{16.0, 17.0, 18.0, 19.0, 20.0});

  SUBCASE("ties at the cutoff are all included") {
    std::vector<double> tied(13, 1.0);
    tied.insert(tied.end(), 7, 10.0);
    const std::vector<double> kept_tied = elite_rewards(tied, 75.0);
    CHECK(kept_tied.size() == 7);
    CHECK(std::all_of(kept_tied.begin(), kept_tied.end(),
                      [](double r) { return r == 10.0; }));
  }

  SUBCASE("all-equal batches keep every episode") {
    const std::vector<double> flat(6, 4.25);
    CHECK(select_elite_indices(flat, 75.0).size() == 6);
  }

  SUBCASE("reordering changes indices but not the selected rewards") {
    std::vector<double> reordered = rewards;
    std::reverse(reordered.begin(), reordered.end());
    CHECK(elite_rewards(reordered, 75.0) == kept);
  }

  SUBCASE("fewer than four episodes is a caller error") {
    CHECK_THROWS_AS(select_elite_indices({1.0, 2.0, 3.0}, 75.0), DomainError);
    CHECK_THROWS_AS(select_elite_indices({}, 75.0), DomainError);
  }
}

TEST_CASE("rollout below the activity threshold never consults the policy") {
  const PolicyNet net(4);
  auto factory = scripted_factory(
      {ScriptedEpisode{{0.9, 0.8, 0.7, 0.6, 0.5}, true, 0.5}});
  const auto env = factory();

  const RolloutResult rolled = rollout_episode(net, *env, 777, 0.95);
  CHECK(rolled.pairs.empty());
  REQUIRE(rolled.record.steps.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(rolled.record.steps[i].action_id == 0);
    CHECK(rolled.record.steps[i].step == i + 1);
  }
  CHECK(rolled.record.total_reward() == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(rolled.record.success());
  CHECK(rolled.record.seed == 777);
  CHECK(rolled.record.scenario_id == "scripted");
  CHECK(rolled.record.start_step == 0);
}

TEST_CASE("rollout samples exactly at the hot states") {
  ScriptedEpisode episode;
  episode.rewards = {1.0, 1.0, 1.0, 1.0, 1.0};
  episode.success = false;
  episode.max_loading = 0.5;
  episode.step_loadings = {1.2, 0.5, 1.2, 0.95, 0.9};

  const PolicyNet net = single_minded_net(3);
  auto factory = scripted_factory({episode});
  const auto env = factory();

  const RolloutResult rolled = rollout_episode(net, *env, 5, 0.95);
  REQUIRE(rolled.pairs.size() == 2);
  CHECK(rolled.pairs[0].action == 3);
  CHECK(rolled.pairs[1].action == 3);

  std::vector<int> actions;
  for (const EpisodeStep& step : rolled.record.steps) {
    actions.push_back(step.action_id);
  }
  CHECK(actions == std::vector<int>{0, 3, 0, 3, 0});
  CHECK_FALSE(rolled.record.success());

  SUBCASE("a loading exactly at the threshold stays forced") {
    CHECK(rolled.record.steps[3].max_loading == 0.95);
    CHECK(rolled.record.steps[4].action_id == 0);
  }

  SUBCASE("the sampled decision is seed-independent for a near-delta policy") {
    const auto env2 = factory();
    const RolloutResult again = rollout_episode(net, *env2, 999, 0.95);
    REQUIRE(again.record.steps.size() == rolled.record.steps.size());
    for (std::size_t i = 0; i < again.record.steps.size(); ++i) {
      CHECK(again.record.steps[i].action_id == rolled.record.steps[i].action_id);
    }
  }
}

TEST_CASE("rollout pairs hold the observation seen before acting") {
  ScriptedEpisode episode;
  episode.rewards = {0.4, 0.4};
  episode.max_loading = 1.3;

  const PolicyNet net(21);
  auto factory = scripted_factory({episode});
  const auto env = factory();
  const RolloutResult rolled = rollout_episode(net, *env, 31, 0.95);

  REQUIRE(rolled.pairs.size() == 2);
  for (const TrainingPair& pair : rolled.pairs) {
    CHECK(pair.observation.size() == ObservationLayout::size);
    CHECK(pair.action >= 0);
    CHECK(pair.action < PolicyNet::kActions);
  }

  SUBCASE("the same seed resamples the same actions") {
    const auto env2 = factory();
    const RolloutResult again = rollout_episode(net, *env2, 31, 0.95);
    REQUIRE(again.pairs.size() == 2);
    CHECK(again.pairs[0].action == rolled.pairs[0].action);
    CHECK(again.pairs[1].action == rolled.pairs[1].action);
  }
}

TEST_CASE("grid episodes flow through the rollout and stay replayable") {
  const GridModel grid = parallel_grid();
  const ActionCatalog catalog = build_action_catalog(grid);
  EnvConfig cfg;
  cfg.mode = SolverMode::dc;
  cfg.horizon = 6;

  SUBCASE("a calm week is all forced do-nothing") {
    const Scenario sc = flat_scenario(grid, 8, 30.0);
    GridEpisodeEnv env(grid, catalog, sc, cfg);
    const PolicyNet net(17);
    const RolloutResult rolled = rollout_episode(net, env, 99, 0.95);
    CHECK(rolled.pairs.empty());
    CHECK(rolled.record.steps.size() == 5);
    CHECK(rolled.record.success());
    CHECK(rolled.record.scenario_id == "script");
    CHECK(rolled.record.grid_hash == grid_fingerprint(grid));

    const EpisodeRecord replay =
        rerun_episode(grid, catalog, sc, rolled.record, cfg);
    REQUIRE(replay.steps.size() == rolled.record.steps.size());
    for (std::size_t i = 0; i < replay.steps.size(); ++i) {
      CHECK(replay.steps[i].reward == rolled.record.steps[i].reward);
    }
  }

  SUBCASE("a hot week consults the policy every step") {
    // 351.4 MW puts the stiffer line at roughly 0.98 loading, above the
    // activity threshold yet below the sustained-overload level.
    const Scenario sc = flat_scenario(grid, 8, 351.4);
    GridEpisodeEnv env(grid, catalog, sc, cfg);
    const PolicyNet net = single_minded_net(0);
    const RolloutResult rolled = rollout_episode(net, env, 99, 0.95);
    CHECK(rolled.pairs.size() == 5);
    CHECK(rolled.record.success());
    for (const EpisodeStep& step : rolled.record.steps) {
      CHECK(step.max_loading > 0.95);
      CHECK(step.max_loading < 1.0);
    }
  }
}

TEST_CASE("collect batch rolls the configured episode count") {
  const PolicyNet net(1);
  TrainerConfig config = small_config();

  const double neg_inf = -std::numeric_limits<double>::infinity();
  const BatchCollection base =
      collect_batch(net, bandit_factory(37, 4), config, neg_inf, 0);
  CHECK(base.pool.size() == 8);
  CHECK(base.stats.rewards.size() == 8);
  CHECK(base.stats.batch == 0);
  CHECK(base.stats.successes == 8);
  CHECK_FALSE(base.stats.sampling_capped);
  CHECK(base.stats.reward_boundary ==
        reward_percentile_cutoff(base.stats.rewards, 75.0));
  double total = 0.0;
  for (const double r : base.stats.rewards) {
    total += r;
    CHECK(r >= 0.4);
    CHECK(r <= 4.0);
  }
  CHECK(base.stats.mean_reward == doctest::Approx(total / 8.0).epsilon(1e-12));

  SUBCASE("the pool is identical across job counts") {
    TrainerConfig threaded = config;
    threaded.jobs = 4;
    const BatchCollection parallel =
        collect_batch(net, bandit_factory(37, 4), threaded, neg_inf, 0);
    CHECK(parallel.stats.rewards == base.stats.rewards);
    REQUIRE(parallel.pool.size() == base.pool.size());
    for (std::size_t i = 0; i < base.pool.size(); ++i) {
      REQUIRE(parallel.pool[i].record.steps.size() ==
              base.pool[i].record.steps.size());
      for (std::size_t s = 0; s < base.pool[i].record.steps.size(); ++s) {
        CHECK(parallel.pool[i].record.steps[s].action_id ==
              base.pool[i].record.steps[s].action_id);
      }
    }
  }

  SUBCASE("a different batch index reseeds the episodes") {
    const BatchCollection later =
        collect_batch(net, bandit_factory(37, 4), config, neg_inf, 3);
    CHECK(later.stats.batch == 3);
    CHECK(later.stats.rewards != base.stats.rewards);
  }
}

TEST_CASE("collect batch tops up stale pools and caps at three batches") {
  const PolicyNet net(1);
  TrainerConfig config = small_config();

  SUBCASE("an improving batch stops at the nominal size") {
    auto factory = scripted_factory(
        scripted_totals({1, 2, 3, 4, 5, 6, 7, 8}, false));
    const BatchCollection col = collect_batch(net, factory, config, 5.0, 0);
    CHECK(col.pool.size() == 8);
    CHECK_FALSE(col.stats.sampling_capped);
  }

  SUBCASE("a fully successful front stops at the nominal size") {
    auto factory = scripted_factory(scripted_totals({1, 1, 1, 1, 1, 1, 1, 1}, true));
    const BatchCollection col = collect_batch(net, factory, config, 100.0, 0);
    CHECK(col.pool.size() == 8);
    CHECK_FALSE(col.stats.sampling_capped);
    CHECK(col.stats.successes == 8);
  }

  SUBCASE("a stale batch keeps sampling until an episode clears the bar") {
    std::vector<ScriptedEpisode> scripts =
        scripted_totals({11, 9, 8, 7, 6, 5, 4, 3}, false);
    const std::vector<ScriptedEpisode> extra = scripted_totals({12}, false);
    scripts.push_back(extra[0]);
    const BatchCollection col =
        collect_batch(net, scripted_factory(scripts), config, 10.0, 0);
    CHECK(col.pool.size() == 9);
    CHECK(col.stats.rewards.back() == 12.0);
    CHECK_FALSE(col.stats.sampling_capped);
  }

  SUBCASE("a hopeless batch caps at three times the batch size") {
    auto factory = scripted_factory(scripted_totals({1.0}, false));
    const BatchCollection col = collect_batch(net, factory, config, 100.0, 0);
    CHECK(col.pool.size() == 24);
    CHECK(col.stats.sampling_capped);
    CHECK(col.stats.successes == 0);
    CHECK(col.stats.mean_reward == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("the training loop concentrates on the winning arm") {
  TrainerConfig config;
  config.batch_size = 20;
  config.elite_percentile = 75.0;
  config.learning_rate = 0.5;
  config.activity_threshold = 0.95;
  config.max_batches = 30;
  config.seed = 7;

  const int winning = 37;
  const TrainResult result = train(config, bandit_factory(winning, 16));

  REQUIRE(!result.history.empty());
  CHECK(result.history.size() <= 30);
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    CHECK(result.history[i].batch == static_cast<int>(i));
  }

  BanditEnv probe(winning, 16);
  const Eigen::VectorXd p = result.net.forward(probe.observation());
  CHECK(p[winning] > 0.95);

  SUBCASE("mean reward trends upward") {
    auto median5 = [&](std::size_t start) {
      std::vector<double> window;
      for (std::size_t i = start; i < start + 5; ++i) {
        window.push_back(result.history[i].mean_reward);
      }
      std::sort(window.begin(), window.end());
      return window[2];
    };
    REQUIRE(result.history.size() >= 5);
    const double early = median5(0);
    const double late = median5(result.history.size() - 5);
    CHECK(late >= early);
  }
}

TEST_CASE("training runs are reproducible seed for seed") {
  TrainerConfig config = small_config();
  config.max_batches = 5;

  const TrainResult a = train(config, bandit_factory(5, 4));
  const TrainResult b = train(config, bandit_factory(5, 4));

  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].rewards == b.history[i].rewards);
    CHECK(a.history[i].mean_reward == b.history[i].mean_reward);
    CHECK(a.history[i].reward_boundary == b.history[i].reward_boundary);
    CHECK(a.history[i].successes == b.history[i].successes);
  }
  for (int layer = 0; layer < 3; ++layer) {
    CHECK((a.net.weight(layer).array() == b.net.weight(layer).array()).all());
    CHECK((a.net.bias(layer).array() == b.net.bias(layer).array()).all());
  }

  SUBCASE("a different seed gives a different run") {
    TrainerConfig other = config;
    other.seed = 124;
    const TrainResult c = train(other, bandit_factory(5, 4));
    CHECK_FALSE((c.net.weight(0).array() == a.net.weight(0).array()).all());
  }
}

TEST_CASE("training stops once the boundary plateaus with a small gap") {
  const auto run = [&](std::vector<double> totals, int max_batches) {
    TrainerConfig config = small_config();
    config.max_batches = max_batches;
    return train(config, scripted_factory(scripted_totals(totals, true)));
  };

  SUBCASE("constant rewards stop at the window length") {
    const TrainResult result = run(std::vector<double>(8, 2.0), 12);
    CHECK(result.stopped_early);
    CHECK(result.history.size() == 5);
  }

  SUBCASE("a flat boundary with a wide gap keeps training") {
    const TrainResult result = run({10, 10, 8, 8, 8, 8, 8, 8}, 7);
    CHECK_FALSE(result.stopped_early);
    CHECK(result.history.size() == 7);
    for (const BatchStats& stats : result.history) {
      CHECK(stats.reward_boundary == 10.0);
      CHECK(stats.mean_reward == doctest::Approx(8.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("training writes the history and checkpoints") {
  const std::string out = temp_dir("outputs");
  TrainerConfig config = small_config();
  config.max_batches = 12;
  config.checkpoint_every = 2;
  config.out_dir = out;

  const TrainResult result =
      train(config, scripted_factory(scripted_totals(std::vector<double>(8, 2.0))));
  CHECK(result.stopped_early);
  REQUIRE(result.history.size() == 5);

  const CsvTable history = read_csv(out + "/history.csv");
  CHECK(history.header ==
        std::vector<std::string>{"batch", "mean_reward", "reward_boundary",
                                 "successes"});
  REQUIRE(history.rows.size() == 5);
  CHECK(history.rows[0][0] == "0");
  CHECK(history.rows[4][0] == "4");
  CHECK(parse_double(history.rows[2][1], "mean") == 2.0);
  CHECK(parse_double(history.rows[2][2], "boundary") == 2.0);
  CHECK(history.comment_fields().at("seed") == "123");

  CHECK(std::filesystem::exists(out + "/checkpoint-0002.bin"));
  CHECK(std::filesystem::exists(out + "/checkpoint-0004.bin"));
  CHECK_FALSE(std::filesystem::exists(out + "/checkpoint-0006.bin"));
  const PolicyNet saved = PolicyNet::load(out + "/policy.bin");
  CHECK_FALSE(saved.normalization_frozen());

  std::filesystem::remove_all(out);
}

TEST_CASE("normalization freezes on the first batch with decisions") {
  ScriptedEpisode hot;
  hot.rewards = {0.5, 0.5, 0.5};
  hot.max_loading = 1.2;

  TrainerConfig config = small_config();
  config.max_batches = 2;
  const TrainResult result = train(config, scripted_factory({hot}));
  CHECK(result.net.normalization_frozen());

  TrainerConfig quiet_config = small_config();
  quiet_config.max_batches = 2;
  const TrainResult quiet = train(
      quiet_config, scripted_factory(scripted_totals(std::vector<double>(8, 1.0))));
  CHECK_FALSE(quiet.net.normalization_frozen());
}

TEST_CASE("trainer configs are validated") {
  const PolicyNet net(1);
  const auto try_config = [&](TrainerConfig config) {
    collect_batch(net, bandit_factory(0, 1), config, 0.0, 0);
  };

  CHECK_NOTHROW(try_config(small_config()));

  TrainerConfig bad = small_config();
  bad.batch_size = 3;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);

  bad = small_config();
  bad.elite_percentile = 100.0;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);
  bad.elite_percentile = 49.0;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);

  bad = small_config();
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);

  bad = small_config();
  bad.activity_threshold = 0.0;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);
  bad.activity_threshold = 1.5;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);

  bad = small_config();
  bad.stopping_window = 1;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);

  bad = small_config();
  bad.max_batches = 0;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);

  bad = small_config();
  bad.jobs = 0;
  CHECK_THROWS_AS(try_config(bad), ContractViolation);
}
