#include "topogrid/cem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <utility>

#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/rng.hpp"

namespace topogrid {
namespace {

void validate_config(const TrainerConfig& config) {
  if (config.batch_size < 4) {
    throw ContractViolation("batch size must be at least 4");
  }
  if (!(config.elite_percentile >= 50.0 && config.elite_percentile < 100.0)) {
    throw ContractViolation("elite percentile must lie in [50, 100)");
  }
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw ContractViolation("learning rate must be finite and non-negative");
  }
  if (!(config.activity_threshold > 0.0 && config.activity_threshold < 1.5)) {
    throw ContractViolation("activity threshold must lie in (0, 1.5)");
  }
  if (config.stopping_window < 2) {
    throw ContractViolation("stopping window must span at least 2 batches");
  }
  if (!(config.boundary_tolerance > 0.0) || !(config.gap_tolerance > 0.0)) {
    throw ContractViolation("stopping tolerances must be positive");
  }
  if (config.max_batches < 1) {
    throw ContractViolation("batch cap must be positive");
  }
  if (config.jobs < 1) {
    throw ContractViolation("job count must be positive");
  }
}

// Number of episodes the percentile nominally keeps from one batch.
int nominal_elite_count(const TrainerConfig& config) {
  const int kept = static_cast<int>(
      std::floor(config.elite_percentile / 100.0 * config.batch_size));
  return std::max(1, config.batch_size - kept);
}

int sample_action(const Eigen::VectorXd& probabilities, int n_valid,
                  std::mt19937_64& rng) {
  if (n_valid < 1 || n_valid > probabilities.size()) {
    throw ContractViolation("environment action count must fit the policy head");
  }
  const double mass = probabilities.head(n_valid).sum();
  const double u = canonical_double(rng) * mass;
  double cumulative = 0.0;
  for (int a = 0; a < n_valid; ++a) {
    cumulative += probabilities[a];
    if (u < cumulative) {
      return a;
    }
  }
  return n_valid - 1;
}

// True while the batch gives no reason to stop sampling: the k-th best total
// has not beaten the previous boundary and the k best episodes are not all
// successful.
bool batch_is_stale(const std::vector<RolloutResult>& pool, int top_k,
                    double previous_boundary) {
  if (static_cast<int>(pool.size()) < top_k) {
    return true;
  }
  std::vector<std::pair<double, bool>> ranked;
  ranked.reserve(pool.size());
  for (const RolloutResult& episode : pool) {
    ranked.emplace_back(episode.record.total_reward(), episode.record.success());
  }
  std::partial_sort(ranked.begin(), ranked.begin() + top_k, ranked.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  if (ranked[top_k - 1].first > previous_boundary) {
    return false;
  }
  const bool best_all_successful =
      std::all_of(ranked.begin(), ranked.begin() + top_k,
                  [](const auto& e) { return e.second; });
  return !best_all_successful;
}

bool plateau_reached(const std::vector<BatchStats>& history,
                     const TrainerConfig& config) {
  const int window = config.stopping_window;
  if (static_cast<int>(history.size()) < window) {
    return false;
  }
  double low = std::numeric_limits<double>::infinity();
  double high = -std::numeric_limits<double>::infinity();
  for (std::size_t i = history.size() - window; i < history.size(); ++i) {
    low = std::min(low, history[i].reward_boundary);
    high = std::max(high, history[i].reward_boundary);
  }
  const BatchStats& last = history.back();
  const double denom = std::max(std::abs(last.reward_boundary), 1e-9);
  if ((high - low) / denom >= config.boundary_tolerance) {
    return false;
  }
  const double gap = (last.reward_boundary - last.mean_reward) / denom;
  return gap < config.gap_tolerance;
}

std::string checkpoint_path(const std::string& out_dir, int batches_done) {
  char name[32];
  std::snprintf(name, sizeof(name), "checkpoint-%04d.bin", batches_done);
  return (std::filesystem::path(out_dir) / name).string();
}

void write_history_csv(const std::string& path, const TrainerConfig& config,
                       const std::vector<BatchStats>& history) {
  char config_hex[24];
  std::snprintf(config_hex, sizeof(config_hex), "%016llx",
                static_cast<unsigned long long>(trainer_config_hash(config)));
  CsvWriter out(path);
  out.comment("seed=" + std::to_string(config.seed));
  out.comment("config=" + std::string(config_hex));
  out.comment("batch_size=" + std::to_string(config.batch_size));
  out.comment("learning_rate=" + format_double(config.learning_rate));
  out.header({"batch", "mean_reward", "reward_boundary", "successes"});
  for (const BatchStats& stats : history) {
    out.row({std::to_string(stats.batch), format_double(stats.mean_reward),
             format_double(stats.reward_boundary), std::to_string(stats.successes)});
  }
}

}  // namespace

GridEpisodeEnv::GridEpisodeEnv(const GridModel& grid, const ActionCatalog& catalog,
                               Scenario scenario, const EnvConfig& config,
                               int start_step)
    : env_(grid, catalog, config), scenario_(std::move(scenario)), start_(start_step) {}

StepResult GridEpisodeEnv::reset() { return env_.reset(scenario_, start_); }

StepResult GridEpisodeEnv::step(int action_id) { return env_.step(action_id); }

int GridEpisodeEnv::n_actions() const { return env_.catalog().size(); }

EpisodeRecord GridEpisodeEnv::record_skeleton() const {
  EpisodeRecord record;
  record.scenario_id = scenario_.id;
  record.grid_hash = grid_fingerprint(env_.grid());
  record.start_step = start_;
  return record;
}

std::uint64_t trainer_config_hash(const TrainerConfig& config) {
  const std::string canon =
      "batch_size=" + std::to_string(config.batch_size) +
      ";elite_percentile=" + format_double(config.elite_percentile) +
      ";learning_rate=" + format_double(config.learning_rate) +
      ";activity_threshold=" + format_double(config.activity_threshold) +
      ";stopping_window=" + std::to_string(config.stopping_window) +
      ";boundary_tolerance=" + format_double(config.boundary_tolerance) +
      ";gap_tolerance=" + format_double(config.gap_tolerance) +
      ";max_batches=" + std::to_string(config.max_batches);
  return fnv1a64(canon);
}

double reward_percentile_cutoff(std::vector<double> rewards, double percentile) {
  if (rewards.empty()) {
    throw DomainError("cannot take a percentile of no rewards");
  }
  std::sort(rewards.begin(), rewards.end());
  const auto m = static_cast<std::ptrdiff_t>(rewards.size());
  auto index = static_cast<std::ptrdiff_t>(
      std::floor(percentile / 100.0 * static_cast<double>(m)));
  index = std::min(index, m - 1);
  return rewards[static_cast<std::size_t>(index)];
}

std::vector<int> select_elite_indices(const std::vector<double>& rewards,
                                      double percentile) {
  if (rewards.size() < 4) {
    throw DomainError("elite selection needs at least four episodes, got " +
                      std::to_string(rewards.size()));
  }
  const double cutoff = reward_percentile_cutoff(rewards, percentile);
  std::vector<int> elite;
  for (int i = 0; i < static_cast<int>(rewards.size()); ++i) {
    if (rewards[i] >= cutoff) {
      elite.push_back(i);
    }
  }
  return elite;
}

RolloutResult rollout_episode(const PolicyNet& net, IEpisodeEnv& env,
                              std::uint64_t seed, double activity_threshold) {
  std::mt19937_64 rng(seed);
  RolloutResult result;
  result.record = env.record_skeleton();
  result.record.seed = seed;

  StepResult current = env.reset();
  int step_number = result.record.start_step;
  while (!current.done) {
    int action = 0;
    if (current.max_loading > activity_threshold) {
      const Eigen::VectorXd probabilities = net.forward(current.observation);
      action = sample_action(probabilities, env.n_actions(), rng);
      result.pairs.push_back({current.observation, action});
    }
    const StepResult next = env.step(action);
    ++step_number;
    result.record.steps.push_back({step_number, action, next.applied, next.reward,
                                   next.max_loading, next.done, next.cause});
    current = next;
  }
  return result;
}

BatchCollection collect_batch(const PolicyNet& net, const EnvFactory& factory,
                              const TrainerConfig& config, double previous_boundary,
                              int batch_index) {
  validate_config(config);
  if (batch_index < 0) {
    throw ContractViolation("batch index must be non-negative");
  }
  const int n = config.batch_size;
  const int cap = 3 * n;
  const int top_k = nominal_elite_count(config);
  const auto episode_seed = [&](int idx) {
    return derive_seed(config.seed, static_cast<std::uint64_t>(batch_index) + 1,
                       static_cast<std::uint64_t>(idx));
  };

  const int jobs = std::min(std::max(1, config.jobs), n);
  std::vector<std::unique_ptr<IEpisodeEnv>> envs;
  envs.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    envs.push_back(factory());
    if (!envs.back()) {
      throw ContractViolation("environment factory returned null");
    }
  }

  std::vector<RolloutResult> pool(static_cast<std::size_t>(n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) {
      pool[static_cast<std::size_t>(i)] =
          rollout_episode(net, *envs[0], episode_seed(i), config.activity_threshold);
    }
  } else {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (int i = w; i < n; i += jobs) {
            pool[static_cast<std::size_t>(i)] = rollout_episode(
                net, *envs[static_cast<std::size_t>(w)], episode_seed(i),
                config.activity_threshold);
          }
        } catch (...) {
          const std::lock_guard<std::mutex> hold(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
        }
      });
    }
    for (std::thread& worker : workers) {
      worker.join();
    }
    if (failure) {
      std::rethrow_exception(failure);
    }
  }

  bool capped = false;
  int next_index = n;
  while (batch_is_stale(pool, top_k, previous_boundary)) {
    if (static_cast<int>(pool.size()) >= cap) {
      capped = true;
      break;
    }
    pool.push_back(rollout_episode(net, *envs[0], episode_seed(next_index++),
                                   config.activity_threshold));
  }

  BatchCollection collection;
  collection.stats.batch = batch_index;
  collection.stats.sampling_capped = capped;
  collection.stats.rewards.reserve(pool.size());
  double total = 0.0;
  for (const RolloutResult& episode : pool) {
    const double reward = episode.record.total_reward();
    collection.stats.rewards.push_back(reward);
    total += reward;
    collection.stats.successes += episode.record.success() ? 1 : 0;
  }
  collection.stats.mean_reward = total / static_cast<double>(pool.size());
  collection.stats.reward_boundary =
      reward_percentile_cutoff(collection.stats.rewards, config.elite_percentile);
  collection.pool = std::move(pool);
  return collection;
}

TrainResult train(const TrainerConfig& config, const EnvFactory& factory) {
  validate_config(config);
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
  }

  PolicyNet net(derive_seed(config.seed, 0, 0, 1));
  std::vector<BatchStats> history;
  bool stopped_early = false;
  double previous_boundary = -std::numeric_limits<double>::infinity();

  for (int batch = 0; batch < config.max_batches; ++batch) {
    BatchCollection collection =
        collect_batch(net, factory, config, previous_boundary, batch);

    if (!net.normalization_frozen()) {
      std::vector<TrainingPair> all_pairs;
      for (const RolloutResult& episode : collection.pool) {
        all_pairs.insert(all_pairs.end(), episode.pairs.begin(), episode.pairs.end());
      }
      if (!all_pairs.empty()) {
        net.fit_normalization(all_pairs);
      }
    }

    const std::vector<int> elite =
        select_elite_indices(collection.stats.rewards, config.elite_percentile);
    std::vector<TrainingPair> elite_pairs;
    for (const int index : elite) {
      const std::vector<TrainingPair>& pairs =
          collection.pool[static_cast<std::size_t>(index)].pairs;
      elite_pairs.insert(elite_pairs.end(), pairs.begin(), pairs.end());
    }
    if (!elite_pairs.empty()) {
      net.train_step(elite_pairs, config.learning_rate);
    }

    history.push_back(std::move(collection.stats));
    previous_boundary = history.back().reward_boundary;

    if (!config.out_dir.empty() && config.checkpoint_every > 0 &&
        (batch + 1) % config.checkpoint_every == 0) {
      net.save(checkpoint_path(config.out_dir, batch + 1));
    }
    if (plateau_reached(history, config)) {
      stopped_early = true;
      break;
    }
  }

  if (!config.out_dir.empty()) {
    write_history_csv(
        (std::filesystem::path(config.out_dir) / "history.csv").string(), config,
        history);
    net.save((std::filesystem::path(config.out_dir) / "policy.bin").string());
  }
  return {std::move(net), std::move(history), stopped_early};
}

TrainResult train(const TrainerConfig& config, const GridModel& grid,
                  const ActionCatalog& catalog, const Scenario& scenario,
                  const EnvConfig& env_config, int start_step) {
  const EnvFactory factory = [&grid, &catalog, scenario, env_config, start_step]() {
    return std::make_unique<GridEpisodeEnv>(grid, catalog, scenario, env_config,
                                            start_step);
  };
  return train(config, factory);
}

}  // namespace topogrid
