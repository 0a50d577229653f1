#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "topogrid/environment.hpp"
#include "topogrid/policy_net.hpp"

namespace topogrid {

// Episode surface the trainer rolls against. The production implementation
// wraps Environment on a fixed scenario; tests substitute scripted stubs.
class IEpisodeEnv {
 public:
  virtual ~IEpisodeEnv() = default;
  virtual StepResult reset() = 0;
  virtual StepResult step(int action_id) = 0;
  // Size of the valid action range [0, n). Sampling renormalizes the policy
  // head over this range, so a policy sized for a larger catalog still rolls.
  virtual int n_actions() const = 0;
  // Blank record carrying the episode's provenance (scenario id, grid hash,
  // start step) with no steps yet.
  virtual EpisodeRecord record_skeleton() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<IEpisodeEnv>()>;

// IEpisodeEnv over the grid environment, replaying one fixed scenario window.
class GridEpisodeEnv : public IEpisodeEnv {
 public:
  GridEpisodeEnv(const GridModel& grid, const ActionCatalog& catalog,
                 Scenario scenario, const EnvConfig& config, int start_step = 0);
  StepResult reset() override;
  StepResult step(int action_id) override;
  int n_actions() const override;
  EpisodeRecord record_skeleton() const override;

 private:
  Environment env_;
  Scenario scenario_;
  int start_;
};

struct TrainerConfig {
  int batch_size = 20;
  double elite_percentile = 75.0;
  double learning_rate = 1e-4;
  double activity_threshold = 0.95;
  int stopping_window = 5;
  double boundary_tolerance = 0.01;  // relative boundary drift over the window
  double gap_tolerance = 0.02;       // relative boundary-to-mean gap at the stop
  int max_batches = 200;
  int checkpoint_every = 25;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir;  // empty: keep everything in memory
};

struct BatchStats {
  int batch = 0;
  std::vector<double> rewards;  // final pool, in sampling order
  double reward_boundary = 0.0;
  double mean_reward = 0.0;
  int successes = 0;
  bool sampling_capped = false;
};

// One rolled episode: the full step record plus the supervised pairs taken at
// decision steps (states whose highest loading exceeded the threshold).
struct RolloutResult {
  EpisodeRecord record;
  std::vector<TrainingPair> pairs;
};

struct BatchCollection {
  std::vector<RolloutResult> pool;
  BatchStats stats;
};

struct TrainResult {
  PolicyNet net;
  std::vector<BatchStats> history;
  bool stopped_early = false;  // plateau rule fired before the batch cap
};

// Hash of every result-affecting trainer parameter (seed, out_dir, jobs and
// checkpoint cadence excluded); stamped into the history header.
std::uint64_t trainer_config_hash(const TrainerConfig& config);

// Reward value at the percentile cutoff: ascending order, index
// floor(percentile/100 * m) clamped to the last element.
double reward_percentile_cutoff(std::vector<double> rewards, double percentile);

// Indices of the episodes whose total reward reaches the cutoff; ties at the
// cutoff are all included. Needs at least four episodes.
std::vector<int> select_elite_indices(const std::vector<double>& rewards,
                                      double percentile);

// Plays one episode. While the highest line loading stays at or below the
// threshold the agent is forced to do nothing and no pair is recorded; above
// it an action is sampled from the policy and the (observation, action) pair
// is kept for supervised training.
RolloutResult rollout_episode(const PolicyNet& net, IEpisodeEnv& env,
                              std::uint64_t seed, double activity_threshold);

// Rolls batch_size episodes (concurrently when jobs > 1), then keeps sampling
// one episode at a time while the batch looks stale: it stops early when the
// k-th best total beats previous_boundary or the k best episodes all
// succeeded (k = the nominal elite count), and caps the pool at three times
// the batch size, flagging the stats when the cap was hit.
BatchCollection collect_batch(const PolicyNet& net, const EnvFactory& factory,
                              const TrainerConfig& config, double previous_boundary,
                              int batch_index);

// The full training loop: collect, select the elite, one pooled supervised
// update per batch, until the reward boundary plateaus (relative drift under
// boundary_tolerance across stopping_window batches and boundary-to-mean gap
// under gap_tolerance) or max_batches is reached. Input normalization is
// frozen on the first batch that produced any decision pair. With out_dir
// set, writes history.csv, periodic checkpoints, and policy.bin.
TrainResult train(const TrainerConfig& config, const EnvFactory& factory);

// Convenience wrapper training on one scenario window of the grid environment.
TrainResult train(const TrainerConfig& config, const GridModel& grid,
                  const ActionCatalog& catalog, const Scenario& scenario,
                  const EnvConfig& env_config, int start_step = 0);

}  // namespace topogrid
