#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "topogrid/action_space.hpp"
#include "topogrid/analytics.hpp"
#include "topogrid/cem.hpp"
#include "topogrid/csv.hpp"
#include "topogrid/environment.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/grid.hpp"
#include "topogrid/policy_net.hpp"
#include "topogrid/rng.hpp"
#include "topogrid/scenario.hpp"

namespace {

using namespace topogrid;

std::string hex64(std::uint64_t value) {
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(value));
  return buffer;
}

// "seed=..., config=..." header comments: the config hash covers the
// subcommand's effective flag values, so identical invocations stamp
// identical headers.
std::vector<std::pair<std::string, std::string>> run_fields(
    std::uint64_t seed, std::vector<std::pair<std::string, std::string>> flags) {
  std::string canon;
  for (const auto& [key, value] : flags) {
    canon += key + "=" + value + ";";
  }
  std::vector<std::pair<std::string, std::string>> fields;
  fields.emplace_back("seed", std::to_string(seed));
  fields.emplace_back("config", hex64(fnv1a64(canon)));
  return fields;
}

std::vector<std::string> run_comments(
    const std::vector<std::pair<std::string, std::string>>& fields) {
  std::vector<std::string> comments;
  comments.reserve(fields.size());
  for (const auto& [key, value] : fields) {
    comments.push_back(key + "=" + value);
  }
  return comments;
}

int effective_jobs(int jobs) {
  if (jobs > 0) {
    return jobs;
  }
  const unsigned hardware = std::thread::hardware_concurrency();
  return hardware == 0 ? 1 : static_cast<int>(hardware);
}

SolverMode parse_mode(const std::string& mode) {
  return mode == "dc" ? SolverMode::dc : SolverMode::ac;
}

std::vector<std::string> scenario_files(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DomainError("scenario directory not found: " + dir);
  }
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DomainError("no scenario csv files in " + dir);
  }
  return files;
}

std::vector<Scenario> load_scenarios(const std::string& dir) {
  std::vector<Scenario> scenarios;
  for (const std::string& file : scenario_files(dir)) {
    scenarios.push_back(load_scenario(file));
  }
  return scenarios;
}

// Applies `work(i)` to every index with a bounded worker pool; results are
// index-addressed so the outcome is job-count independent.
template <typename Work>
void parallel_for(int count, int jobs, const Work& work) {
  const int workers = std::min(std::max(jobs, 1), std::max(count, 1));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) {
      work(i);
    }
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) {
          work(i);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> hold(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& worker : pool) {
    worker.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

int run_enumerate(const std::string& grid_path, const std::string& out_path) {
  GridModel grid = load_grid(grid_path);
  ActionCatalog catalog = build_action_catalog(grid);

  int non_identity = 0;
  for (const auto& e : catalog.entries)
    if (e.action.kind == Action::reconfigure && e.config_index != 0)
      non_identity += 1;

  std::FILE* out = stdout;
  if (!out_path.empty()) {
    out = std::fopen(out_path.c_str(), "wb");
    if (!out) throw DomainError("cannot open output file " + out_path);
  }
  std::fprintf(out, "# grid=%016llx\n",
               static_cast<unsigned long long>(grid_fingerprint(grid)));
  std::fprintf(out, "# total_actions=%d non_identity=%d\n", catalog.size(),
               non_identity);
  std::fprintf(out, "substation,n_elements,n_non_line,n_configs\n");
  for (const auto& c : catalog.counts)
    std::fprintf(out, "%d,%d,%d,%lld\n", c.substation, c.n_elements,
                 c.n_non_line, static_cast<long long>(c.n_configs));
  if (out != stdout) std::fclose(out);
  return 0;
}

int run_gen_scenarios(const std::string& grid_path, const std::string& out_dir,
                      int count, int steps, double stress, std::uint64_t seed) {
  const GridModel grid = load_grid(grid_path);
  ScenarioParams params;
  params.n_steps = steps;
  params.stress = stress;
  if (grid.n_loads() != 11 || grid.n_generators() != 5) {
    throw DomainError("the synthetic generator expects the 11-load, 5-machine grid");
  }

  const std::vector<Scenario> scenarios = generate_synthetic(params, count, seed);
  std::filesystem::create_directories(out_dir);
  auto fields = run_fields(seed, {{"count", std::to_string(count)},
                                  {"steps", std::to_string(steps)},
                                  {"stress", format_double(stress)}});
  fields.emplace_back("stress", format_double(stress));
  for (const Scenario& scenario : scenarios) {
    const auto path = std::filesystem::path(out_dir) / (scenario.id + ".csv");
    save_scenario(scenario, path.string(), fields);
  }
  std::printf("wrote %d scenarios to %s\n", count, out_dir.c_str());
  return 0;
}

int run_score(const std::string& grid_path, const std::string& scenario_dir,
              const std::string& out_path, const std::string& mode,
              double threshold, int jobs, std::uint64_t seed) {
  const GridModel grid = load_grid(grid_path);
  const std::vector<Scenario> scenarios = load_scenarios(scenario_dir);
  ScoreOptions options;
  options.mode = parse_mode(mode);
  options.day_threshold = threshold;

  std::vector<ScenarioScore> scores(scenarios.size());
  parallel_for(static_cast<int>(scenarios.size()), effective_jobs(jobs),
               [&](int i) {
                 scores[static_cast<std::size_t>(i)] = score_scenario(
                     grid, scenarios[static_cast<std::size_t>(i)], options);
               });

  CsvWriter out(out_path);
  for (const std::string& comment : run_comments(run_fields(
           seed, {{"mode", mode}, {"threshold", format_double(threshold)}}))) {
    out.comment(comment);
  }
  out.header({"scenario", "days_above", "max_loading", "worst_line", "divergent"});
  for (const ScenarioScore& score : scores) {
    int worst = 0;
    if (score.line_max.size() > 0) {
      score.line_max.maxCoeff(&worst);
    }
    out.row({score.scenario_id, std::to_string(score.days_above),
             format_double(score.max_loading), std::to_string(worst),
             std::to_string(score.divergent ? 1 : 0)});
  }
  std::printf("scored %zu scenarios into %s\n", scores.size(), out_path.c_str());
  return 0;
}

std::vector<ScenarioScore> read_scores(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int id_col = table.column("scenario");
  const int days_col = table.column("days_above");
  const int max_col = table.column("max_loading");
  const int div_col = table.column("divergent");
  if (id_col < 0 || days_col < 0 || max_col < 0 || div_col < 0) {
    throw ParseError(path + ": missing score columns");
  }
  std::vector<ScenarioScore> scores;
  for (const auto& row : table.rows) {
    ScenarioScore score;
    score.scenario_id = row[static_cast<std::size_t>(id_col)];
    score.days_above = static_cast<int>(
        parse_int(row[static_cast<std::size_t>(days_col)], "days_above"));
    score.max_loading =
        parse_double(row[static_cast<std::size_t>(max_col)], "max_loading");
    score.divergent =
        parse_int(row[static_cast<std::size_t>(div_col)], "divergent") != 0;
    scores.push_back(std::move(score));
  }
  return scores;
}

int run_select(const std::string& scores_path) {
  const std::vector<ScenarioScore> scores = read_scores(scores_path);
  std::printf("%s\n", select_training_scenario(scores).c_str());
  return 0;
}

int run_train(const std::string& grid_path, const std::string& scenario_path,
              const std::string& out_dir, const std::string& mode, int horizon,
              int start, const TrainerConfig& base_config) {
  const GridModel grid = load_grid(grid_path);
  const ActionCatalog catalog = build_action_catalog(grid);
  const Scenario scenario = load_scenario(scenario_path);

  EnvConfig env_config;
  env_config.mode = parse_mode(mode);
  env_config.horizon = horizon;

  TrainerConfig config = base_config;
  config.out_dir = out_dir;

  const TrainResult result =
      train(config, grid, catalog, scenario, env_config, start);
  const BatchStats& last = result.history.back();
  std::printf("batches=%zu\n", result.history.size());
  std::printf("stopped_early=%d\n", result.stopped_early ? 1 : 0);
  std::printf("reward_boundary=%s\n", format_double(last.reward_boundary).c_str());
  std::printf("mean_reward=%s\n", format_double(last.mean_reward).c_str());
  std::printf("history=%s/history.csv\n", out_dir.c_str());
  std::printf("policy=%s/policy.bin\n", out_dir.c_str());
  return 0;
}

int run_evaluate(const std::string& grid_path, const std::string& net_path,
                 const std::string& scenario_dir, const std::string& out_dir,
                 int episodes, const std::string& mode, int horizon,
                 double activity_threshold, std::uint64_t seed, int jobs) {
  const GridModel grid = load_grid(grid_path);
  const ActionCatalog catalog = build_action_catalog(grid);
  const PolicyNet net = PolicyNet::load(net_path);
  const std::vector<Scenario> scenarios = load_scenarios(scenario_dir);

  EnvConfig env_config;
  env_config.mode = parse_mode(mode);
  env_config.horizon = horizon;

  const EvaluationSummary summary =
      evaluate_agent(net, grid, catalog, scenarios, episodes, seed, env_config,
                     activity_threshold, effective_jobs(jobs));

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  const auto comments = run_comments(
      run_fields(seed, {{"mode", mode},
                        {"episodes", std::to_string(episodes)},
                        {"activity_threshold", format_double(activity_threshold)},
                        {"horizon", std::to_string(horizon)}}));

  {
    CsvWriter out((dir / "episodes.csv").string());
    for (const std::string& comment : comments) {
      out.comment(comment);
    }
    out.header({"scenario", "episode", "seed", "total_reward", "success",
                "signature", "entropy", "revisit"});
    for (const ScenarioEvaluation& evaluation : summary.scenarios) {
      for (std::size_t ei = 0; ei < evaluation.episodes.size(); ++ei) {
        const EpisodeAnalysis& episode = evaluation.episodes[ei];
        out.row({evaluation.scenario_id, std::to_string(ei),
                 std::to_string(episode.seed), format_double(episode.total_reward),
                 std::to_string(episode.success ? 1 : 0), episode.signature,
                 format_double(episode.entropy),
                 std::to_string(episode.revisit ? 1 : 0)});
      }
    }
  }

  {
    CsvWriter out((dir / "evaluation.csv").string());
    for (const std::string& comment : comments) {
      out.comment(comment);
    }
    out.comment("success_fraction=" + format_double(summary.success_fraction));
    out.comment("episodes_total=" + std::to_string(summary.episodes_total));
    out.header({"scenario", "episodes", "success", "best_episode", "best_reward",
                "best_signature", "best_entropy"});
    for (const ScenarioEvaluation& evaluation : summary.scenarios) {
      const EpisodeAnalysis& best =
          evaluation.episodes[static_cast<std::size_t>(evaluation.best_episode)];
      out.row({evaluation.scenario_id, std::to_string(evaluation.episodes.size()),
               std::to_string(evaluation.success ? 1 : 0),
               std::to_string(evaluation.best_episode),
               format_double(best.total_reward), best.signature,
               format_double(best.entropy)});
    }
  }

  for (std::size_t si = 0; si < summary.scenarios.size(); ++si) {
    const ScenarioEvaluation& evaluation = summary.scenarios[si];
    const EpisodeAnalysis& best =
        evaluation.episodes[static_cast<std::size_t>(evaluation.best_episode)];
    GridEpisodeEnv env(grid, catalog, scenarios[si], env_config);
    const RolloutResult rolled =
        rollout_episode(net, env, best.seed, activity_threshold);
    save_episode(rolled.record,
                 (dir / ("best-" + evaluation.scenario_id + ".csv")).string());
  }

  std::printf("scenarios=%zu\n", summary.scenarios.size());
  std::printf("episodes=%d\n", summary.episodes_total);
  std::printf("success_fraction=%s\n",
              format_double(summary.success_fraction).c_str());
  return 0;
}

int run_analyze(const std::string& scores_path, const std::string& history_path,
                const std::string& episodes_path, const std::string& out_dir) {
  const std::vector<ScenarioScore> scores =
      scores_path.empty() ? std::vector<ScenarioScore>{} : read_scores(scores_path);

  std::vector<BatchStats> history;
  if (!history_path.empty()) {
    const CsvTable table = read_csv(history_path);
    const int batch_col = table.column("batch");
    const int mean_col = table.column("mean_reward");
    const int boundary_col = table.column("reward_boundary");
    const int success_col = table.column("successes");
    if (batch_col < 0 || mean_col < 0 || boundary_col < 0 || success_col < 0) {
      throw ParseError(history_path + ": missing history columns");
    }
    for (const auto& row : table.rows) {
      BatchStats stats;
      stats.batch = static_cast<int>(
          parse_int(row[static_cast<std::size_t>(batch_col)], "batch"));
      stats.mean_reward =
          parse_double(row[static_cast<std::size_t>(mean_col)], "mean_reward");
      stats.reward_boundary = parse_double(
          row[static_cast<std::size_t>(boundary_col)], "reward_boundary");
      stats.successes = static_cast<int>(
          parse_int(row[static_cast<std::size_t>(success_col)], "successes"));
      history.push_back(std::move(stats));
    }
  }

  const CsvTable table = read_csv(episodes_path);
  const int id_col = table.column("scenario");
  const int reward_col = table.column("total_reward");
  const int success_col = table.column("success");
  const int signature_col = table.column("signature");
  const int entropy_col = table.column("entropy");
  const int revisit_col = table.column("revisit");
  if (id_col < 0 || reward_col < 0 || success_col < 0 || signature_col < 0 ||
      entropy_col < 0 || revisit_col < 0) {
    throw ParseError(episodes_path + ": missing episode columns");
  }

  EvaluationSummary summary;
  for (const auto& row : table.rows) {
    const std::string& scenario_id = row[static_cast<std::size_t>(id_col)];
    if (summary.scenarios.empty() ||
        summary.scenarios.back().scenario_id != scenario_id) {
      summary.scenarios.emplace_back();
      summary.scenarios.back().scenario_id = scenario_id;
    }
    ScenarioEvaluation& evaluation = summary.scenarios.back();
    EpisodeAnalysis episode;
    episode.scenario_id = scenario_id;
    episode.total_reward =
        parse_double(row[static_cast<std::size_t>(reward_col)], "total_reward");
    episode.success =
        parse_int(row[static_cast<std::size_t>(success_col)], "success") != 0;
    episode.signature = row[static_cast<std::size_t>(signature_col)];
    episode.entropy =
        parse_double(row[static_cast<std::size_t>(entropy_col)], "entropy");
    episode.revisit =
        parse_int(row[static_cast<std::size_t>(revisit_col)], "revisit") != 0;
    evaluation.episodes.push_back(std::move(episode));
  }
  int successful = 0;
  for (ScenarioEvaluation& evaluation : summary.scenarios) {
    for (std::size_t ei = 0; ei < evaluation.episodes.size(); ++ei) {
      const EpisodeAnalysis& episode = evaluation.episodes[ei];
      evaluation.success = evaluation.success || episode.success;
      if (episode.total_reward >
          evaluation.episodes[static_cast<std::size_t>(evaluation.best_episode)]
              .total_reward) {
        evaluation.best_episode = static_cast<int>(ei);
      }
    }
    successful += evaluation.success ? 1 : 0;
    summary.episodes_total += static_cast<int>(evaluation.episodes.size());
  }
  summary.success_fraction =
      summary.scenarios.empty()
          ? 0.0
          : static_cast<double>(successful) /
                static_cast<double>(summary.scenarios.size());

  const CsvTable episodes_table = read_csv(episodes_path);
  const auto episode_fields = episodes_table.comment_fields();
  const auto seed_it = episode_fields.find("seed");
  const std::uint64_t seed =
      seed_it == episode_fields.end()
          ? 0
          : static_cast<std::uint64_t>(parse_int(seed_it->second, "seed"));

  emit_reports(scores, history, summary, out_dir,
               run_comments(run_fields(seed, {{"scores", scores_path},
                                              {"history", history_path},
                                              {"episodes", episodes_path}})));
  std::printf("reports=%s\n", out_dir.c_str());
  return 0;
}

int run_replay(const std::string& grid_path, const std::string& scenario_path,
               const std::string& episode_path, const std::string& mode,
               int horizon) {
  const GridModel grid = load_grid(grid_path);
  const ActionCatalog catalog = build_action_catalog(grid);
  const Scenario scenario = load_scenario(scenario_path);
  const EpisodeRecord record = load_episode(episode_path);

  EnvConfig env_config;
  env_config.mode = parse_mode(mode);
  env_config.horizon = horizon;

  const EpisodeRecord replay =
      rerun_episode(grid, catalog, scenario, record, env_config);
  if (replay.steps.size() != record.steps.size()) {
    throw DomainError("replay diverged: " + std::to_string(replay.steps.size()) +
                      " steps recomputed, " + std::to_string(record.steps.size()) +
                      " recorded");
  }
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const EpisodeStep& was = record.steps[i];
    const EpisodeStep& now = replay.steps[i];
    if (now.reward != was.reward || now.applied != was.applied ||
        now.cause != was.cause) {
      throw DomainError("replay diverged at step " + std::to_string(was.step));
    }
  }
  std::printf("replayed %zu steps, rewards match, total=%s\n",
              record.steps.size(), format_double(record.total_reward()).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topogrid: busbar-splitting grid control workbench"};
  app.set_version_flag("--version", std::string(TOPOGRID_VERSION));
  app.set_config("--config", "", "Key-value config file; flags take precedence");
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int jobs = 0;
  app.add_option("--seed", seed, "Master seed for every random draw")
      ->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads (0 = hardware parallelism)")
      ->capture_default_str();

  auto* enumerate = app.add_subcommand(
      "enumerate", "Count and list the switching actions of a grid");
  std::string enum_grid, enum_out;
  enumerate->add_option("--grid", enum_grid, "Grid description (JSON)")
      ->required();
  enumerate->add_option("--out", enum_out, "Output CSV (default: stdout)");

  auto* gen = app.add_subcommand("gen-scenarios",
                                 "Generate synthetic injection scenarios");
  std::string gen_grid, gen_out;
  int gen_count = 50;
  int gen_steps = kStepsPerWeek;
  double gen_stress = 1.0;
  gen->add_option("--grid", gen_grid, "Grid description (JSON)")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of scenarios")
      ->capture_default_str();
  gen->add_option("--steps", gen_steps, "Steps per scenario")
      ->capture_default_str();
  gen->add_option("--stress", gen_stress, "Demand-surge severity knob")
      ->capture_default_str();

  auto* score = app.add_subcommand(
      "score", "Score scenario difficulty under the reference topology");
  std::string score_grid, score_dir, score_out, score_mode = "ac";
  double score_threshold = 0.95;
  score->add_option("--grid", score_grid, "Grid description (JSON)")->required();
  score->add_option("--scenarios", score_dir, "Scenario directory")->required();
  score->add_option("--out", score_out, "Output CSV")->required();
  score->add_option("--mode", score_mode, "Power-flow mode")
      ->check(CLI::IsMember({"ac", "dc"}))
      ->capture_default_str();
  score->add_option("--threshold", score_threshold, "Loading level a day must reach")
      ->capture_default_str();

  auto* select = app.add_subcommand(
      "select", "Pick the training scenario from a score table");
  std::string select_scores;
  select->add_option("--scores", select_scores, "Score CSV from `score`")
      ->required();

  auto* train_cmd =
      app.add_subcommand("train", "Train the switching policy on one scenario");
  std::string train_grid, train_scenario, train_out, train_mode = "ac";
  int train_horizon = kStepsPerWeek;
  int train_start = 0;
  TrainerConfig trainer;
  train_cmd->add_option("--grid", train_grid, "Grid description (JSON)")
      ->required();
  train_cmd->add_option("--scenario", train_scenario, "Training scenario CSV")
      ->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--mode", train_mode, "Power-flow mode")
      ->check(CLI::IsMember({"ac", "dc"}))
      ->capture_default_str();
  train_cmd->add_option("--horizon", train_horizon, "Episode length in steps")
      ->capture_default_str();
  train_cmd->add_option("--start", train_start, "First scenario row of episodes")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", trainer.batch_size, "Episodes per batch")
      ->capture_default_str();
  train_cmd
      ->add_option("--percentile", trainer.elite_percentile,
                   "Elite reward percentile")
      ->capture_default_str();
  train_cmd->add_option("--lr", trainer.learning_rate, "Learning rate")
      ->capture_default_str();
  train_cmd
      ->add_option("--activity-threshold", trainer.activity_threshold,
                   "Loading level below which the agent is forced to wait")
      ->capture_default_str();
  train_cmd
      ->add_option("--max-batches", trainer.max_batches, "Hard batch cap")
      ->capture_default_str();
  train_cmd
      ->add_option("--checkpoint-every", trainer.checkpoint_every,
                   "Batches between checkpoints")
      ->capture_default_str();

  auto* evaluate = app.add_subcommand(
      "evaluate", "Roll a trained policy across scenarios and analyze it");
  std::string eval_grid, eval_net, eval_dir, eval_out, eval_mode = "ac";
  int eval_episodes = 14;
  int eval_horizon = kStepsPerWeek;
  double eval_threshold = 0.95;
  evaluate->add_option("--grid", eval_grid, "Grid description (JSON)")->required();
  evaluate->add_option("--net", eval_net, "Policy checkpoint")->required();
  evaluate->add_option("--scenarios", eval_dir, "Scenario directory")->required();
  evaluate->add_option("--out", eval_out, "Output directory")->required();
  evaluate->add_option("--episodes", eval_episodes, "Episodes per scenario")
      ->capture_default_str();
  evaluate->add_option("--mode", eval_mode, "Power-flow mode")
      ->check(CLI::IsMember({"ac", "dc"}))
      ->capture_default_str();
  evaluate->add_option("--horizon", eval_horizon, "Episode length in steps")
      ->capture_default_str();
  evaluate
      ->add_option("--activity-threshold", eval_threshold,
                   "Loading level below which the agent is forced to wait")
      ->capture_default_str();

  auto* analyze = app.add_subcommand(
      "analyze", "Combine scores, history, and evaluation into report CSVs");
  std::string analyze_scores, analyze_history, analyze_episodes, analyze_out;
  analyze->add_option("--scores", analyze_scores, "Score CSV from `score`");
  analyze->add_option("--history", analyze_history, "history.csv from `train`");
  analyze->add_option("--episodes", analyze_episodes, "episodes.csv from `evaluate`")
      ->required();
  analyze->add_option("--out", analyze_out, "Output directory")->required();

  auto* replay = app.add_subcommand(
      "replay", "Re-run a recorded episode and confirm its rewards");
  std::string replay_grid, replay_scenario, replay_episode, replay_mode = "ac";
  int replay_horizon = kStepsPerWeek;
  replay->add_option("--grid", replay_grid, "Grid description (JSON)")->required();
  replay->add_option("--scenario", replay_scenario, "Scenario CSV")->required();
  replay->add_option("--episode", replay_episode, "Episode record CSV")
      ->required();
  replay->add_option("--mode", replay_mode, "Power-flow mode")
      ->check(CLI::IsMember({"ac", "dc"}))
      ->capture_default_str();
  replay->add_option("--horizon", replay_horizon, "Episode length in steps")
      ->capture_default_str();

  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (enumerate->parsed()) return run_enumerate(enum_grid, enum_out);
    if (gen->parsed())
      return run_gen_scenarios(gen_grid, gen_out, gen_count, gen_steps,
                               gen_stress, seed);
    if (score->parsed())
      return run_score(score_grid, score_dir, score_out, score_mode,
                       score_threshold, jobs, seed);
    if (select->parsed()) return run_select(select_scores);
    if (train_cmd->parsed()) {
      trainer.seed = seed;
      trainer.jobs = effective_jobs(jobs);
      return run_train(train_grid, train_scenario, train_out, train_mode,
                       train_horizon, train_start, trainer);
    }
    if (evaluate->parsed())
      return run_evaluate(eval_grid, eval_net, eval_dir, eval_out, eval_episodes,
                          eval_mode, eval_horizon, eval_threshold, seed, jobs);
    if (analyze->parsed())
      return run_analyze(analyze_scores, analyze_history, analyze_episodes,
                         analyze_out);
    if (replay->parsed())
      return run_replay(replay_grid, replay_scenario, replay_episode, replay_mode,
                        replay_horizon);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
