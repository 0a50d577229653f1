#include "topogrid/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>
#include <utility>

#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/rng.hpp"

namespace topogrid {
namespace {

bool is_base(const std::vector<std::uint8_t>& busbar) {
  return std::all_of(busbar.begin(), busbar.end(),
                     [](std::uint8_t b) { return b == 1; });
}

void write_table(CsvWriter& out, const std::vector<std::string>& comments) {
  for (const std::string& comment : comments) {
    out.comment(comment);
  }
}

}  // namespace

int TopologySequence::total_rows() const {
  int rows = 0;
  for (const TopologyRun& run : runs) {
    rows += run.dwell;
  }
  return rows;
}

TopologySequence topology_sequence(const GridModel& grid,
                                   const ActionCatalog& catalog,
                                   const EpisodeRecord& episode) {
  if (episode.steps.empty()) {
    throw ContractViolation("cannot sequence an episode with no steps");
  }

  TopologySequence sequence;
  const auto visit = [&sequence](const std::vector<std::uint8_t>& busbar) {
    int index = -1;
    for (std::size_t k = 0; k < sequence.topologies.size(); ++k) {
      if (sequence.topologies[k] == busbar) {
        index = static_cast<int>(k);
        break;
      }
    }
    if (index < 0) {
      index = static_cast<int>(sequence.topologies.size());
      sequence.topologies.push_back(busbar);
    }
    if (!sequence.runs.empty() && sequence.runs.back().topology == index) {
      ++sequence.runs.back().dwell;
      return;
    }
    if (std::any_of(sequence.runs.begin(), sequence.runs.end(),
                    [index](const TopologyRun& run) { return run.topology == index; })) {
      sequence.revisit = true;
    }
    sequence.runs.push_back({index, 1});
  };

  Topology topology = base_topology(grid);
  std::vector<int> no_cooldowns(static_cast<std::size_t>(grid.n_substations()), 0);
  visit(topology.busbar);
  for (const EpisodeStep& step : episode.steps) {
    if (step.applied) {
      const Action& action = catalog.action(step.action_id);
      if (action.kind == Action::reconfigure) {
        std::fill(no_cooldowns.begin(), no_cooldowns.end(), 0);
        topology = apply_action(grid, topology, action, no_cooldowns).topology;
      }
    }
    visit(topology.busbar);
  }
  return sequence;
}

double topological_entropy(const TopologySequence& sequence) {
  if (sequence.runs.empty()) {
    throw ContractViolation("cannot take the entropy of an empty sequence");
  }
  std::vector<double> dwell(sequence.topologies.size(), 0.0);
  double total = 0.0;
  for (const TopologyRun& run : sequence.runs) {
    if (run.dwell <= 0) {
      throw ContractViolation("dwell counts must be positive");
    }
    dwell[static_cast<std::size_t>(run.topology)] += run.dwell;
    total += run.dwell;
  }
  double entropy = 0.0;
  for (const double steps : dwell) {
    if (steps > 0.0) {
      const double p = steps / total;
      entropy -= p * std::log(p);
    }
  }
  return std::max(entropy, 0.0);
}

std::string sequence_signature(const TopologySequence& sequence) {
  std::vector<std::string> names(sequence.topologies.size());
  int next_label = 1;
  for (std::size_t k = 0; k < sequence.topologies.size(); ++k) {
    names[k] = is_base(sequence.topologies[k]) ? "B" : "T" + std::to_string(next_label++);
  }
  std::string signature;
  for (const TopologyRun& run : sequence.runs) {
    if (!signature.empty()) {
      signature += "->";
    }
    signature += names[static_cast<std::size_t>(run.topology)];
  }
  return signature;
}

EpisodeAnalysis analyze_episode(const GridModel& grid, const ActionCatalog& catalog,
                                const EpisodeRecord& episode) {
  EpisodeAnalysis analysis;
  analysis.scenario_id = episode.scenario_id;
  analysis.seed = episode.seed;
  analysis.total_reward = episode.total_reward();
  analysis.success = episode.success();
  analysis.sequence = topology_sequence(grid, catalog, episode);
  analysis.signature = sequence_signature(analysis.sequence);
  analysis.entropy = topological_entropy(analysis.sequence);
  analysis.revisit = analysis.sequence.revisit;
  return analysis;
}

EvaluationSummary evaluate_agent(const PolicyNet& net, const GridModel& grid,
                                 const ActionCatalog& catalog,
                                 const std::vector<Scenario>& scenarios,
                                 int episodes_per_scenario, std::uint64_t seed,
                                 const EnvConfig& env_config,
                                 double activity_threshold, int jobs) {
  if (episodes_per_scenario < 1) {
    throw ContractViolation("need at least one episode per scenario");
  }
  if (jobs < 1) {
    throw ContractViolation("job count must be positive");
  }
  if (scenarios.empty()) {
    throw DomainError("no scenarios to evaluate");
  }

  EvaluationSummary summary;
  summary.scenarios.resize(scenarios.size());

  const auto run_scenario = [&](std::size_t si) {
    ScenarioEvaluation& evaluation = summary.scenarios[si];
    evaluation.scenario_id = scenarios[si].id;
    GridEpisodeEnv env(grid, catalog, scenarios[si], env_config);
    for (int ei = 0; ei < episodes_per_scenario; ++ei) {
      const std::uint64_t episode_seed =
          derive_seed(seed, static_cast<std::uint64_t>(si),
                      static_cast<std::uint64_t>(ei));
      const RolloutResult rolled =
          rollout_episode(net, env, episode_seed, activity_threshold);
      evaluation.episodes.push_back(analyze_episode(grid, catalog, rolled.record));
    }
    for (int ei = 0; ei < episodes_per_scenario; ++ei) {
      const EpisodeAnalysis& episode = evaluation.episodes[static_cast<std::size_t>(ei)];
      evaluation.success = evaluation.success || episode.success;
      if (episode.total_reward >
          evaluation.episodes[static_cast<std::size_t>(evaluation.best_episode)]
              .total_reward) {
        evaluation.best_episode = ei;
      }
    }
  };

  const int workers = std::min<int>(jobs, static_cast<int>(scenarios.size()));
  if (workers == 1) {
    for (std::size_t si = 0; si < scenarios.size(); ++si) {
      run_scenario(si);
    }
  } else {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t si = static_cast<std::size_t>(w); si < scenarios.size();
               si += static_cast<std::size_t>(workers)) {
            run_scenario(si);
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

  int successful = 0;
  for (const ScenarioEvaluation& evaluation : summary.scenarios) {
    successful += evaluation.success ? 1 : 0;
    summary.episodes_total += static_cast<int>(evaluation.episodes.size());
  }
  summary.success_fraction =
      static_cast<double>(successful) / static_cast<double>(summary.scenarios.size());
  return summary;
}

void emit_reports(const std::vector<ScenarioScore>& scores,
                  const std::vector<BatchStats>& history,
                  const EvaluationSummary& summary, const std::string& out_dir,
                  const std::vector<std::string>& comments) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  std::map<std::string, bool> outcome_by_scenario;
  for (const ScenarioEvaluation& evaluation : summary.scenarios) {
    outcome_by_scenario[evaluation.scenario_id] = evaluation.success;
  }

  {
    CsvWriter out((dir / "scenario_scatter.csv").string());
    write_table(out, comments);
    out.header({"scenario", "days_above", "max_loading", "trained_success"});
    for (const ScenarioScore& score : scores) {
      const auto it = outcome_by_scenario.find(score.scenario_id);
      const std::string outcome =
          it == outcome_by_scenario.end() ? "na" : (it->second ? "1" : "0");
      out.row({score.scenario_id, std::to_string(score.days_above),
               format_double(score.max_loading), outcome});
    }
  }

  {
    CsvWriter out((dir / "training_curve.csv").string());
    write_table(out, comments);
    out.header({"batch", "mean_reward", "reward_boundary", "successes"});
    for (const BatchStats& stats : history) {
      out.row({std::to_string(stats.batch), format_double(stats.mean_reward),
               format_double(stats.reward_boundary),
               std::to_string(stats.successes)});
    }
  }

  {
    struct Group {
      int episodes = 0;
      double entropy_min = 0.0;
      double entropy_max = 0.0;
    };
    std::map<std::string, Group> groups;
    for (const ScenarioEvaluation& evaluation : summary.scenarios) {
      if (evaluation.episodes.empty()) {
        continue;
      }
      const EpisodeAnalysis& best =
          evaluation.episodes[static_cast<std::size_t>(evaluation.best_episode)];
      auto [it, inserted] =
          groups.try_emplace(best.signature, Group{1, best.entropy, best.entropy});
      if (!inserted) {
        ++it->second.episodes;
        it->second.entropy_min = std::min(it->second.entropy_min, best.entropy);
        it->second.entropy_max = std::max(it->second.entropy_max, best.entropy);
      }
    }
    std::vector<std::pair<std::string, Group>> rows(groups.begin(), groups.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      if (a.second.episodes != b.second.episodes) {
        return a.second.episodes > b.second.episodes;
      }
      return a.first < b.first;
    });

    CsvWriter out((dir / "topology_table.csv").string());
    write_table(out, comments);
    out.header({"sequence", "episodes", "entropy_min", "entropy_max"});
    for (const auto& [signature, group] : rows) {
      out.row({signature, std::to_string(group.episodes),
               format_double(group.entropy_min), format_double(group.entropy_max)});
    }
  }
}

}  // namespace topogrid
