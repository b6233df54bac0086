#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bhmm/hmm.hpp"
#include "bhmm/perception.hpp"
#include "bhmm/recognizer.hpp"
#include "bhmm/simulator.hpp"

namespace bhmm {

/// Settings shared by every stage of the simulate -> perceive -> train ->
/// recognize pipeline.
struct PipelineConfig {
  RunConfig run;
  KalmanNoise kalman;
  QuantizerConfig quantizer;
  TrainConfig train;
  std::size_t states = 0;    // 0: two states per nominal event
  std::size_t branches = 2;  // left-to-right chains in the initial model
  std::size_t restarts = 1;  // independent initialisations, best kept
  std::size_t node_budget = kDefaultNodeBudget;
};

struct ExperimentConfig {
  std::vector<std::string> behaviors;  // empty: all templates
  std::size_t runs_per_behavior = 10;
  std::size_t training_runs_per_behavior = 50;
  std::uint64_t seed = 2015;
  std::filesystem::path output_dir = "eval_out";
  std::filesystem::path models_dir = "models";
  bool train_models = false;  // (re)train models_dir before evaluating
  std::size_t workers = 1;
  PipelineConfig pipeline;
};

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig read_experiment_config(const std::filesystem::path& file);
void require_valid(const ExperimentConfig& config);

// Independent seed streams derived from one master seed.
enum class SeedStream : std::uint64_t { kSimulate = 1, kTraining = 2, kEvaluation = 3 };
std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t behavior,
                          std::uint64_t run);

/// Default model size for a behavior: `branches` chains of t_nominal states.
std::size_t default_states(std::size_t t_nominal, std::size_t branches);

struct TrainedBehavior {
  BehaviorModel behavior;
  TrainResult training;
};

/// Baum-Welch from a left-to-right start, then the normalizer to t_nominal.
TrainedBehavior train_behavior(const std::string& name, std::size_t t_nominal,
                               std::span<const ObservationSequence> sequences,
                               const PipelineConfig& config);

/// Simulates `count` runs of one behavior (seeds derived from `seed`).
/// With `balanced`, directions alternate ccw/cw instead of being drawn.
std::vector<SimRun> simulate_runs(const std::string& behavior, std::size_t count,
                                  std::uint64_t seed, SeedStream stream, std::size_t behavior_slot,
                                  bool balanced, const RunConfig& base);

// --- subcommands -----------------------------------------------------------

std::vector<std::filesystem::path> cmd_simulate(const std::string& behavior, std::size_t count,
                                                std::uint64_t seed,
                                                const std::filesystem::path& out_dir,
                                                const PipelineConfig& config = {},
                                                bool balanced = false);

/// Trains from every run directory under `runs_dir` labelled `behavior` and
/// writes the behavior model file. states = 0 picks default_states().
TrainedBehavior cmd_train(const std::string& behavior, const std::filesystem::path& runs_dir,
                          std::size_t states, const std::filesystem::path& out_file,
                          const PipelineConfig& config = {});

enum class RecognizeInput { kEvents, kPositions };

/// Writes one report line per event and returns the number written.
std::size_t cmd_recognize(const std::filesystem::path& models_dir,
                          const std::filesystem::path& input, RecognizeInput kind,
                          const std::filesystem::path& out_file,
                          const PipelineConfig& config = {});

/// Simulates and trains every configured behavior into config.models_dir.
std::vector<TrainedBehavior> train_models(const ExperimentConfig& config);

struct RunOutcome {
  std::string behavior;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::size_t events = 0;
  bool first_event_correct = false;
  bool locked = false;
  double lock_in = 1.0;  // percent executed where the true behavior takes over for good
};

struct BehaviorSummary {
  std::string behavior;
  std::size_t runs = 0;
  double first_event_fraction = 0.0;
  double lock_in_mean = 1.0;
  double lock_in_worst = 1.0;
  std::size_t locked_by_40 = 0;
};

struct EvalSummary {
  std::vector<BehaviorSummary> behaviors;
  std::vector<RunOutcome> runs;
  std::size_t total_runs = 0;
  std::size_t runs_locked_by_40 = 0;
  std::size_t behaviors_mean_lock_in_by_25 = 0;
  std::size_t behaviors_first_event_majority = 0;
  double min_likelihood = 1.0;
  double max_likelihood = 0.0;
  std::size_t eval_rows = 0;
};

/// Runs the recognition experiment, writing eval.csv and summary.json into
/// config.output_dir.
EvalSummary cmd_eval(const ExperimentConfig& config);

}  // namespace bhmm
