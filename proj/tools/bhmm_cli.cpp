// Command-line front end: simulate, train, recognize, eval.
//
// Exit codes: 0 success, 1 validation errors, 2 I/O errors.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "CLI11.hpp"
#include "bhmm/error.hpp"
#include "bhmm/experiment.hpp"
#include "bhmm/simulator.hpp"

namespace fs = std::filesystem;

namespace {

bhmm::PipelineConfig pipeline_from(const std::string& config_file) {
  if (config_file.empty()) return {};
  return bhmm::read_experiment_config(config_file).pipeline;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HMM behavior recognition toolkit"};
  app.require_subcommand(1);

  std::string behavior;
  std::size_t count = 10;
  std::uint64_t seed = 1;
  std::string out;
  std::string pipeline_config;
  bool balanced = false;
  auto* simulate = app.add_subcommand("simulate", "Write randomized runs of one behavior");
  simulate->add_option("--behavior", behavior, "Behavior template name")->required();
  simulate->add_option("--count", count, "Number of runs")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Master seed");
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->add_flag("--balanced", balanced, "Alternate ccw/cw instead of drawing the direction");
  simulate->add_option("--config", pipeline_config, "Experiment config supplying pipeline settings");

  std::string runs;
  std::size_t states = 0;
  auto* train = app.add_subcommand("train", "Train one behavior model from run directories");
  train->add_option("--behavior", behavior, "Behavior template name")->required();
  train->add_option("--runs", runs, "Directory of simulated runs")->required();
  train->add_option("--states", states, "Hidden states (default: two per nominal event)");
  train->add_option("--out", out, "Behavior model file")->required();
  train->add_option("--config", pipeline_config, "Experiment config supplying pipeline settings");

  std::string models;
  std::string events;
  std::string positions;
  auto* recognize = app.add_subcommand("recognize", "Run online recognition over one stream");
  recognize->add_option("--models", models, "Directory of behavior model files")->required();
  auto* ev = recognize->add_option("--events", events, "Event stream (JSON Lines)");
  auto* pos = recognize->add_option("--positions", positions, "Position stream (CSV t,x,y)");
  ev->excludes(pos);
  recognize->add_option("--out", out, "Report output (JSON Lines)")->required();
  recognize->add_option("--config", pipeline_config, "Experiment config supplying pipeline settings");

  std::string eval_config;
  auto* eval = app.add_subcommand("eval", "Reproduce the behavior recognition experiment");
  eval->add_option("--config", eval_config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) {
      const auto dirs =
          bhmm::cmd_simulate(behavior, count, seed, out, pipeline_from(pipeline_config), balanced);
      for (const auto& d : dirs) std::cout << d.string() << '\n';
    } else if (*train) {
      if (train->count("--states") > 0 && states == 0) {
        throw bhmm::ValidationError("--states must be positive");
      }
      const auto trained = bhmm::cmd_train(behavior, runs, states, out, pipeline_from(pipeline_config));
      const auto& tr = trained.training;
      for (std::size_t i = 0; i < tr.log_likelihood.size(); ++i) {
        std::cout << fmt::format("iter {:3d}  log-likelihood {:.10f}\n", i, tr.log_likelihood[i]);
      }
      for (const auto& w : tr.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << fmt::format("argmax sequence: {}\n",
                               fmt::join(trained.behavior.normalizer.argmax_sequence, " "));
    } else if (*recognize) {
      if (events.empty() == positions.empty()) {
        throw bhmm::ValidationError("exactly one of --events or --positions is required");
      }
      const auto kind =
          events.empty() ? bhmm::RecognizeInput::kPositions : bhmm::RecognizeInput::kEvents;
      const auto n = bhmm::cmd_recognize(models, events.empty() ? positions : events, kind, out,
                                         pipeline_from(pipeline_config));
      std::cerr << n << " reports written to " << out << '\n';
    } else if (*eval) {
      const auto config = bhmm::read_experiment_config(eval_config);
      const auto summary = bhmm::cmd_eval(config);
      for (const auto& b : summary.behaviors) {
        std::cout << fmt::format("{:<12} first-event {:4.0f}%  lock-in mean {:5.1f}%  worst {:5.1f}%\n",
                                 b.behavior, 100.0 * b.first_event_fraction, 100.0 * b.lock_in_mean,
                                 100.0 * b.lock_in_worst);
      }
      std::cout << fmt::format("locked by 40%: {}/{} runs\n", summary.runs_locked_by_40,
                               summary.total_runs);
      std::cout << "wrote " << (config.output_dir / "eval.csv").string() << " and "
                << (config.output_dir / "summary.json").string() << '\n';
    }
  } catch (const bhmm::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const bhmm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
