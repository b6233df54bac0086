#include "bhmm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "bhmm/error.hpp"
#include "bhmm/io.hpp"
#include "bhmm/normalizer.hpp"
#include "json.hpp"

namespace bhmm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ValidationError(fmt::format("{}: unknown key '{}'", where, key));
    }
  }
}

Vec2 read_vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t behavior,
                          std::uint64_t run) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ behavior);
  return splitmix64(h ^ run);
}

std::size_t default_states(std::size_t t_nominal, std::size_t branches) {
  return t_nominal * branches;
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const fs::path& base_dir) {
  ExperimentConfig c;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: malformed JSON: ") + e.what());
  }
  try {
    reject_unknown(j,
                   {"behaviors", "runs_per_behavior", "training_runs_per_behavior", "seed",
                    "output_dir", "models_dir", "train_models", "workers", "run", "kalman",
                    "quantizer", "train", "states", "branches", "restarts", "node_budget"},
                   "experiment config");
    read_field(j, "behaviors", c.behaviors);
    read_field(j, "runs_per_behavior", c.runs_per_behavior);
    read_field(j, "training_runs_per_behavior", c.training_runs_per_behavior);
    read_field(j, "seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("models_dir")) c.models_dir = j["models_dir"].get<std::string>();
    read_field(j, "train_models", c.train_models);
    read_field(j, "workers", c.workers);

    auto& p = c.pipeline;
    read_field(j, "states", p.states);
    read_field(j, "branches", p.branches);
    read_field(j, "restarts", p.restarts);
    read_field(j, "node_budget", p.node_budget);
    if (j.contains("run")) {
      const json& r = j["run"];
      reject_unknown(r,
                     {"speed", "turn_rate", "sample_rate", "position_noise_sigma",
                      "detection_range", "observer_position", "path_center", "start_fraction"},
                     "experiment config 'run'");
      read_field(r, "speed", p.run.speed);
      read_field(r, "turn_rate", p.run.turn_rate);
      read_field(r, "sample_rate", p.run.sample_rate);
      read_field(r, "position_noise_sigma", p.run.position_noise_sigma);
      read_field(r, "detection_range", p.run.detection_range);
      if (r.contains("observer_position")) p.run.observer_position = read_vec2(r["observer_position"]);
      if (r.contains("path_center")) p.run.path_center = read_vec2(r["path_center"]);
      read_field(r, "start_fraction", p.run.start_fraction);
    }
    if (j.contains("kalman")) {
      const json& k = j["kalman"];
      reject_unknown(k, {"accel_sigma", "measurement_sigma"}, "experiment config 'kalman'");
      read_field(k, "accel_sigma", p.kalman.accel_sigma);
      read_field(k, "measurement_sigma", p.kalman.measurement_sigma);
    }
    if (j.contains("quantizer")) {
      const json& q = j["quantizer"];
      reject_unknown(q, {"n_bins", "trigger_angle", "settle_rate", "settle_samples", "min_speed",
                         "max_heading_sigma"},
                     "experiment config 'quantizer'");
      read_field(q, "n_bins", p.quantizer.n_bins);
      read_field(q, "trigger_angle", p.quantizer.trigger_angle);
      read_field(q, "settle_rate", p.quantizer.settle_rate);
      read_field(q, "settle_samples", p.quantizer.settle_samples);
      read_field(q, "min_speed", p.quantizer.min_speed);
      read_field(q, "max_heading_sigma", p.quantizer.max_heading_sigma);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t, {"max_iterations", "log_likelihood_tolerance", "emission_floor", "seed"},
                     "experiment config 'train'");
      read_field(t, "max_iterations", p.train.max_iterations);
      read_field(t, "log_likelihood_tolerance", p.train.log_likelihood_tolerance);
      read_field(t, "emission_floor", p.train.emission_floor);
      read_field(t, "seed", p.train.seed);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  if (!base_dir.empty()) {
    if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    if (c.models_dir.is_relative()) c.models_dir = base_dir / c.models_dir;
  }
  if (c.behaviors.empty()) c.behaviors = behavior_names();
  require_valid(c);
  return c;
}

ExperimentConfig read_experiment_config(const fs::path& file) {
  return parse_experiment_config(read_text_file(file), file.parent_path());
}

void require_valid(const ExperimentConfig& c) {
  if (c.runs_per_behavior < 1) throw ValidationError("runs_per_behavior must be >= 1");
  if (c.training_runs_per_behavior < 1) {
    throw ValidationError("training_runs_per_behavior must be >= 1");
  }
  if (c.workers < 1) throw ValidationError("workers must be >= 1");
  if (c.pipeline.branches < 1) throw ValidationError("branches must be >= 1");
  if (c.pipeline.restarts < 1) throw ValidationError("restarts must be >= 1");
  for (const auto& name : c.behaviors) find_template(name);
  require_valid(c.pipeline.quantizer);
  require_valid(c.pipeline.train, static_cast<std::size_t>(c.pipeline.quantizer.n_bins));
  RunConfig probe = c.pipeline.run;
  probe.scale = 1.0;
  require_valid(probe);
}

namespace {

std::size_t behavior_slot(const std::string& name) {
  const auto names = behavior_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

}  // namespace

TrainedBehavior train_behavior(const std::string& name, std::size_t t_nominal,
                               std::span<const ObservationSequence> sequences,
                               const PipelineConfig& config) {
  const std::size_t states =
      config.states == 0 ? default_states(t_nominal, config.branches) : config.states;
  if (states < 1) throw ValidationError("a behavior model needs at least one state");
  const auto symbols = static_cast<std::size_t>(config.quantizer.n_bins);
  const std::size_t branches = states % config.branches == 0 ? config.branches : 1;

  TrainedBehavior best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(config.restarts, 1); ++r) {
    const std::uint64_t init_seed = splitmix64(config.train.seed + r);
    const HmmModel init = left_to_right_init(states, symbols, init_seed, branches);
    TrainResult result = baum_welch_train(sequences, init, config.train);
    if (!have || result.log_likelihood.back() > best.training.log_likelihood.back()) {
      best.training = std::move(result);
      have = true;
    }
  }
  best.behavior.name = name;
  best.behavior.hmm = best.training.model;
  best.behavior.t_nominal = t_nominal;
  best.behavior.normalizer =
      build_normalizer_table(best.behavior.hmm, t_nominal, config.node_budget, name);
  return best;
}

std::vector<SimRun> simulate_runs(const std::string& behavior, std::size_t count,
                                  std::uint64_t seed, SeedStream stream, std::size_t slot,
                                  bool balanced, const RunConfig& base) {
  const BehaviorTemplate& tmpl = find_template(behavior);
  std::vector<SimRun> runs;
  runs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RunConfig rc = draw_run_config(derive_seed(seed, stream, slot, i), base);
    if (balanced) rc.direction = i % 2 == 0 ? Direction::kCounterClockwise : Direction::kClockwise;
    runs.push_back(simulate_run(build_behavior_path(tmpl, rc), rc));
  }
  return runs;
}

std::vector<fs::path> cmd_simulate(const std::string& behavior, std::size_t count,
                                   std::uint64_t seed, const fs::path& out_dir,
                                   const PipelineConfig& config, bool balanced) {
  const auto runs = simulate_runs(behavior, count, seed, SeedStream::kSimulate,
                                  behavior_slot(behavior), balanced, config.run);
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path dir = out_dir / fmt::format("{}_{:03}", behavior, i);
    write_sim_run(dir, runs[i], config.quantizer.n_bins);
    dirs.push_back(dir);
  }
  return dirs;
}

TrainedBehavior cmd_train(const std::string& behavior, const fs::path& runs_dir,
                          std::size_t states, const fs::path& out_file,
                          const PipelineConfig& config) {
  const BehaviorTemplate& tmpl = find_template(behavior);
  if (!fs::is_directory(runs_dir)) throw IoError("run directory not found: " + runs_dir.string());

  std::vector<fs::path> run_dirs;
  if (fs::exists(runs_dir / "meta.json")) run_dirs.push_back(runs_dir);
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
      run_dirs.push_back(entry.path());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());

  std::vector<ObservationSequence> sequences;
  for (const auto& dir : run_dirs) {
    SimRun run = read_sim_run(dir);
    if (run.true_behavior != behavior) continue;
    const auto events = extract_events(run.measurements, config.kalman, config.quantizer);
    if (events.empty()) {
      throw ValidationError("training run " + dir.string() + " produced no observation events");
    }
    auto seq = to_sequence(events);
    seq.label = behavior;
    sequences.push_back(std::move(seq));
  }
  if (sequences.empty()) {
    throw ValidationError(
        fmt::format("no '{}' runs found under {}", behavior, runs_dir.string()));
  }
  if (states == 0 && config.states != 0) states = config.states;
  PipelineConfig pc = config;
  pc.states = states;
  TrainedBehavior trained = train_behavior(behavior, tmpl.t_nominal(), sequences, pc);
  write_behavior_model(out_file, trained.behavior);
  return trained;
}

std::size_t cmd_recognize(const fs::path& models_dir, const fs::path& input, RecognizeInput kind,
                          const fs::path& out_file, const PipelineConfig& config) {
  const fs::path sources[] = {models_dir};
  RecognitionSession session(load_behavior_set(sources), config.node_budget);

  std::vector<ObservationEvent> events;
  std::vector<std::size_t> lines;
  if (kind == RecognizeInput::kPositions) {
    events = extract_events(read_positions_csv(input), config.kalman, config.quantizer);
  } else {
    events = read_events_jsonl(input);
    // Recover source line numbers for error messages (blank lines are skipped).
    std::ifstream in(input);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(n);
    }
  }

  std::string out;
  std::size_t written = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      out += report_to_jsonl(session.step(events[i].symbol, events[i].timestamp));
      out += '\n';
      ++written;
    } catch (const ValidationError& e) {
      write_text_file(out_file, out);
      const std::string where =
          i < lines.size() ? fmt::format("line {}", lines[i]) : fmt::format("event {}", i + 1);
      throw ValidationError(fmt::format("{}: {}", where, e.what()));
    }
  }
  write_text_file(out_file, out);
  return written;
}

std::vector<TrainedBehavior> train_models(const ExperimentConfig& config) {
  require_valid(config);
  std::vector<TrainedBehavior> trained;
  for (const auto& name : config.behaviors) {
    const auto runs = simulate_runs(name, config.training_runs_per_behavior, config.seed,
                                    SeedStream::kTraining, behavior_slot(name), true,
                                    config.pipeline.run);
    std::vector<ObservationSequence> sequences;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto events =
          extract_events(runs[i].measurements, config.pipeline.kalman, config.pipeline.quantizer);
      if (events.empty()) {
        throw ValidationError(fmt::format("training run {} of '{}' produced no events", i, name));
      }
      auto seq = to_sequence(events);
      seq.label = name;
      sequences.push_back(std::move(seq));
    }
    trained.push_back(
        train_behavior(name, find_template(name).t_nominal(), sequences, config.pipeline));
    write_behavior_model(config.models_dir / (name + ".json"), trained.back().behavior);
  }
  return trained;
}

namespace {

constexpr std::size_t kCurveBins = 20;

struct RunResult {
  RunOutcome outcome;
  std::vector<double> percent;
  std::vector<RecognitionReport> reports;
};

RunResult evaluate_run(const std::vector<BehaviorModel>& models, const std::string& behavior,
                       std::size_t run_index, const ExperimentConfig& config) {
  const PipelineConfig& p = config.pipeline;
  RunResult r;
  r.outcome.behavior = behavior;
  r.outcome.run = run_index;
  r.outcome.seed =
      derive_seed(config.seed, SeedStream::kEvaluation, behavior_slot(behavior), run_index);
  const RunConfig rc = draw_run_config(r.outcome.seed, p.run);
  const SimRun sim = simulate_run(build_behavior_path(find_template(behavior), rc), rc);
  const auto events = extract_events(sim.measurements, p.kalman, p.quantizer);

  RecognitionSession session(models, p.node_budget);
  for (const auto& e : events) {
    r.reports.push_back(session.step(e.symbol, e.timestamp));
    r.percent.push_back(sim.distance_at(e.timestamp) / sim.path_length);
  }
  r.outcome.events = events.size();

  const auto truth = std::find_if(models.begin(), models.end(),
                                  [&](const BehaviorModel& m) { return m.name == behavior; }) -
                     models.begin();
  std::size_t last_wrong = 0;
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    if (r.reports[i].argmax != static_cast<std::size_t>(truth)) last_wrong = i + 1;
  }
  r.outcome.first_event_correct =
      !r.reports.empty() && r.reports.front().argmax == static_cast<std::size_t>(truth);
  if (!r.reports.empty() && last_wrong < r.reports.size()) {
    r.outcome.locked = true;
    r.outcome.lock_in = r.percent[last_wrong];
  }
  return r;
}

}  // namespace

EvalSummary cmd_eval(const ExperimentConfig& config) {
  require_valid(config);
  if (config.train_models) train_models(config);

  std::vector<fs::path> files;
  for (const auto& name : config.behaviors) {
    const fs::path f = config.models_dir / (name + ".json");
    if (!fs::exists(f)) throw IoError("missing behavior model file " + f.string());
    files.push_back(f);
  }
  const std::vector<BehaviorModel> models = load_behavior_set(files);

  struct Job {
    std::string behavior;
    std::size_t run;
  };
  std::vector<Job> jobs;
  for (const auto& name : config.behaviors) {
    for (std::size_t r = 0; r < config.runs_per_behavior; ++r) jobs.push_back({name, r});
  }
  std::vector<RunResult> results(jobs.size());
  const std::size_t workers = std::min(config.workers, jobs.size());
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      results[j] = evaluate_run(models, jobs[j].behavior, jobs[j].run, config);
    }
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = w; j < jobs.size(); j += workers) {
            results[j] = evaluate_run(models, jobs[j].behavior, jobs[j].run, config);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalSummary summary;
  std::string csv = "behavior,run,seed,t_event,time,percent_executed";
  for (const auto& m : models) csv += ",L_" + m.name;
  csv += ",argmax\n";

  // curves[true][model][bin] = (sum L, count)
  std::vector<std::vector<std::vector<std::pair<double, std::size_t>>>> curves(
      config.behaviors.size(),
      std::vector<std::vector<std::pair<double, std::size_t>>>(
          models.size(), std::vector<std::pair<double, std::size_t>>(kCurveBins, {0.0, 0})));

  for (std::size_t j = 0; j < results.size(); ++j) {
    const auto& r = results[j];
    const std::size_t true_slot =
        static_cast<std::size_t>(std::find(config.behaviors.begin(), config.behaviors.end(),
                                           r.outcome.behavior) -
                                 config.behaviors.begin());
    for (std::size_t e = 0; e < r.reports.size(); ++e) {
      const auto& rep = r.reports[e];
      csv += fmt::format("{},{},{},{},{},{}", r.outcome.behavior, r.outcome.run, r.outcome.seed,
                         rep.t, rep.timestamp, r.percent[e]);
      const auto bin = std::min(static_cast<std::size_t>(r.percent[e] * kCurveBins), kCurveBins - 1);
      for (std::size_t m = 0; m < rep.scores.size(); ++m) {
        const double l = rep.scores[m].likelihood;
        csv += fmt::format(",{}", l);
        summary.min_likelihood = std::min(summary.min_likelihood, l);
        summary.max_likelihood = std::max(summary.max_likelihood, l);
        curves[true_slot][m][bin].first += l;
        curves[true_slot][m][bin].second += 1;
      }
      csv += "," + rep.argmax_name() + "\n";
      ++summary.eval_rows;
    }
    summary.runs.push_back(r.outcome);
  }

  json per_behavior = json::object();
  for (std::size_t b = 0; b < config.behaviors.size(); ++b) {
    BehaviorSummary s;
    s.behavior = config.behaviors[b];
    double total = 0.0;
    double worst = 0.0;
    std::size_t first = 0;
    json lock_ins = json::array();
    for (const auto& o : summary.runs) {
      if (o.behavior != s.behavior) continue;
      ++s.runs;
      const double li = o.locked ? o.lock_in : 1.0;
      total += li;
      worst = std::max(worst, li);
      if (o.first_event_correct) ++first;
      if (o.locked && o.lock_in <= 0.40) ++s.locked_by_40;
      lock_ins.push_back(o.locked ? json(o.lock_in) : json(nullptr));
    }
    s.first_event_fraction = static_cast<double>(first) / static_cast<double>(s.runs);
    s.lock_in_mean = total / static_cast<double>(s.runs);
    s.lock_in_worst = worst;
    summary.total_runs += s.runs;
    summary.runs_locked_by_40 += s.locked_by_40;
    if (s.lock_in_mean <= 0.25) ++summary.behaviors_mean_lock_in_by_25;
    if (2 * first > s.runs) ++summary.behaviors_first_event_majority;

    json curve = json::object();
    for (std::size_t m = 0; m < models.size(); ++m) {
      json values = json::array();
      for (const auto& [sum, count] : curves[b][m]) {
        values.push_back(count > 0 ? json(sum / static_cast<double>(count)) : json(nullptr));
      }
      curve[models[m].name] = std::move(values);
    }
    per_behavior[s.behavior] = {{"runs", s.runs},
                                {"first_event_fraction", s.first_event_fraction},
                                {"lock_in_mean", s.lock_in_mean},
                                {"lock_in_worst", s.lock_in_worst},
                                {"locked_by_40", s.locked_by_40},
                                {"lock_in_per_run", std::move(lock_ins)},
                                {"mean_likelihood_curve", std::move(curve)}};
    summary.behaviors.push_back(s);
  }

  const json out{
      {"seed", config.seed},
      {"runs_per_behavior", config.runs_per_behavior},
      {"total_runs", summary.total_runs},
      {"runs_locked_by_40", summary.runs_locked_by_40},
      {"fraction_locked_by_40",
       static_cast<double>(summary.runs_locked_by_40) / static_cast<double>(summary.total_runs)},
      {"behaviors_mean_lock_in_by_25", summary.behaviors_mean_lock_in_by_25},
      {"behaviors_first_event_majority", summary.behaviors_first_event_majority},
      {"likelihood_range", {summary.min_likelihood, summary.max_likelihood}},
      {"eval_rows", summary.eval_rows},
      {"lock_in_definition",
       "smallest percent_executed at an event from which the true behavior is the argmax of L "
       "through the last event; null when it never takes over (counted as 1.0 in means)"},
      {"curve_binning", "mean L per model over events in 5% bins of percent_executed"},
      {"behaviors", std::move(per_behavior)}};

  write_text_file(config.output_dir / "eval.csv", csv);
  write_text_file(config.output_dir / "summary.json", out.dump(2) + "\n");
  return summary;
}

}  // namespace bhmm
