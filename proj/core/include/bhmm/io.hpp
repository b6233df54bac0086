#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bhmm/hmm.hpp"
#include "bhmm/perception.hpp"
#include "bhmm/recognizer.hpp"
#include "bhmm/simulator.hpp"

namespace bhmm {

// Model files are JSON: {"name", "n_states", "n_symbols", "pi", "a", "b"}
// and, for behavior models, "t_nominal", "max_log_prob", "argmax_sequence".
// Readers validate what they load; parse problems are ValidationErrors,
// missing or unreadable files IoErrors.

void write_hmm_model(const std::filesystem::path& file, const HmmModel& model,
                     const std::string& name);
HmmModel read_hmm_model(const std::filesystem::path& file, std::string* name = nullptr);

void write_behavior_model(const std::filesystem::path& file, const BehaviorModel& behavior);
BehaviorModel read_behavior_model(const std::filesystem::path& file);

// Position stream CSV with header `t,x,y`.
void write_positions_csv(const std::filesystem::path& file, std::span<const PositionSample> samples);
std::vector<PositionSample> read_positions_csv(const std::filesystem::path& file);

// Event stream JSON Lines: {"t": seconds, "sym": symbol}. Blank lines are skipped.
void write_events_jsonl(std::ostream& out, std::span<const ObservationEvent> events);
std::vector<ObservationEvent> read_events_jsonl(std::istream& in);
std::vector<ObservationEvent> read_events_jsonl(const std::filesystem::path& file);

// {"t_event", "time", "L": {name: L}, "posterior": {name: p}, "argmax"}.
std::string report_to_jsonl(const RecognitionReport& report);

// Run directory: measurements.csv, truth.csv, meta.json.
void write_sim_run(const std::filesystem::path& dir, const SimRun& run, int n_bins = 8);
SimRun read_sim_run(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace bhmm
