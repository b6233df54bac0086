#include "bhmm/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "bhmm/error.hpp"
#include "json.hpp"

namespace bhmm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + file.string());
  return buf.str();
}

void write_text_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + file.parent_path().string());
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("error writing " + file.string());
}

namespace {

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(where + ": malformed JSON: " + e.what());
  }
}

// JSON has no infinities; -inf log-probabilities travel as null.
json log_value(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_log_value(const json& j) { return j.is_null() ? kNegInf : j.get<double>(); }

json matrix_rows(std::span<const double> flat, std::size_t rows, std::size_t cols) {
  json out = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(flat.begin() + r * cols, flat.begin() + (r + 1) * cols));
  }
  return out;
}

json model_json(const HmmModel& m, const std::string& name) {
  return json{{"name", name},
              {"n_states", m.n_states},
              {"n_symbols", m.n_symbols},
              {"pi", m.pi},
              {"a", matrix_rows(m.a, m.n_states, m.n_states)},
              {"b", matrix_rows(m.b, m.n_states, m.n_symbols)}};
}

HmmModel model_from_json(const json& j, const std::string& where) {
  HmmModel m;
  try {
    m.n_states = j.at("n_states").get<std::size_t>();
    m.n_symbols = j.at("n_symbols").get<std::size_t>();
    m.pi = j.at("pi").get<std::vector<double>>();
    for (const auto& row : j.at("a")) {
      const auto r = row.get<std::vector<double>>();
      if (r.size() != m.n_states) throw ValidationError(where + ": ragged row in a");
      m.a.insert(m.a.end(), r.begin(), r.end());
    }
    for (const auto& row : j.at("b")) {
      const auto r = row.get<std::vector<double>>();
      if (r.size() != m.n_symbols) throw ValidationError(where + ": ragged row in b");
      m.b.insert(m.b.end(), r.begin(), r.end());
    }
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  require_valid(m, where);
  return m;
}

}  // namespace

void write_hmm_model(const fs::path& file, const HmmModel& model, const std::string& name) {
  write_text_file(file, model_json(model, name).dump(2) + "\n");
}

HmmModel read_hmm_model(const fs::path& file, std::string* name) {
  const json j = parse_json(read_text_file(file), file.string());
  HmmModel m = model_from_json(j, file.string());
  if (name != nullptr) *name = j.value("name", std::string{});
  return m;
}

void write_behavior_model(const fs::path& file, const BehaviorModel& behavior) {
  json j = model_json(behavior.hmm, behavior.name);
  j["t_nominal"] = behavior.t_nominal;
  json maxima = json::array();
  for (double v : behavior.normalizer.max_log_prob) maxima.push_back(log_value(v));
  j["max_log_prob"] = std::move(maxima);
  j["argmax_sequence"] = behavior.normalizer.argmax_sequence;
  write_text_file(file, j.dump(2) + "\n");
}

BehaviorModel read_behavior_model(const fs::path& file) {
  const std::string where = file.string();
  const json j = parse_json(read_text_file(file), where);
  BehaviorModel b;
  b.hmm = model_from_json(j, where);
  try {
    b.name = j.at("name").get<std::string>();
    b.t_nominal = j.at("t_nominal").get<std::size_t>();
    for (const auto& v : j.at("max_log_prob")) b.normalizer.max_log_prob.push_back(read_log_value(v));
    b.normalizer.argmax_sequence = j.at("argmax_sequence").get<std::vector<Symbol>>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  if (b.name.empty()) throw ValidationError(where + ": behavior name is empty");
  b.normalizer.model_name = b.name;
  return b;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("{}: '{}' is not a number", where, text));
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size() || !std::isfinite(v)) {
    throw ValidationError(fmt::format("{}: '{}' is not a finite number", where, text));
  }
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Reads a CSV whose header must start with `header`; returns numeric rows.
std::vector<std::vector<double>> read_numeric_csv(const fs::path& file,
                                                  const std::vector<std::string>& header) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(file.string() + ": missing header");
  strip_cr(line);
  const auto cols = split_csv(line);
  if (cols.size() < header.size() || !std::equal(header.begin(), header.end(), cols.begin())) {
    throw ValidationError(
        fmt::format("{}: header must be '{}'", file.string(), fmt::join(header, ",")));
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = fmt::format("{}:{}", file.string(), line_no);
    if (cells.size() != cols.size()) {
      throw ValidationError(fmt::format("{}: expected {} fields, got {}", where, cols.size(),
                                        cells.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < header.size(); ++c) row.push_back(parse_double(cells[c], where));
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("error reading " + file.string());
  return rows;
}

}  // namespace

void write_positions_csv(const fs::path& file, std::span<const PositionSample> samples) {
  std::string text = "t,x,y\n";
  for (const auto& s : samples) text += fmt::format("{},{},{}\n", s.t, s.x, s.y);
  write_text_file(file, text);
}

std::vector<PositionSample> read_positions_csv(const fs::path& file) {
  std::vector<PositionSample> out;
  for (const auto& row : read_numeric_csv(file, {"t", "x", "y"})) {
    if (!out.empty() && !(row[0] > out.back().t)) {
      throw ValidationError(fmt::format("{}: timestamps must increase (t = {})", file.string(), row[0]));
    }
    out.push_back({row[0], row[1], row[2]});
  }
  return out;
}

void write_events_jsonl(std::ostream& out, std::span<const ObservationEvent> events) {
  for (const auto& e : events) out << json{{"t", e.timestamp}, {"sym", e.symbol}}.dump() << '\n';
}

std::vector<ObservationEvent> read_events_jsonl(std::istream& in) {
  std::vector<ObservationEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = fmt::format("event line {}", line_no);
    const json j = parse_json(line, where);
    ObservationEvent e;
    try {
      e.timestamp = j.at("t").get<double>();
      const json& sym = j.at("sym");
      if (!sym.is_number_integer()) throw ValidationError(where + ": 'sym' must be an integer");
      e.symbol = sym.get<Symbol>();
    } catch (const json::exception& ex) {
      throw ValidationError(where + ": " + ex.what());
    }
    if (!events.empty() && e.timestamp < events.back().timestamp) {
      throw ValidationError(where + ": timestamps must be nondecreasing");
    }
    events.push_back(e);
  }
  if (in.bad()) throw IoError("error reading event stream");
  return events;
}

std::vector<ObservationEvent> read_events_jsonl(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  return read_events_jsonl(in);
}

std::string report_to_jsonl(const RecognitionReport& report) {
  json likelihood = json::object();
  json posterior = json::object();
  for (const auto& s : report.scores) {
    likelihood[s.name] = s.likelihood;
    posterior[s.name] = report.posterior_defined ? json(s.posterior) : json(nullptr);
  }
  return json{{"t_event", report.t},
              {"time", report.timestamp},
              {"L", std::move(likelihood)},
              {"posterior", std::move(posterior)},
              {"argmax", report.argmax_name()}}
      .dump();
}

void write_sim_run(const fs::path& dir, const SimRun& run, int n_bins) {
  write_positions_csv(dir / "measurements.csv", run.measurements);
  std::string truth = "t,x,y,heading\n";
  for (const auto& s : run.truth) truth += fmt::format("{},{},{},{}\n", s.t, s.x, s.y, s.heading);
  write_text_file(dir / "truth.csv", truth);

  json turns = json::array();
  for (const auto& e : run.true_turn_events) {
    turns.push_back({{"time", e.time}, {"angle", e.angle}, {"symbol", quantize_turn(e.angle, n_bins)}});
  }
  const auto& c = run.config;
  const json meta{{"behavior", run.true_behavior},
                  {"seed", c.seed},
                  {"scale", c.scale},
                  {"initial_heading", c.initial_heading},
                  {"direction", std::string(to_string(c.direction))},
                  {"path_length", run.path_length},
                  {"n_bins", n_bins},
                  {"expected_turn_events", std::move(turns)},
                  {"speed", c.speed},
                  {"turn_rate", c.turn_rate},
                  {"sample_rate", c.sample_rate},
                  {"position_noise_sigma", c.position_noise_sigma},
                  {"detection_range", c.detection_range},
                  {"observer_position", {c.observer_position.x, c.observer_position.y}},
                  {"path_center", {c.path_center.x, c.path_center.y}},
                  {"start_fraction", c.start_fraction}};
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

SimRun read_sim_run(const fs::path& dir) {
  SimRun run;
  run.measurements = read_positions_csv(dir / "measurements.csv");
  double travelled = 0.0;
  for (const auto& row : read_numeric_csv(dir / "truth.csv", {"t", "x", "y", "heading"})) {
    TruthSample s{row[0], row[1], row[2], row[3], 0.0};
    if (!run.truth.empty()) {
      travelled += std::hypot(s.x - run.truth.back().x, s.y - run.truth.back().y);
    }
    s.distance = travelled;
    run.truth.push_back(s);
  }
  const std::string where = (dir / "meta.json").string();
  const json meta = parse_json(read_text_file(dir / "meta.json"), where);
  try {
    run.true_behavior = meta.at("behavior").get<std::string>();
    run.path_length = meta.at("path_length").get<double>();
    auto& c = run.config;
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.scale = meta.at("scale").get<double>();
    c.initial_heading = meta.value("initial_heading", 0.0);
    c.direction = parse_direction(meta.at("direction").get<std::string>());
    c.speed = meta.value("speed", c.speed);
    c.turn_rate = meta.value("turn_rate", c.turn_rate);
    c.sample_rate = meta.value("sample_rate", c.sample_rate);
    c.position_noise_sigma = meta.value("position_noise_sigma", c.position_noise_sigma);
    c.detection_range = meta.value("detection_range", c.detection_range);
    c.start_fraction = meta.value("start_fraction", c.start_fraction);
    if (meta.contains("observer_position")) {
      c.observer_position = {meta["observer_position"].at(0).get<double>(),
                             meta["observer_position"].at(1).get<double>()};
    }
    if (meta.contains("path_center")) {
      c.path_center = {meta["path_center"].at(0).get<double>(),
                       meta["path_center"].at(1).get<double>()};
    }
    for (const auto& e : meta.at("expected_turn_events")) {
      run.true_turn_events.push_back({e.at("time").get<double>(), e.at("angle").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return run;
}

}  // namespace bhmm
