#include "bhmm/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "bhmm/error.hpp"

namespace bhmm {

HmmModel::HmmModel(std::size_t states, std::size_t symbols)
    : n_states(states),
      n_symbols(symbols),
      pi(states, 0.0),
      a(states * states, 0.0),
      b(states * symbols, 0.0) {}

HmmModel::HmmModel(std::vector<double> initial, std::vector<std::vector<double>> transitions,
                   std::vector<std::vector<double>> emissions)
    : n_states(initial.size()),
      n_symbols(emissions.empty() ? 0 : emissions.front().size()),
      pi(std::move(initial)) {
  if (transitions.size() != n_states || emissions.size() != n_states) {
    throw ValidationError("transition and emission matrices need one row per state");
  }
  for (const auto& row : transitions) {
    if (row.size() != n_states) throw ValidationError("transition rows must have n_states entries");
    a.insert(a.end(), row.begin(), row.end());
  }
  for (const auto& row : emissions) {
    if (row.size() != n_symbols) throw ValidationError("emission rows must have equal length");
    b.insert(b.end(), row.begin(), row.end());
  }
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v;
  }
  return out;
}

namespace {

void check_probability(double value, const std::string& where, std::vector<std::string>& out) {
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    out.push_back(fmt::format("{} = {} is outside [0, 1]", where, value));
  }
}

void check_sum(std::span<const double> row, const std::string& where,
               std::vector<std::string>& out) {
  const double sum = std::accumulate(row.begin(), row.end(), 0.0);
  if (!(std::abs(sum - 1.0) <= kStochasticTolerance)) {
    out.push_back(fmt::format("{} sums to {:.17g}, expected 1", where, sum));
  }
}

}  // namespace

ValidationReport validate_model(const HmmModel& m) {
  ValidationReport report;
  auto& v = report.violations;
  if (m.n_states < 1) v.push_back("n_states must be >= 1");
  if (m.n_symbols < 1) v.push_back("n_symbols must be >= 1");
  if (m.pi.size() != m.n_states) {
    v.push_back(fmt::format("pi has {} entries, expected {}", m.pi.size(), m.n_states));
  }
  if (m.a.size() != m.n_states * m.n_states) {
    v.push_back(fmt::format("a has {} entries, expected {}x{}", m.a.size(), m.n_states, m.n_states));
  }
  if (m.b.size() != m.n_states * m.n_symbols) {
    v.push_back(fmt::format("b has {} entries, expected {}x{}", m.b.size(), m.n_states, m.n_symbols));
  }
  if (!v.empty()) return report;

  for (std::size_t i = 0; i < m.n_states; ++i) check_probability(m.pi[i], fmt::format("pi[{}]", i), v);
  check_sum(m.pi, "pi", v);
  for (std::size_t i = 0; i < m.n_states; ++i) {
    for (std::size_t j = 0; j < m.n_states; ++j) {
      check_probability(m.trans(i, j), fmt::format("a[{}][{}]", i, j), v);
    }
    check_sum(std::span(m.a).subspan(i * m.n_states, m.n_states), fmt::format("a row {}", i), v);
  }
  for (std::size_t j = 0; j < m.n_states; ++j) {
    for (std::size_t k = 0; k < m.n_symbols; ++k) {
      check_probability(m.emit(j, k), fmt::format("b[{}][{}]", j, k), v);
    }
    check_sum(std::span(m.b).subspan(j * m.n_symbols, m.n_symbols), fmt::format("b row {}", j), v);
  }
  return report;
}

void require_valid(const HmmModel& model, const std::string& context) {
  const auto report = validate_model(model);
  if (!report.ok()) throw ValidationError(context + " is invalid: " + report.summary());
}

ObservationSequence make_sequence(std::vector<Symbol> symbols) {
  ObservationSequence seq;
  seq.timestamps.resize(symbols.size());
  std::iota(seq.timestamps.begin(), seq.timestamps.end(), 0.0);
  seq.symbols = std::move(symbols);
  return seq;
}

namespace {

void check_symbol(const HmmModel& model, Symbol symbol) {
  if (symbol < 0 || static_cast<std::size_t>(symbol) >= model.n_symbols) {
    throw ValidationError(
        fmt::format("symbol {} is outside the alphabet [0, {})", symbol, model.n_symbols));
  }
}

// Divides by the step mass and folds it into the log scale; a zero mass
// rules the prefix out for good.
void renormalize(ForwardState& s, double mass) {
  if (mass > 0.0) {
    for (double& x : s.alpha_hat) x /= mass;
    // mass is a conditional probability; rounding can push it a hair past 1.
    s.log_prob += std::log(std::min(mass, 1.0));
  } else {
    std::fill(s.alpha_hat.begin(), s.alpha_hat.end(), 0.0);
    s.log_prob = kNegInf;
  }
}

}  // namespace

ForwardState forward_init(const HmmModel& model, Symbol symbol) {
  check_symbol(model, symbol);
  ForwardState s;
  s.alpha_hat.resize(model.n_states);
  s.t = 1;
  s.log_prob = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < model.n_states; ++i) {
    s.alpha_hat[i] = model.pi[i] * model.emit(i, static_cast<std::size_t>(symbol));
    mass += s.alpha_hat[i];
  }
  renormalize(s, mass);
  return s;
}

void forward_step_into(const ForwardState& state, const HmmModel& model, Symbol symbol,
                       ForwardState& out) {
  check_symbol(model, symbol);
  const std::size_t n = model.n_states;
  out.alpha_hat.assign(n, 0.0);
  out.t = state.t + 1;
  out.log_prob = state.log_prob;
  if (state.impossible()) return;

  for (std::size_t i = 0; i < n; ++i) {
    const double ai = state.alpha_hat[i];
    if (ai == 0.0) continue;
    const double* row = model.a.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) out.alpha_hat[j] += ai * row[j];
  }
  double mass = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out.alpha_hat[j] *= model.emit(j, static_cast<std::size_t>(symbol));
    mass += out.alpha_hat[j];
  }
  renormalize(out, mass);
}

ForwardState forward_step(const ForwardState& state, const HmmModel& model, Symbol symbol) {
  ForwardState out;
  forward_step_into(state, model, symbol, out);
  return out;
}

double sequence_log_prob(const HmmModel& model, std::span<const Symbol> symbols) {
  if (symbols.empty()) throw ValidationError("cannot score an empty observation sequence");
  ForwardState state = forward_init(model, symbols.front());
  for (std::size_t t = 1; t < symbols.size(); ++t) state = forward_step(state, model, symbols[t]);
  return state.log_prob;
}

double sequence_log_prob(const HmmModel& model, const ObservationSequence& seq) {
  return sequence_log_prob(model, std::span<const Symbol>(seq.symbols));
}

namespace {

std::size_t draw_index(std::span<const double> weights, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = unit(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding left u past the last bucket: pick the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace

ObservationSequence sample_sequence(const HmmModel& model, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::span<const double> a(model.a);
  const std::span<const double> b(model.b);
  std::vector<Symbol> symbols;
  symbols.reserve(length);
  std::size_t state = 0;
  for (std::size_t t = 0; t < length; ++t) {
    state = t == 0 ? draw_index(model.pi, rng)
                   : draw_index(a.subspan(state * model.n_states, model.n_states), rng);
    symbols.push_back(
        static_cast<Symbol>(draw_index(b.subspan(state * model.n_symbols, model.n_symbols), rng)));
  }
  return make_sequence(std::move(symbols));
}

HmmModel left_to_right_init(std::size_t n_states, std::size_t n_symbols, std::uint64_t seed,
                            std::size_t branches) {
  if (n_states < 1 || n_symbols < 1) {
    throw ValidationError("left-to-right init needs at least one state and one symbol");
  }
  if (branches < 1 || n_states % branches != 0) {
    throw ValidationError(
        fmt::format("{} states cannot be split into {} equal branches", n_states, branches));
  }
  const std::size_t chain = n_states / branches;
  HmmModel m(n_states, n_symbols);
  for (std::size_t c = 0; c < branches; ++c) {
    const std::size_t head = c * chain;
    m.pi[head] = 1.0 / static_cast<double>(branches);
    for (std::size_t k = 0; k < chain; ++k) {
      const std::size_t i = head + k;
      if (k + 1 < chain) {
        m.trans(i, i) = 0.5;
        m.trans(i, i + 1) = 0.5;
      } else {
        m.trans(i, i) = 1.0;
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (std::size_t j = 0; j < n_states; ++j) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_symbols; ++k) {
      m.emit(j, k) = 1.0 + jitter(rng);
      sum += m.emit(j, k);
    }
    for (std::size_t k = 0; k < n_symbols; ++k) m.emit(j, k) /= sum;
  }
  return m;
}

void require_valid(const TrainConfig& config, std::size_t n_symbols) {
  if (config.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (!(config.log_likelihood_tolerance > 0.0)) {
    throw ValidationError("log_likelihood_tolerance must be positive");
  }
  if (!(config.emission_floor >= 0.0 && config.emission_floor <= 0.1)) {
    throw ValidationError("emission_floor must lie in [0, 0.1]");
  }
  if (n_symbols > 0 && !(config.emission_floor < 1.0 / static_cast<double>(n_symbols))) {
    throw ValidationError(fmt::format("emission_floor {} must be below 1/M = {}",
                                      config.emission_floor, 1.0 / static_cast<double>(n_symbols)));
  }
}

}  // namespace bhmm
