#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bhmm {

using Symbol = int;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Discrete-emission hidden Markov model lambda = (A, B, pi).
///
/// States are indexed 0..n_states-1 and symbols 0..n_symbols-1. Both
/// matrices are stored row-major: `a[i * n_states + j]` is the probability of
/// moving from state i to state j, `b[j * n_symbols + k]` the probability of
/// emitting symbol k while in state j. The struct is a plain value; use
/// validate_model() before trusting one that came from outside.
struct HmmModel {
  std::size_t n_states = 0;
  std::size_t n_symbols = 0;
  std::vector<double> pi;
  std::vector<double> a;
  std::vector<double> b;

  HmmModel() = default;
  HmmModel(std::size_t states, std::size_t symbols);
  HmmModel(std::vector<double> initial, std::vector<std::vector<double>> transitions,
           std::vector<std::vector<double>> emissions);

  double trans(std::size_t from, std::size_t to) const { return a[from * n_states + to]; }
  double& trans(std::size_t from, std::size_t to) { return a[from * n_states + to]; }
  double emit(std::size_t state, std::size_t symbol) const { return b[state * n_symbols + symbol]; }
  double& emit(std::size_t state, std::size_t symbol) { return b[state * n_symbols + symbol]; }

  friend bool operator==(const HmmModel&, const HmmModel&) = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

inline constexpr double kStochasticTolerance = 1e-9;

ValidationReport validate_model(const HmmModel& model);

// Throws ValidationError carrying the report summary when the model is invalid.
void require_valid(const HmmModel& model, const std::string& context = "model");

/// A discrete observation stream. Timestamps may be irregularly spaced.
struct ObservationSequence {
  std::vector<Symbol> symbols;
  std::vector<double> timestamps;
  std::optional<std::string> label;

  std::size_t size() const { return symbols.size(); }
  bool empty() const { return symbols.empty(); }
};

ObservationSequence make_sequence(std::vector<Symbol> symbols);

/// Forward variables renormalized to sum to one after every step; the
/// discarded mass is accumulated in log_prob = log P(O_1..O_t | lambda).
/// A ruled-out prefix has log_prob = -inf and an all-zero alpha_hat.
struct ForwardState {
  std::vector<double> alpha_hat;
  double log_prob = kNegInf;
  std::size_t t = 0;

  bool impossible() const { return log_prob == kNegInf; }
};

ForwardState forward_init(const HmmModel& model, Symbol symbol);
ForwardState forward_step(const ForwardState& state, const HmmModel& model, Symbol symbol);

// Writes the successor of `state` into `out`, reusing its storage. `out` must not alias `state`.
void forward_step_into(const ForwardState& state, const HmmModel& model, Symbol symbol,
                       ForwardState& out);

double sequence_log_prob(const HmmModel& model, std::span<const Symbol> symbols);
double sequence_log_prob(const HmmModel& model, const ObservationSequence& seq);

ObservationSequence sample_sequence(const HmmModel& model, std::size_t length, std::uint64_t seed);

/// Left-to-right initial guess. With `branches` > 1 the states are split into
/// equal-length independent chains whose heads share pi, so training can give
/// each chain its own variant of the behavior (e.g. one per turning direction).
HmmModel left_to_right_init(std::size_t n_states, std::size_t n_symbols, std::uint64_t seed,
                            std::size_t branches = 1);

struct TrainConfig {
  std::size_t max_iterations = 200;
  double log_likelihood_tolerance = 1e-6;
  double emission_floor = 1e-3;
  std::uint64_t seed = 1;
};

void require_valid(const TrainConfig& config, std::size_t n_symbols);

struct TrainResult {
  HmmModel model;
  // Total log-likelihood of the training set under each iterate, starting
  // with the initial model. Monotone when emission_floor == 0.
  std::vector<double> log_likelihood;
  // Per iteration: log-likelihood after the raw M-step minus before it, i.e.
  // prior to flooring. EM guarantees these are >= 0 up to rounding.
  std::vector<double> em_gain;
  std::vector<std::string> warnings;
  std::size_t iterations = 0;
  bool converged = false;
};

TrainResult baum_welch_train(std::span<const ObservationSequence> sequences, const HmmModel& init,
                             const TrainConfig& config);

}  // namespace bhmm
