#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "bhmm/error.hpp"
#include "bhmm/hmm.hpp"

namespace bhmm {

namespace {

// Expected-count accumulators pooled across all training sequences.
struct Counts {
  std::vector<double> pi;
  std::vector<double> a;
  std::vector<double> b;
  std::size_t sequences = 0;

  Counts(std::size_t n, std::size_t m) : pi(n, 0.0), a(n * n, 0.0), b(n * m, 0.0) {}
};

// Scaled forward-backward over one sequence. Adds its expected counts and
// returns log P(O | model); a sequence the model cannot produce contributes
// nothing and reports -inf.
double accumulate(const HmmModel& m, std::span<const Symbol> obs, Counts& counts) {
  const std::size_t n = m.n_states;
  const std::size_t len = obs.size();
  std::vector<double> alpha(len * n);
  std::vector<double> scale(len);

  ForwardState state = forward_init(m, obs[0]);
  std::copy(state.alpha_hat.begin(), state.alpha_hat.end(), alpha.begin());
  scale[0] = std::exp(state.log_prob);
  ForwardState next;
  for (std::size_t t = 1; t < len; ++t) {
    forward_step_into(state, m, obs[t], next);
    if (next.impossible()) return kNegInf;
    scale[t] = std::exp(next.log_prob - state.log_prob);
    std::copy(next.alpha_hat.begin(), next.alpha_hat.end(), alpha.begin() + t * n);
    std::swap(state, next);
  }
  if (state.impossible()) return kNegInf;

  std::vector<double> beta(n, 1.0);
  std::vector<double> prev_beta(n);
  std::vector<double> weighted(n);
  for (std::size_t t = len; t-- > 0;) {
    const double* at = alpha.data() + t * n;
    const auto k = static_cast<std::size_t>(obs[t]);
    for (std::size_t i = 0; i < n; ++i) {
      const double gamma = at[i] * beta[i];
      counts.b[i * m.n_symbols + k] += gamma;
      if (t == 0) counts.pi[i] += gamma;
    }
    if (t == 0) break;

    // Transitions t-1 -> t, then beta_{t-1}.
    const double* prev = alpha.data() + (t - 1) * n;
    for (std::size_t j = 0; j < n; ++j) weighted[j] = m.emit(j, k) * beta[j] / scale[t];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = m.trans(i, j) * weighted[j];
        counts.a[i * n + j] += prev[i] * w;
        acc += w;
      }
      prev_beta[i] = acc;
    }
    std::swap(beta, prev_beta);
  }
  ++counts.sequences;
  return state.log_prob;
}

// Row-normalizes `counts` into `out`; an empty row becomes uniform.
bool normalize_row(std::span<const double> counts, std::span<double> out) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return false;
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = counts[k] / total;
  return true;
}

double total_log_likelihood(const HmmModel& m, std::span<const ObservationSequence> data) {
  double total = 0.0;
  for (const auto& seq : data) total += sequence_log_prob(m, seq);
  return total;
}

void apply_emission_floor(HmmModel& m, double floor) {
  if (floor <= 0.0) return;
  for (std::size_t j = 0; j < m.n_states; ++j) {
    std::span<double> row(m.b.data() + j * m.n_symbols, m.n_symbols);
    for (double& x : row) x = std::max(x, floor);
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& x : row) x /= total;
  }
}

void note(std::vector<std::string>& warnings, std::string message) {
  if (std::find(warnings.begin(), warnings.end(), message) == warnings.end()) {
    warnings.push_back(std::move(message));
  }
}

}  // namespace

TrainResult baum_welch_train(std::span<const ObservationSequence> sequences, const HmmModel& init,
                             const TrainConfig& config) {
  require_valid(init, "initial model");
  require_valid(config, init.n_symbols);
  if (sequences.empty()) throw ValidationError("training needs at least one sequence");
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    if (sequences[s].empty()) throw ValidationError(fmt::format("training sequence {} is empty", s));
    for (Symbol k : sequences[s].symbols) {
      if (k < 0 || static_cast<std::size_t>(k) >= init.n_symbols) {
        throw ValidationError(fmt::format("training sequence {} has symbol {} outside [0, {})", s, k,
                                          init.n_symbols));
      }
    }
  }

  const std::size_t n = init.n_states;
  const std::size_t m = init.n_symbols;
  TrainResult result;
  result.model = init;
  double current = total_log_likelihood(result.model, sequences);
  result.log_likelihood.push_back(current);
  if (current == kNegInf) {
    throw ValidationError("initial model assigns zero probability to the training data");
  }

  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    Counts counts(n, m);
    std::size_t skipped = 0;
    for (const auto& seq : sequences) {
      if (accumulate(result.model, seq.symbols, counts) == kNegInf) ++skipped;
    }
    if (skipped > 0) {
      note(result.warnings,
           fmt::format("{} sequences had zero probability in some iteration and were skipped",
                       skipped));
    }

    HmmModel next(n, m);
    normalize_row(counts.pi, next.pi);
    for (std::size_t i = 0; i < n; ++i) {
      if (!normalize_row(std::span(counts.a).subspan(i * n, n),
                         std::span(next.a).subspan(i * n, n))) {
        note(result.warnings,
             fmt::format("state {} has no expected outgoing transitions; row reset to uniform", i));
      }
      if (!normalize_row(std::span(counts.b).subspan(i * m, m),
                         std::span(next.b).subspan(i * m, m))) {
        note(result.warnings,
             fmt::format("state {} has no expected emissions; row reset to uniform", i));
      }
    }

    const double raw = total_log_likelihood(next, sequences);
    result.em_gain.push_back(raw - current);
    double updated = raw;
    if (config.emission_floor > 0.0) {
      apply_emission_floor(next, config.emission_floor);
      updated = total_log_likelihood(next, sequences);
    }
    result.model = std::move(next);
    result.log_likelihood.push_back(updated);
    result.iterations = iter + 1;
    const double improvement = updated - current;
    current = updated;
    if (improvement < config.log_likelihood_tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace bhmm
