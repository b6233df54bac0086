#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bhmm/hmm.hpp"
#include "bhmm/normalizer.hpp"

namespace bhmm {

/// One modeled behavior: its HMM, the nominal number of events T_i in a
/// full execution, and the max-sequence normalizer built from this HMM.
struct BehaviorModel {
  std::string name;
  HmmModel hmm;
  std::size_t t_nominal = 1;
  NormalizerTable normalizer;
};

// Validates the HMM, t_nominal, and the normalizer witness.
void require_valid(const BehaviorModel& behavior);

struct BehaviorScore {
  std::string name;
  double log_prob = kNegInf;
  double likelihood = 0.0;
  double posterior = 0.0;
};

struct RecognitionReport {
  std::size_t t = 0;
  double timestamp = 0.0;
  std::vector<BehaviorScore> scores;
  bool posterior_defined = false;
  std::size_t argmax = 0;

  const std::string& argmax_name() const { return scores.at(argmax).name; }
};

/// Closed-set normalization exp(l_i) / sum_j exp(l_j), shifted by the max.
/// Throws ValidationError when every entry is -inf.
std::vector<double> exclusive_posterior(std::span<const double> log_probs);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_index(std::span<const double> values);

/// L = P(O_1..O_t) / max_O P(O_1..O_t) * min(t / T_i, 1). The normalizer must
/// already cover state.t.
double behavior_likelihood(const BehaviorModel& behavior, const ForwardState& state);

/// Online recognizer over a fixed behavior set. Behaviors are kept sorted by
/// name, which is also the tie-break order for the argmax.
class RecognitionSession {
 public:
  explicit RecognitionSession(std::vector<BehaviorModel> behaviors,
                              std::size_t node_budget = kDefaultNodeBudget);

  /// Consumes one observation event. On error the session is left unchanged.
  const RecognitionReport& step(Symbol symbol, double timestamp);

  std::size_t events() const { return t_; }
  std::size_t n_symbols() const { return n_symbols_; }
  std::span<const BehaviorModel> behaviors() const { return behaviors_; }
  std::span<const RecognitionReport> history() const { return history_; }
  const ForwardState& state(std::size_t behavior) const { return states_.at(behavior); }

 private:
  std::vector<BehaviorModel> behaviors_;
  std::vector<ForwardState> states_;
  std::vector<RecognitionReport> history_;
  std::size_t n_symbols_ = 0;
  std::size_t t_ = 0;
  std::size_t node_budget_;
};

/// Reads behavior model files (a directory of *.json, or explicit files),
/// validates each one and checks that all share one alphabet. The result is
/// sorted by name and ready for RecognitionSession.
std::vector<BehaviorModel> load_behavior_set(std::span<const std::filesystem::path> sources);

}  // namespace bhmm
