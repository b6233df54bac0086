#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bhmm/hmm.hpp"

namespace bhmm {

inline constexpr std::size_t kDefaultNodeBudget = 10'000'000;

/// Per-length maxima of the observation-sequence probability:
/// max_log_prob[t - 1] = log max over all O_1..O_t of P(O_1..O_t | lambda).
struct NormalizerTable {
  std::string model_name;
  std::vector<double> max_log_prob;
  // Lexicographically smallest sequence of length t_max() attaining the last entry.
  std::vector<Symbol> argmax_sequence;
  std::size_t nodes_visited = 0;  // search statistics, not persisted

  std::size_t t_max() const { return max_log_prob.size(); }
  double at(std::size_t t) const;  // 1-based
};

/// Exact table for t = 1..t_max. The observation tree is searched depth first,
/// most probable symbol first; a prefix is abandoned once its probability
/// falls below the best already found at every deeper length, since no
/// extension can raise it. Throws BudgetExceededError past `budget` nodes.
NormalizerTable build_normalizer_table(const HmmModel& model, std::size_t t_max,
                                       std::size_t budget = kDefaultNodeBudget,
                                       std::string model_name = {});

/// Same result as a fresh build at new_t_max, reusing the known maxima as
/// pruning bounds.
NormalizerTable extend_normalizer_table(const NormalizerTable& table, const HmmModel& model,
                                        std::size_t new_t_max,
                                        std::size_t budget = kDefaultNodeBudget);

/// Consistency checks for a table loaded from disk: nonincreasing entries, the
/// witness sequence reproducing the last entry within `tolerance`, and none of
/// its prefixes exceeding their own entry.
void verify_normalizer(const NormalizerTable& table, const HmmModel& model,
                       double tolerance = 1e-12);

}  // namespace bhmm
