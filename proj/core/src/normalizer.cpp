#include "bhmm/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bhmm/error.hpp"

namespace bhmm {

double NormalizerTable::at(std::size_t t) const {
  if (t < 1 || t > max_log_prob.size()) {
    throw ValidationError(
        fmt::format("normalizer for '{}' covers t = 1..{}, asked for {}", model_name, t_max(), t));
  }
  return max_log_prob[t - 1];
}

namespace {

// Per-step headroom for rows that sum to slightly more than one.
constexpr double kStepSlack = 4.0 * kStochasticTolerance;

class Search {
 public:
  Search(const HmmModel& model, std::size_t t_max, std::size_t budget, std::vector<double> best)
      : model_(model), t_max_(t_max), budget_(budget), best_(std::move(best)) {
    best_.resize(t_max_, kNegInf);
    prefix_.reserve(t_max_);
    levels_.resize(t_max_);
    for (auto& level : levels_) level.resize(model_.n_symbols);
  }

  void run() { expand(nullptr, 0); }

  NormalizerTable result(std::string name) && {
    NormalizerTable table;
    table.model_name = std::move(name);
    table.max_log_prob = std::move(best_);
    table.argmax_sequence = std::move(witness_);
    table.nodes_visited = nodes_;
    return table;
  }

 private:
  // Lowest best-so-far among lengths deeper than `depth` (1-based).
  double deeper_bound(std::size_t depth) const {
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t k = depth; k < t_max_; ++k) bound = std::min(bound, best_[k]);
    return bound;
  }

  void record(std::size_t depth, double log_prob) {
    double& best = best_[depth - 1];
    if (depth == t_max_) {
      if (log_prob > best || (log_prob == best && (witness_.empty() || prefix_ < witness_))) {
        best = log_prob;
        witness_ = prefix_;
      }
    } else if (log_prob > best) {
      best = log_prob;
    }
  }

  void expand(const ForwardState* parent, std::size_t depth) {
    auto& children = levels_[depth];
    for (std::size_t k = 0; k < model_.n_symbols; ++k) {
      auto& child = children[k];
      child.symbol = static_cast<Symbol>(k);
      if (parent == nullptr) {
        child.state = forward_init(model_, child.symbol);
      } else {
        forward_step_into(*parent, model_, child.symbol, child.state);
      }
    }
    std::stable_sort(children.begin(), children.end(), [](const Child& l, const Child& r) {
      return l.state.log_prob > r.state.log_prob;
    });

    const std::size_t child_depth = depth + 1;
    for (auto& child : children) {
      if (++nodes_ > budget_) throw BudgetExceededError(nodes_, budget_);
      if (child.state.impossible()) continue;
      prefix_.push_back(child.symbol);
      record(child_depth, child.state.log_prob);
      if (child_depth < t_max_) {
        const double slack = kStepSlack * static_cast<double>(t_max_ - child_depth) + 1e-12;
        if (!(child.state.log_prob + slack < deeper_bound(child_depth))) {
          expand(&child.state, child_depth);
        }
      }
      prefix_.pop_back();
    }
  }

  struct Child {
    Symbol symbol = 0;
    ForwardState state;
  };

  const HmmModel& model_;
  std::size_t t_max_;
  std::size_t budget_;
  std::vector<double> best_;
  std::vector<Symbol> witness_;
  std::vector<Symbol> prefix_;
  std::vector<std::vector<Child>> levels_;
  std::size_t nodes_ = 0;
};

}  // namespace

NormalizerTable build_normalizer_table(const HmmModel& model, std::size_t t_max,
                                       std::size_t budget, std::string model_name) {
  require_valid(model, "model '" + model_name + "'");
  if (t_max < 1) throw ValidationError("normalizer t_max must be >= 1");
  Search search(model, t_max, budget, {});
  search.run();
  return std::move(search).result(std::move(model_name));
}

NormalizerTable extend_normalizer_table(const NormalizerTable& table, const HmmModel& model,
                                        std::size_t new_t_max, std::size_t budget) {
  if (new_t_max <= table.t_max()) {
    throw ValidationError(fmt::format("cannot extend normalizer for '{}' from t_max {} to {}",
                                      table.model_name, table.t_max(), new_t_max));
  }
  require_valid(model, "model '" + table.model_name + "'");
  Search search(model, new_t_max, budget, table.max_log_prob);
  search.run();
  return std::move(search).result(table.model_name);
}

void verify_normalizer(const NormalizerTable& table, const HmmModel& model, double tolerance) {
  const auto fail = [&](const std::string& why) {
    throw ValidationError(fmt::format("normalizer for '{}' rejected: {}", table.model_name, why));
  };
  if (table.t_max() < 1) fail("table is empty");
  if (table.argmax_sequence.size() != table.t_max()) {
    fail(fmt::format("argmax_sequence has {} symbols, table covers {}",
                     table.argmax_sequence.size(), table.t_max()));
  }
  for (std::size_t t = 1; t < table.t_max(); ++t) {
    if (table.max_log_prob[t] > table.max_log_prob[t - 1]) {
      fail(fmt::format("entry {} exceeds entry {}", t + 1, t));
    }
  }
  ForwardState state;
  for (std::size_t t = 0; t < table.t_max(); ++t) {
    const Symbol k = table.argmax_sequence[t];
    if (k < 0 || static_cast<std::size_t>(k) >= model.n_symbols) {
      fail(fmt::format("argmax_sequence symbol {} outside the alphabet", k));
    }
    state = t == 0 ? forward_init(model, k) : forward_step(state, model, k);
    if (state.log_prob > table.max_log_prob[t] + tolerance) {
      fail(fmt::format("witness prefix of length {} scores {:.17g} above its maximum {:.17g}",
                       t + 1, state.log_prob, table.max_log_prob[t]));
    }
  }
  const double last = table.max_log_prob.back();
  if (!(std::abs(state.log_prob - last) <= tolerance)) {
    fail(fmt::format("witness scores {:.17g}, table says {:.17g}", state.log_prob, last));
  }
}

}  // namespace bhmm
