#include "bhmm/recognizer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "bhmm/error.hpp"
#include "bhmm/io.hpp"

namespace bhmm {

void require_valid(const BehaviorModel& behavior) {
  require_valid(behavior.hmm, "behavior '" + behavior.name + "'");
  if (behavior.t_nominal < 1) {
    throw ValidationError(fmt::format("behavior '{}' has t_nominal 0", behavior.name));
  }
  if (behavior.normalizer.t_max() < behavior.t_nominal) {
    throw ValidationError(fmt::format("behavior '{}' normalizer covers {} events, t_nominal is {}",
                                      behavior.name, behavior.normalizer.t_max(),
                                      behavior.t_nominal));
  }
  verify_normalizer(behavior.normalizer, behavior.hmm);
}

std::vector<double> exclusive_posterior(std::span<const double> log_probs) {
  if (log_probs.empty()) throw ValidationError("posterior over an empty behavior set");
  const double top = *std::max_element(log_probs.begin(), log_probs.end());
  if (top == kNegInf) {
    throw ValidationError("posterior undefined: every behavior has zero probability");
  }
  std::vector<double> p(log_probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_probs[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double behavior_likelihood(const BehaviorModel& behavior, const ForwardState& state) {
  if (state.t < 1) throw ValidationError("likelihood needs at least one observed event");
  if (state.impossible()) return 0.0;
  const double fraction =
      std::min(static_cast<double>(state.t) / static_cast<double>(behavior.t_nominal), 1.0);
  return std::exp(state.log_prob - behavior.normalizer.at(state.t)) * fraction;
}

RecognitionSession::RecognitionSession(std::vector<BehaviorModel> behaviors,
                                       std::size_t node_budget)
    : behaviors_(std::move(behaviors)), node_budget_(node_budget) {
  if (behaviors_.empty()) throw ValidationError("a recognition session needs at least one behavior");
  std::stable_sort(behaviors_.begin(), behaviors_.end(),
                   [](const BehaviorModel& l, const BehaviorModel& r) { return l.name < r.name; });
  n_symbols_ = behaviors_.front().hmm.n_symbols;
  for (std::size_t i = 0; i < behaviors_.size(); ++i) {
    const auto& b = behaviors_[i];
    if (i > 0 && b.name == behaviors_[i - 1].name) {
      throw ValidationError(fmt::format("behavior '{}' appears twice", b.name));
    }
    if (b.hmm.n_symbols != n_symbols_) {
      throw ValidationError(fmt::format("alphabet mismatch: '{}' has {} symbols, '{}' has {}",
                                        b.name, b.hmm.n_symbols, behaviors_.front().name,
                                        n_symbols_));
    }
  }
  states_.resize(behaviors_.size());
}

const RecognitionReport& RecognitionSession::step(Symbol symbol, double timestamp) {
  if (symbol < 0 || static_cast<std::size_t>(symbol) >= n_symbols_) {
    throw ValidationError(
        fmt::format("event symbol {} is outside the alphabet [0, {})", symbol, n_symbols_));
  }
  const std::size_t z = behaviors_.size();
  const std::size_t t = t_ + 1;

  // Extend normalizers first; a budget failure leaves the session as it was.
  for (auto& b : behaviors_) {
    if (b.normalizer.t_max() < t) {
      b.normalizer = extend_normalizer_table(b.normalizer, b.hmm, t, node_budget_);
    }
  }

  std::vector<ForwardState> next(z);
  for (std::size_t i = 0; i < z; ++i) {
    next[i] = t == 1 ? forward_init(behaviors_[i].hmm, symbol)
                     : forward_step(states_[i], behaviors_[i].hmm, symbol);
  }

  RecognitionReport report;
  report.t = t;
  report.timestamp = timestamp;
  report.scores.resize(z);
  std::vector<double> log_probs(z);
  std::vector<double> likelihoods(z);
  for (std::size_t i = 0; i < z; ++i) {
    auto& s = report.scores[i];
    s.name = behaviors_[i].name;
    s.log_prob = next[i].log_prob;
    s.likelihood = behavior_likelihood(behaviors_[i], next[i]);
    log_probs[i] = s.log_prob;
    likelihoods[i] = s.likelihood;
  }
  report.posterior_defined =
      std::any_of(log_probs.begin(), log_probs.end(), [](double l) { return l != kNegInf; });
  if (report.posterior_defined) {
    const auto p = exclusive_posterior(log_probs);
    for (std::size_t i = 0; i < z; ++i) report.scores[i].posterior = p[i];
  } else {
    for (auto& s : report.scores) s.posterior = std::nan("");
  }
  report.argmax = argmax_index(likelihoods);

  states_ = std::move(next);
  t_ = t;
  history_.push_back(std::move(report));
  return history_.back();
}

std::vector<BehaviorModel> load_behavior_set(std::span<const std::filesystem::path> sources) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& src : sources) {
    std::error_code ec;
    if (fs::is_directory(src, ec)) {
      for (const auto& entry : fs::directory_iterator(src)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
          files.push_back(entry.path());
        }
      }
    } else if (fs::is_regular_file(src, ec)) {
      files.push_back(src);
    } else {
      throw IoError("behavior model source not found: " + src.string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no behavior model files found");

  std::vector<BehaviorModel> behaviors;
  for (const auto& file : files) {
    auto behavior = read_behavior_model(file);
    require_valid(behavior);
    if (!behaviors.empty() && behavior.hmm.n_symbols != behaviors.front().hmm.n_symbols) {
      throw ValidationError(fmt::format("alphabet mismatch: {} has {} symbols, {} has {}",
                                        file.string(), behavior.hmm.n_symbols,
                                        behaviors.front().name, behaviors.front().hmm.n_symbols));
    }
    behaviors.push_back(std::move(behavior));
  }
  std::stable_sort(behaviors.begin(), behaviors.end(),
                   [](const BehaviorModel& l, const BehaviorModel& r) { return l.name < r.name; });
  return behaviors;
}

}  // namespace bhmm
