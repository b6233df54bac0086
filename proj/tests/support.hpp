#pragma once

// Shared fixtures and reference implementations for the test binaries.
// The oracles are deliberately naive: no scaling, no pruning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "bhmm/hmm.hpp"

namespace bhmm::testing {

inline std::vector<double> random_row(std::size_t n, std::mt19937_64& rng, double zero_chance = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> row(n);
  double sum = 0.0;
  for (auto& v : row) {
    v = u(rng) < zero_chance ? 0.0 : u(rng) + 1e-3;
    sum += v;
  }
  if (sum == 0.0) {
    row[rng() % n] = 1.0;
    return row;
  }
  for (auto& v : row) v /= sum;
  return row;
}

// Dense random model; zero_chance sprinkles exact zeros to exercise -inf paths.
inline HmmModel random_model(std::size_t n, std::size_t m, std::mt19937_64& rng,
                             double zero_chance = 0.0) {
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.push_back(random_row(n, rng, zero_chance));
    b.push_back(random_row(m, rng, zero_chance));
  }
  return HmmModel(random_row(n, rng, zero_chance), a, b);
}

inline std::vector<Symbol> random_symbols(std::size_t len, std::size_t m, std::mt19937_64& rng) {
  std::vector<Symbol> s(len);
  for (auto& v : s) v = static_cast<Symbol>(rng() % m);
  return s;
}

// P(O | model) by summing pi * prod(a) * prod(b) over all N^T state paths.
inline double path_enumeration_prob(const HmmModel& model, const std::vector<Symbol>& obs) {
  const std::size_t n = model.n_states;
  const std::size_t len = obs.size();
  std::vector<std::size_t> path(len, 0);
  double total = 0.0;
  while (true) {
    double p = model.pi[path[0]] * model.emit(path[0], obs[0]);
    for (std::size_t t = 1; t < len && p > 0.0; ++t) {
      p *= model.trans(path[t - 1], path[t]) * model.emit(path[t], obs[t]);
    }
    total += p;
    std::size_t k = 0;
    while (k < len && ++path[k] == n) path[k++] = 0;
    if (k == len) break;
  }
  return total;
}

// Calls fn(sequence) for every one of the M^len symbol sequences.
template <typename Fn>
void for_each_sequence(std::size_t m, std::size_t len, Fn&& fn) {
  std::vector<Symbol> s(len, 0);
  while (true) {
    fn(s);
    std::size_t k = 0;
    while (k < len && ++s[k] == static_cast<Symbol>(m)) s[k++] = 0;
    if (k == len) break;
  }
}

// Normalizer table without any search: evaluate every sequence of every length.
inline std::vector<double> exhaustive_max_log_prob(const HmmModel& model, std::size_t t_max) {
  std::vector<double> best(t_max, kNegInf);
  for (std::size_t t = 1; t <= t_max; ++t) {
    for_each_sequence(model.n_symbols, t, [&](const std::vector<Symbol>& s) {
      const double lp = sequence_log_prob(model, s);
      if (lp > best[t - 1]) best[t - 1] = lp;
    });
  }
  return best;
}

// Two-state chain used throughout the examples: pi=[1,0], A=[[.5,.5],[0,1]], b one-hot.
inline HmmModel two_state_chain() {
  return HmmModel({1.0, 0.0}, {{0.5, 0.5}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
}

inline HmmModel deterministic_cycle(std::size_t n) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> b(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    a[i][(i + 1) % n] = 1.0;
    b[i][i] = 1.0;
  }
  std::vector<double> pi(n, 0.0);
  pi[0] = 1.0;
  return HmmModel(pi, a, b);
}

inline double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bhmm_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace bhmm::testing
