#include <cmath>
#include <random>

#include "doctest.h"

#include "bhmm/error.hpp"
#include "bhmm/hmm.hpp"
#include "support.hpp"

using namespace bhmm;
using namespace bhmm::testing;

TEST_SUITE("hmm") {

TEST_CASE("validate_model accepts a well-formed two-state model") {
  HmmModel m({1.0, 0.0}, {{0.5, 0.5}, {0.3, 0.7}}, {{0.2, 0.8}, {0.6, 0.4}});
  CHECK(validate_model(m).ok());
}

TEST_CASE("validate_model names the offending a row") {
  HmmModel m({1.0, 0.0}, {{0.5, 0.4}, {0.3, 0.7}}, {{0.2, 0.8}, {0.6, 0.4}});
  const auto report = validate_model(m);
  REQUIRE_FALSE(report.ok());
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].find("a row 0") != std::string::npos);
}

TEST_CASE("validate_model names a negative emission entry") {
  HmmModel m({1.0, 0.0}, {{0.5, 0.5}, {0.3, 0.7}}, {{0.2, 0.8}, {-0.1, 1.1}});
  const auto report = validate_model(m);
  REQUIRE_FALSE(report.ok());
  bool named = false;
  for (const auto& v : report.violations) named |= v.find("b[1][0]") != std::string::npos;
  CHECK(named);
  CHECK_THROWS_AS(require_valid(m), ValidationError);
}

TEST_CASE("validate_model reports shape problems and NaN") {
  HmmModel m(2, 2);
  m.pi = {1.0};
  CHECK_FALSE(validate_model(m).ok());
  HmmModel n({1.0}, {{1.0}}, {{std::nan(""), 1.0}});
  CHECK_FALSE(validate_model(n).ok());
  CHECK_THROWS_AS(HmmModel({1.0, 0.0}, {{1.0, 0.0}, {1.0}}, {{1.0}, {1.0}}), ValidationError);
}

TEST_CASE("forward_init on one-state deterministic model") {
  HmmModel m({1.0}, {{1.0}}, {{1.0}});
  const auto s = forward_init(m, 0);
  CHECK(s.t == 1);
  CHECK(s.log_prob == 0.0);
  REQUIRE(s.alpha_hat.size() == 1);
  CHECK(s.alpha_hat[0] == 1.0);
}

TEST_CASE("forward_init splits on pi and renormalizes") {
  HmmModel m({0.5, 0.5}, {{1.0, 0.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
  const auto s = forward_init(m, 0);
  CHECK(s.alpha_hat[0] == doctest::Approx(1.0));
  CHECK(s.alpha_hat[1] == 0.0);
  CHECK(s.log_prob == doctest::Approx(std::log(0.5)));
}

TEST_CASE("forward_init flags zero probability and it sticks") {
  HmmModel m({1.0, 0.0}, {{0.5, 0.5}, {0.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}});
  auto s = forward_init(m, 0);
  CHECK(s.impossible());
  s = forward_step(s, m, 1);
  CHECK(s.impossible());
  CHECK(s.t == 2);
}

TEST_CASE("forward rejects out-of-alphabet symbols") {
  const auto m = two_state_chain();
  CHECK_THROWS_AS(forward_init(m, 2), ValidationError);
  CHECK_THROWS_AS(forward_init(m, -1), ValidationError);
  const auto s = forward_init(m, 0);
  CHECK_THROWS_AS(forward_step(s, m, 5), ValidationError);
}

TEST_CASE("forward_step under identity transitions leaves the state alone") {
  HmmModel m({0.25, 0.75}, {{1.0, 0.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
  const auto s1 = forward_init(m, 1);
  const auto s2 = forward_step(s1, m, 1);
  CHECK(s2.alpha_hat == s1.alpha_hat);
  CHECK(s2.log_prob == s1.log_prob);
  CHECK(s2.t == 2);
}

TEST_CASE("two-state chain: only the advancing path survives") {
  const auto m = two_state_chain();
  const auto s = forward_step(forward_init(m, 0), m, 1);
  CHECK(std::exp(s.log_prob) == doctest::Approx(0.5));
  const Symbol seq[] = {0, 1};
  CHECK(sequence_log_prob(m, seq) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("an impossible observation drives log_prob to -inf") {
  HmmModel m({0.5, 0.5}, {{0.5, 0.5}, {0.5, 0.5}}, {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}});
  const auto s = forward_step(forward_init(m, 0), m, 2);
  CHECK(s.log_prob == kNegInf);
}

TEST_CASE("sequence_log_prob on degenerate inputs") {
  HmmModel one({1.0}, {{1.0}}, {{1.0}});
  const Symbol seq[] = {0, 0, 0, 0, 0};
  CHECK(sequence_log_prob(one, seq) == 0.0);
  CHECK_THROWS_AS(sequence_log_prob(one, std::span<const Symbol>{}), ValidationError);
  CHECK_THROWS_AS(sequence_log_prob(one, ObservationSequence{}), ValidationError);
}

TEST_CASE("sequence_log_prob matches path enumeration on a 3x3 model, length 6") {
  std::mt19937_64 rng(99);
  const auto m = random_model(3, 3, rng);
  const auto obs = random_symbols(6, 3, rng);
  CHECK(rel_diff(std::exp(sequence_log_prob(m, obs)), path_enumeration_prob(m, obs)) < 1e-12);
}

TEST_CASE("sample_sequence on a deterministic cycle") {
  const auto m = deterministic_cycle(3);
  for (std::uint64_t seed : {1u, 2u, 77u}) {
    const auto s = sample_sequence(m, 7, seed);
    CHECK(s.symbols == std::vector<Symbol>{0, 1, 2, 0, 1, 2, 0});
    CHECK(s.timestamps == std::vector<double>{0, 1, 2, 3, 4, 5, 6});
  }
  CHECK(sample_sequence(m, 0, 5).empty());
}

TEST_CASE("sample_sequence symbol frequency follows b") {
  HmmModel m({1.0}, {{1.0}}, {{0.3, 0.7}});
  int zeros = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) zeros += sample_sequence(m, 1, i).symbols[0] == 0;
  CHECK(std::abs(zeros / 10000.0 - 0.3) <= 0.02);
}

TEST_CASE("sample_sequence is deterministic per seed") {
  std::mt19937_64 rng(3);
  const auto m = random_model(3, 4, rng);
  CHECK(sample_sequence(m, 50, 11).symbols == sample_sequence(m, 50, 11).symbols);
  CHECK(sample_sequence(m, 50, 11).symbols != sample_sequence(m, 50, 12).symbols);
}

TEST_CASE("left_to_right_init structure") {
  const auto m = left_to_right_init(4, 3, 5);
  CHECK(validate_model(m).ok());
  CHECK(m.pi == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  CHECK(m.trans(0, 0) == 0.5);
  CHECK(m.trans(0, 1) == 0.5);
  CHECK(m.trans(3, 3) == 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(m.emit(1, k) >= 0.9 / 3.0 * 0.9);
    CHECK(m.emit(1, k) <= 1.1 / 3.0 * 1.1);
  }
  const auto two = left_to_right_init(6, 3, 5, 2);
  CHECK(two.pi[0] == 0.5);
  CHECK(two.pi[3] == 0.5);
  CHECK(two.trans(2, 2) == 1.0);
  CHECK(two.trans(2, 3) == 0.0);
  CHECK_THROWS_AS(left_to_right_init(5, 3, 1, 2), ValidationError);
}

TEST_CASE("baum_welch_train recovers a known source") {
  HmmModel source({0.8, 0.2, 0.0}, {{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}},
                  {{0.9, 0.05, 0.05}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}});
  std::vector<ObservationSequence> train, held_out;
  for (std::uint64_t i = 0; i < 50; ++i) train.push_back(sample_sequence(source, 20, i));
  for (std::uint64_t i = 100; i < 120; ++i) held_out.push_back(sample_sequence(source, 20, i));

  HmmModel init({0.4, 0.3, 0.3}, {{0.4, 0.3, 0.3}, {0.3, 0.4, 0.3}, {0.3, 0.3, 0.4}},
                {{0.4, 0.3, 0.3}, {0.3, 0.4, 0.3}, {0.3, 0.3, 0.4}});
  const auto result = baum_welch_train(train, init, TrainConfig{});
  REQUIRE(result.log_likelihood.size() >= 2);
  CHECK(result.log_likelihood.back() >= result.log_likelihood.front());
  CHECK(validate_model(result.model).ok());

  double before = 0.0, after = 0.0;
  for (const auto& s : held_out) {
    before += sequence_log_prob(init, s);
    after += sequence_log_prob(result.model, s);
  }
  CHECK(after > before);
}

TEST_CASE("baum_welch_train on degenerate data reaches the analytic maximum") {
  // With pi = [1, 0] and state 1 absorbing, P(0 0 1) = (1-a) b (a + 1 - b) for
  // a = a[0][0], b = b[1][1]. That peaks at a = 1/3, b = 2/3, above the
  // deterministic-looking a = 1/2, b = 1 (P = 1/4).
  std::vector<ObservationSequence> train(20, make_sequence({0, 0, 1}));
  const auto init = left_to_right_init(2, 2, 7);
  TrainConfig tc;
  tc.emission_floor = 0.0;
  const auto result = baum_welch_train(train, init, tc);
  const auto& m = result.model;
  CHECK(m.emit(0, 0) >= 0.9);
  CHECK(m.emit(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(m.emit(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-3));
  CHECK(m.trans(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
  CHECK(result.log_likelihood.back() == doctest::Approx(20.0 * std::log(8.0 / 27.0)).epsilon(1e-6));

  HmmModel crisp({1.0, 0.0}, {{0.5, 0.5}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
  CHECK(20.0 * sequence_log_prob(crisp, train[0]) < result.log_likelihood.back());

  const auto floored = baum_welch_train(train, init, TrainConfig{});
  CHECK(floored.model.emit(0, 0) >= 0.9);
  CHECK(validate_model(floored.model).ok());
}

TEST_CASE("baum_welch_train input errors") {
  const auto init = left_to_right_init(2, 2, 7);
  std::vector<ObservationSequence> bad{make_sequence({0, 3})};
  CHECK_THROWS_AS(baum_welch_train(bad, init, TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(baum_welch_train(std::vector<ObservationSequence>{}, init, TrainConfig{}),
                  ValidationError);
  std::vector<ObservationSequence> empty_seq{ObservationSequence{}};
  CHECK_THROWS_AS(baum_welch_train(empty_seq, init, TrainConfig{}), ValidationError);
  TrainConfig floor_too_big;
  floor_too_big.emission_floor = 0.6;
  std::vector<ObservationSequence> ok{make_sequence({0, 1})};
  CHECK_THROWS_AS(baum_welch_train(ok, init, floor_too_big), ValidationError);
}

TEST_CASE("baum_welch_train resets rows without expected counts") {
  // State 2 is unreachable, so its rows receive no counts.
  HmmModel init({0.5, 0.5, 0.0}, {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}},
                {{0.6, 0.4}, {0.4, 0.6}, {0.5, 0.5}});
  std::vector<ObservationSequence> train{make_sequence({0, 1, 0, 1}), make_sequence({1, 1, 0})};
  const auto result = baum_welch_train(train, init, TrainConfig{});
  CHECK(validate_model(result.model).ok());
  CHECK(result.model.trans(2, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(result.model.emit(2, 1) == doctest::Approx(0.5));
  REQUIRE_FALSE(result.warnings.empty());
  // Deduplicated across iterations.
  std::size_t hits = 0;
  for (const auto& w : result.warnings) hits += w.find("state 2 has no expected outgoing") != std::string::npos;
  CHECK(hits == 1);
}

TEST_CASE("property: forward equals path enumeration for small models") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 4, m = 1 + rng() % 3, len = 1 + rng() % 8;
    const auto model = random_model(n, m, rng, trial % 3 == 0 ? 0.3 : 0.0);
    const auto obs = random_symbols(len, m, rng);
    const double oracle = path_enumeration_prob(model, obs);
    const double lp = sequence_log_prob(model, obs);
    if (oracle == 0.0) {
      CHECK(lp == kNegInf);
    } else {
      CHECK(rel_diff(std::exp(lp), oracle) < 1e-12);
    }
  }
}

TEST_CASE("property: probabilities of all sequences of a length sum to one") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 3, m = 1 + rng() % 2, len = 1 + rng() % 6;
    const auto model = random_model(n, m, rng, 0.2);
    double total = 0.0;
    for_each_sequence(m, len, [&](const std::vector<Symbol>& s) {
      total += std::exp(sequence_log_prob(model, s));
    });
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("property: online folding is bit-identical to sequence_log_prob and nonincreasing") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 5, m = 1 + rng() % 4;
    const auto model = random_model(n, m, rng, 0.1);
    const auto obs = random_symbols(1 + rng() % 30, m, rng);
    auto state = forward_init(model, obs[0]);
    double previous = state.log_prob;
    CHECK(previous <= 0.0);
    for (std::size_t t = 1; t < obs.size(); ++t) {
      state = forward_step(state, model, obs[t]);
      CHECK(state.log_prob <= previous);
      previous = state.log_prob;
      if (!state.impossible()) {
        double sum = 0.0;
        for (double v : state.alpha_hat) {
          CHECK(v >= 0.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
    CHECK(state.log_prob == sequence_log_prob(model, obs));
    CHECK(state.t == obs.size());
  }
}

TEST_CASE("property: EM gain is nonnegative and outputs are valid") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 3, m = 2 + rng() % 3;
    const auto source = random_model(n, m, rng);
    std::vector<ObservationSequence> data;
    for (int s = 0; s < 10; ++s) data.push_back(sample_sequence(source, 5 + rng() % 10, rng()));
    TrainConfig cfg;
    cfg.max_iterations = 50;
    const auto result = baum_welch_train(data, random_model(n, m, rng), cfg);
    for (double g : result.em_gain) CHECK(g >= -1e-9);
    CHECK(validate_model(result.model).ok());
    CHECK(result.log_likelihood.size() == result.iterations + 1);
  }
}

}  // TEST_SUITE
