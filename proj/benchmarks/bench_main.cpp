#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "bhmm/hmm.hpp"
#include "bhmm/normalizer.hpp"
#include "bhmm/recognizer.hpp"

namespace {

bhmm::HmmModel dense_model(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const auto row = [&](std::size_t k) {
    std::vector<double> r(k);
    double s = 0.0;
    for (auto& v : r) s += v = u(rng);
    for (auto& v : r) v /= s;
    return r;
  };
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.push_back(row(n));
    b.push_back(row(m));
  }
  return bhmm::HmmModel(row(n), a, b);
}

void BM_ForwardStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = dense_model(n, 8, 1);
  auto fwd = bhmm::forward_init(model, 0);
  bhmm::ForwardState next = fwd;
  bhmm::Symbol s = 0;
  for (auto _ : state) {
    bhmm::forward_step_into(fwd, model, s, next);
    std::swap(fwd, next);
    s = (s + 3) % 8;
    benchmark::DoNotOptimize(fwd);
  }
}
BENCHMARK(BM_ForwardStep)->Arg(4)->Arg(12)->Arg(32);

void BM_NormalizerBuild(benchmark::State& state) {
  const auto t_max = static_cast<std::size_t>(state.range(0));
  const auto model = bhmm::left_to_right_init(12, 8, 3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(bhmm::build_normalizer_table(model, t_max));
}
BENCHMARK(BM_NormalizerBuild)->Arg(4)->Arg(6)->Unit(benchmark::kMicrosecond);

void BM_RecognitionStep(benchmark::State& state) {
  std::vector<bhmm::BehaviorModel> set;
  for (int i = 0; i < 6; ++i) {
    bhmm::BehaviorModel b;
    b.name = "b" + std::to_string(i);
    b.hmm = bhmm::left_to_right_init(8, 8, 10 + i, 2);
    b.t_nominal = 4;
    b.normalizer = bhmm::build_normalizer_table(b.hmm, 4, bhmm::kDefaultNodeBudget, b.name);
    set.push_back(std::move(b));
  }
  for (auto _ : state) {
    state.PauseTiming();
    bhmm::RecognitionSession session(set);
    state.ResumeTiming();
    for (int t = 0; t < 4; ++t) benchmark::DoNotOptimize(session.step(6, t));
  }
}
BENCHMARK(BM_RecognitionStep)->Unit(benchmark::kMicrosecond);

void BM_BaumWelch(benchmark::State& state) {
  const auto truth = dense_model(4, 4, 5);
  std::vector<bhmm::ObservationSequence> data;
  for (int i = 0; i < 50; ++i) data.push_back(bhmm::sample_sequence(truth, 6, 100 + i));
  const auto init = bhmm::left_to_right_init(8, 4, 2, 2);
  bhmm::TrainConfig tc;
  tc.max_iterations = 20;
  for (auto _ : state) benchmark::DoNotOptimize(bhmm::baum_welch_train(data, init, tc));
}
BENCHMARK(BM_BaumWelch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
