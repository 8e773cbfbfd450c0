// Microbenchmarks for the per-sample hot paths: truncated-moment evaluation,
// Lloyd iterations, belief updates, and full encoder throughput.

#include <benchmark/benchmark.h>

#include <vector>

#include "hmsq/bounds.hpp"
#include "hmsq/gauss.hpp"
#include "hmsq/hmm.hpp"
#include "hmsq/quantizer.hpp"
#include "hmsq/scalable.hpp"
#include "hmsq/tracking.hpp"

namespace {

using namespace hmsq;

HmmModel test_model() { return make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1); }

MixturePdf test_mixture() {
  StateBelief belief{{0.3, 0.7}};
  return belief_mixture(belief, test_model());
}

void BM_GaussPartialMoments(benchmark::State& state) {
  double a = -1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gauss_partial_moments(0.1, 1.3, a, 2.0));
    a = -a;
  }
}
BENCHMARK(BM_GaussPartialMoments);

void BM_CellMoments(benchmark::State& state) {
  const int rate = static_cast<int>(state.range(0));
  const MixturePdf pdf = test_mixture();
  const Codebook cb = lloyd_design(pdf, 1 << rate);
  for (auto _ : state) benchmark::DoNotOptimize(cell_moments(pdf, cb.thresholds));
  state.SetItemsProcessed(state.iterations() * (1 << rate));
}
BENCHMARK(BM_CellMoments)->Arg(2)->Arg(4)->Arg(6);

void BM_LloydIterate(benchmark::State& state) {
  const int rate = static_cast<int>(state.range(0));
  const MixturePdf pdf = test_mixture();
  const Codebook cb = lloyd_design(pdf, 1 << rate);
  for (auto _ : state) {
    Codebook working = cb;
    benchmark::DoNotOptimize(lloyd_iterate(pdf, std::move(working), 1));
  }
}
BENCHMARK(BM_LloydIterate)->Arg(2)->Arg(4)->Arg(6);

void BM_ForwardRecursion(benchmark::State& state) {
  const HmmModel model = test_model();
  const std::vector<double> obs = sample(model, 10000, 7).observations;
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, obs));
  state.SetItemsProcessed(state.iterations() * obs.size());
}
BENCHMARK(BM_ForwardRecursion);

void BM_TrackingEncode(benchmark::State& state) {
  const int rate = static_cast<int>(state.range(0));
  const HmmModel model = test_model();
  const std::vector<double> train = sample(model, 20000, 11).observations;
  const std::vector<double> eval = sample(model, 5000, 13).observations;
  TrainOptions opts;
  opts.em_rounds = 2;
  const CodecSystem system = train_system(model, rate, 5, train, 11, opts);
  for (auto _ : state) benchmark::DoNotOptimize(encode(eval, system));
  state.SetItemsProcessed(state.iterations() * eval.size());
}
BENCHMARK(BM_TrackingEncode)->Arg(2)->Arg(4)->Arg(6);

void BM_EnhancementAdapt(benchmark::State& state) {
  const int enh_rate = static_cast<int>(state.range(0));
  const HmmModel model = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.01);
  const std::vector<double> train = sample(model, 20000, 11).observations;
  TrainOptions opts;
  opts.em_rounds = 2;
  ScalableSystem scalable;
  scalable.base = train_system(model, 3, 5, train, 11, opts);
  scalable.enh_rate_bits = enh_rate;
  const StateBelief belief{{0.3, 0.7}};
  const Interval cell = scalable.base.initial_codebook.cell_interval(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(enh_adapt_codebook(belief, cell, scalable));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnhancementAdapt)->Arg(2)->Arg(4);

void BM_BoundSwitched(benchmark::State& state) {
  const HmmModel model = test_model();
  for (auto _ : state) benchmark::DoNotOptimize(bound_switched(model, 4, 5));
}
BENCHMARK(BM_BoundSwitched);

}  // namespace

BENCHMARK_MAIN();
