#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "hmsq/bounds.hpp"
#include "hmsq/quantizer.hpp"
#include "hmsq/tracking.hpp"

using namespace hmsq;

TEST_CASE("switched bound on a one-state model is the optimal quantizer distortion") {
  HmmModel m;
  m.n_states = 1;
  m.transition = {{1.0}};
  m.initial = {1.0};
  m.emissions = GaussianEmissions{{0.7}, {2.0}};
  m.validate();

  for (int rate : {1, 2, 3}) {
    const double b = bound_switched(m, rate, 20, 1);
    const MixturePdf pdf = belief_mixture(StateBelief{{1.0}}, m);
    const Codebook cb = lloyd_design(pdf, 1 << rate, LloydOptions{20000, 1e-14, 20, 1});
    CHECK(b == doctest::Approx(expected_distortion(pdf, cb)).epsilon(1e-9));
  }
}

TEST_CASE("switched bound is invariant under state relabeling") {
  const HmmModel a = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1);
  HmmModel b = a;
  std::swap(b.initial[0], b.initial[1]);
  auto& g = std::get<GaussianEmissions>(b.emissions);
  std::swap(g.means[0], g.means[1]);
  std::swap(g.vars[0], g.vars[1]);
  std::swap(b.transition[0][0], b.transition[0][1]);
  std::swap(b.transition[1][0], b.transition[1][1]);
  std::swap(b.transition[0], b.transition[1]);
  b.validate();
  // Restart seeds are keyed by state index, so the two labelings run
  // different random inits; they agree only to the Lloyd stop tolerance.
  CHECK(bound_switched(a, 3) == doctest::Approx(bound_switched(b, 3)).epsilon(1e-8));
}

TEST_CASE("switched bound decreases with rate") {
  const HmmModel m = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.05);
  double prev = bound_switched(m, 1);
  for (int rate : {2, 3, 4}) {
    const double b = bound_switched(m, rate);
    CHECK(b < prev);
    prev = b;
  }
}

TEST_CASE("no codec beats the revealed-state bound") {
  const HmmModel m = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1);
  TrainOptions opts;
  opts.train_len = 20000;
  const CodecSystem s = train_system(m, 3, 5, 3, opts);
  const auto path = sample(m, 50000, 4);
  const std::vector<double> rec = decode(encode(path.observations, s), s);
  double acc = 0.0;
  for (std::size_t t = 0; t < rec.size(); ++t) {
    const double e = path.observations[t] - rec[t];
    acc += e * e;
  }
  const double codec_mse = acc / static_cast<double>(rec.size());
  // Allow the Monte-Carlo wiggle of the measured side.
  CHECK(bound_switched(m, 3) < codec_mse * 1.02);
}

TEST_CASE("clean-history bound") {
  SUBCASE("memoryless chain reduces to the stationary static quantizer") {
    const HmmModel m = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.5);
    const auto path = sample(m, 40000, 11);
    const double b = bound_clean_history(m, 3, path.observations);

    const auto rho = stationary_distribution(m);
    const MixturePdf stat = belief_mixture(StateBelief{rho}, m);
    const Codebook cb = lloyd_design(stat, 8, LloydOptions{400, 1e-14, 10, 2});
    double acc = 0.0;
    for (double x : path.observations) {
      const double e = x - cb.dequantize(cb.quantize(x));
      acc += e * e;
    }
    const double direct = acc / static_cast<double>(path.observations.size());
    // Both sides converge to the same Lloyd optimum from independent inits.
    CHECK(b == doctest::Approx(direct).epsilon(1e-4));
  }
  SUBCASE("lower than the closed-loop codec on the same data") {
    const HmmModel m = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.05);
    TrainOptions opts;
    opts.train_len = 20000;
    const CodecSystem s = train_system(m, 3, 5, 13, opts);
    const auto path = sample(m, 30000, 14);
    const std::vector<double> rec = decode(encode(path.observations, s), s);
    double acc = 0.0;
    for (std::size_t t = 0; t < rec.size(); ++t) {
      const double e = path.observations[t] - rec[t];
      acc += e * e;
    }
    const double codec_mse = acc / static_cast<double>(rec.size());
    CHECK(bound_clean_history(m, 3, path.observations) < codec_mse * 1.001);
  }
}
