#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "hmsq/gauss.hpp"
#include "hmsq/rng.hpp"
#include "hmsq/scalable.hpp"
#include "hmsq/tracking.hpp"

using namespace hmsq;

namespace {

CodecSystem trained_base(double a = 0.05, int rate_bits = 3) {
  const HmmModel model = make_two_state_source(-1.5, 1.5, 1.0, 1.0, a);
  TrainOptions opts;
  opts.train_len = 8000;
  opts.em_rounds = 3;
  return train_system(model, rate_bits, 3, 31, opts);
}

ScalableSystem scalable(int enh_rate_bits, int delay_window = 0) {
  ScalableSystem s;
  s.base = trained_base();
  s.enh_rate_bits = enh_rate_bits;
  s.delay_window = delay_window;
  return s;
}

// A deliberately lopsided model so symmetric bugs cannot cancel out.
HmmModel skew_model() {
  HmmModel m;
  m.n_states = 2;
  m.transition = {{0.8, 0.2}, {0.35, 0.65}};
  m.initial = {0.3, 0.7};
  m.emissions = GaussianEmissions{{-1.0, 2.0}, {1.0, 0.25}};
  m.validate();
  return m;
}

CodecSystem wrap_model(const HmmModel& model) {
  CodecSystem s;
  s.model = model;
  s.rate_bits = 2;
  s.n_classes = 1;
  s.class_reps = {StateBelief::normalized(model.initial)};
  s.class_codebooks = {lloyd_design(belief_mixture(s.class_reps[0], model), 4)};
  s.initial_codebook = s.class_codebooks[0];
  s.validate();
  return s;
}

Interval intersect(const Interval& a, const Interval& b) {
  return Interval{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

}  // namespace

TEST_CASE("clip_cell geometry") {
  const HmmModel model = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1);
  const MixturePdf pdf = belief_mixture(StateBelief{{0.5, 0.5}}, model);
  const double reach = 6.0 * std::sqrt(pdf.variance());

  SUBCASE("finite cells pass through") {
    const Interval out = clip_cell(Interval{-0.25, 1.75}, pdf, 6.0);
    CHECK(out.lo == -0.25);
    CHECK(out.hi == 1.75);
  }
  SUBCASE("half-infinite ends clip at mean +- reach") {
    const Interval right = clip_cell(Interval{0.0, kInf}, pdf, 6.0);
    CHECK(right.lo == 0.0);
    CHECK(right.hi == doctest::Approx(reach).epsilon(1e-12));
    const Interval left = clip_cell(Interval{-kInf, 0.0}, pdf, 6.0);
    CHECK(left.lo == doctest::Approx(-reach).epsilon(1e-12));
    CHECK(left.hi == 0.0);
  }
  SUBCASE("a cell entirely beyond the clip point extends inward from its finite end") {
    const double far = reach + 2.0;
    const Interval out = clip_cell(Interval{far, kInf}, pdf, 6.0);
    CHECK(out.lo == far);
    CHECK(out.hi == doctest::Approx(far + reach).epsilon(1e-12));
    const Interval out2 = clip_cell(Interval{-kInf, -far}, pdf, 6.0);
    CHECK(out2.hi == -far);
    CHECK(out2.lo == doctest::Approx(-far - reach).epsilon(1e-12));
  }
  SUBCASE("full line clips to mean +- reach") {
    const Interval out = clip_cell(Interval{-kInf, kInf}, pdf, 6.0);
    CHECK(out.lo == doctest::Approx(-reach).epsilon(1e-12));
    CHECK(out.hi == doctest::Approx(reach).epsilon(1e-12));
  }
  SUBCASE("empty cell is rejected") {
    CHECK_THROWS(clip_cell(Interval{1.0, 1.0}, pdf, 6.0));
  }
}

TEST_CASE("per-component truncation normalizes inside the cell") {
  const HmmModel model = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1);
  const auto& g = model.gaussian();
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const double lo = -4.0 + 7.0 * rng.uniform();
    const double hi = lo + 0.1 + 3.0 * rng.uniform();
    const double w = 0.05 + 0.9 * rng.uniform();
    const MixturePdf pdf = MixturePdf::truncated_per_component(
        {GaussComponent{w, g.means[0], g.vars[0]}, GaussComponent{1.0 - w, g.means[1], g.vars[1]}},
        lo, hi);
    CHECK(pdf.mass(lo, hi) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pdf.mass(lo, 0.5 * (lo + hi)) > 0.0);
  }
}

TEST_CASE("enhancement codebook lives inside the base cell") {
  const ScalableSystem s = scalable(3);
  const Interval cell{0.0, kInf};
  const Codebook cb = enh_adapt_codebook(StateBelief{{0.5, 0.5}}, cell, s);
  cb.validate();
  CHECK(cb.size() == 8);
  for (double r : cb.reps) {
    CHECK(r > cell.lo);
    CHECK(std::isfinite(r));
  }

  // Pure upper state on a right half-line: truncated mean of N(1.5,1) above 1.5
  // is 1.5 + sqrt(2/pi); with enough online passes the 1-level codebook
  // converges to the cell centroid.
  ScalableSystem one = s;
  one.enh_rate_bits = 1;
  one.enh_online_lloyd_iters = 200;
  const Codebook cb1 = enh_adapt_codebook(StateBelief{{0.0, 1.0}}, Interval{1.5, kInf}, one);
  // The two reps of a 1-bit codebook straddle the truncated mean of N(1.5,1)
  // above its own mean, 1.5 + sqrt(2/pi).
  REQUIRE(cb1.size() == 2);
  const double tmean = 1.5 + std::sqrt(2.0 / std::numbers::pi);
  CHECK(cb1.reps[0] < tmean);
  CHECK(cb1.reps[1] > tmean);
}

TEST_CASE("far-tail cell falls back to the uniform codebook") {
  const ScalableSystem s = scalable(2);
  // Mass of the belief mixture beyond 40 underflows to zero.
  const Interval cell{40.0, 41.0};
  const Codebook cb = enh_adapt_codebook(StateBelief{{0.5, 0.5}}, cell, s);
  const Codebook uni = uniform_codebook(4, 40.0, 41.0);
  CHECK(cb.reps == uni.reps);
}

TEST_CASE("delayed belief: window handling") {
  const CodecSystem base = wrap_model(skew_model());
  const StateBelief pred{{0.4, 0.6}};

  SUBCASE("empty window returns the predictive belief unchanged") {
    const StateBelief out = delayed_enh_belief(pred, std::span<const Interval>{}, base);
    CHECK(out.probs == pred.probs);
  }
  SUBCASE("window of one is a pure Bayes step") {
    const std::vector<Interval> w = {Interval{0.0, kInf}};
    const StateBelief out = delayed_enh_belief(pred, w, base);
    const auto lik = cell_likelihoods(base.model, w[0]);
    const double z = pred[0] * lik[0] + pred[1] * lik[1];
    CHECK(out[0] == doctest::Approx(pred[0] * lik[0] / z).epsilon(1e-13));
    CHECK(out[1] == doctest::Approx(pred[1] * lik[1] / z).epsilon(1e-13));
  }
  SUBCASE("full-line future cells carry no information") {
    const std::vector<Interval> w1 = {Interval{-0.5, 1.0}};
    const std::vector<Interval> w3 = {Interval{-0.5, 1.0}, Interval{-kInf, kInf},
                                      Interval{-kInf, kInf}};
    const StateBelief a = delayed_enh_belief(pred, w1, base);
    const StateBelief b = delayed_enh_belief(pred, w3, base);
    CHECK(b[0] == doctest::Approx(a[0]).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(a[1]).epsilon(1e-14));
  }
}

TEST_CASE("delayed belief agrees with brute-force path enumeration") {
  const HmmModel m = skew_model();
  const CodecSystem base = wrap_model(m);
  const auto& g = m.gaussian();

  // Two coded history cells, then a two-cell lookahead window targeting t = 3.
  const std::vector<Interval> hist = {Interval{-kInf, 0.0}, Interval{-0.7, 0.3}};
  const std::vector<Interval> window = {Interval{0.5, 1.5}, Interval{1.0, kInf}};

  auto cell_mass = [&](int state, const Interval& c) {
    return gauss_interval_mass(g.means[state], g.vars[state], c.lo, c.hi);
  };

  // P(S_3 | X_1 in hist[0], X_2 in hist[1], X_3 in window[0], X_4 in window[1])
  // by summing all 2^4 state paths.
  double post[2] = {0.0, 0.0};
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2)
      for (int s3 = 0; s3 < 2; ++s3)
        for (int s4 = 0; s4 < 2; ++s4) {
          const double w = m.initial[s1] * cell_mass(s1, hist[0]) * m.transition[s1][s2] *
                           cell_mass(s2, hist[1]) * m.transition[s2][s3] *
                           cell_mass(s3, window[0]) * m.transition[s3][s4] *
                           cell_mass(s4, window[1]);
          post[s3] += w;
        }
  const double z = post[0] + post[1];

  const StateBelief out = delayed_enh_belief(hist, window, base);
  CHECK(out[0] == doctest::Approx(post[0] / z).epsilon(1e-10));
  CHECK(out[1] == doctest::Approx(post[1] / z).epsilon(1e-10));

  // Same posterior with a longer window (three future cells, 2^5 paths).
  const std::vector<Interval> window3 = {Interval{0.5, 1.5}, Interval{1.0, kInf},
                                         Interval{-kInf, -0.2}};
  double post3[2] = {0.0, 0.0};
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2)
      for (int s3 = 0; s3 < 2; ++s3)
        for (int s4 = 0; s4 < 2; ++s4)
          for (int s5 = 0; s5 < 2; ++s5) {
            const double w = m.initial[s1] * cell_mass(s1, hist[0]) * m.transition[s1][s2] *
                             cell_mass(s2, hist[1]) * m.transition[s2][s3] *
                             cell_mass(s3, window3[0]) * m.transition[s3][s4] *
                             cell_mass(s4, window3[1]) * m.transition[s4][s5] *
                             cell_mass(s5, window3[2]);
            post3[s3] += w;
          }
  const double z3 = post3[0] + post3[1];
  const StateBelief out3 = delayed_enh_belief(hist, window3, base);
  CHECK(out3[0] == doctest::Approx(post3[0] / z3).epsilon(1e-10));
  CHECK(out3[1] == doctest::Approx(post3[1] / z3).epsilon(1e-10));
}

TEST_CASE("scalable encoder and decoder mimic each other bit-exactly") {
  for (int delay : {0, 2}) {
    CAPTURE(delay);
    const ScalableSystem s = scalable(2, delay);
    const auto path = sample(s.base.model, 10000, 41);

    CodedTrace enc_base, enc_enh, dec_enh;
    const ScalableStreams streams = encode_scalable(path.observations, s, &enc_base, &enc_enh);

    // Base layer is byte-identical to the standalone tracking codec.
    CHECK(streams.base_indices == encode(path.observations, s.base));
    CHECK(decode_base(streams.base_indices, s) == decode(streams.base_indices, s.base));

    const std::vector<double> enh_recon =
        decode_enh(streams.base_indices, streams.enh_indices, s, &dec_enh);
    CHECK(enh_recon == enc_enh.recons);
    REQUIRE(enc_enh.beliefs.size() == dec_enh.beliefs.size());
    for (std::size_t t = 0; t < enc_enh.beliefs.size(); ++t)
      CHECK(enc_enh.beliefs[t].probs == dec_enh.beliefs[t].probs);
  }
}

TEST_CASE("enhancement reconstructions stay inside their base cells") {
  const ScalableSystem s = scalable(2, 1);
  const auto path = sample(s.base.model, 2000, 47);
  const ScalableStreams streams = encode_scalable(path.observations, s);
  const std::vector<Interval> cells = base_cells_from_indices(streams.base_indices, s.base);
  const std::vector<double> enh = decode_enh(streams.base_indices, streams.enh_indices, s);
  for (std::size_t t = 0; t < enh.size(); ++t) {
    CHECK(enh[t] >= cells[t].lo);
    CHECK(enh[t] <= cells[t].hi);
  }
}

TEST_CASE("enhancement layer refines the base layer") {
  const ScalableSystem s = scalable(3);
  const auto path = sample(s.base.model, 20000, 53);
  const ScalableStreams streams = encode_scalable(path.observations, s);
  const std::vector<double> base = decode_base(streams.base_indices, s);
  const std::vector<double> enh = decode_enh(streams.base_indices, streams.enh_indices, s);
  double mse_base = 0.0, mse_enh = 0.0;
  for (std::size_t t = 0; t < path.observations.size(); ++t) {
    const double eb = path.observations[t] - base[t];
    const double ee = path.observations[t] - enh[t];
    mse_base += eb * eb;
    mse_enh += ee * ee;
  }
  CHECK(mse_enh < mse_base);
}

TEST_CASE("zero-delay enhancement replays through the free functions") {
  const ScalableSystem s = scalable(2, 0);
  const auto path = sample(s.base.model, 500, 59);
  CodedTrace enh_trace;
  const ScalableStreams streams = encode_scalable(path.observations, s, nullptr, &enh_trace);
  const std::vector<Interval> cells = base_cells_from_indices(streams.base_indices, s.base);

  StateBelief belief = StateBelief::normalized(s.base.model.initial);
  for (std::size_t t = 0; t < path.observations.size(); ++t) {
    CHECK(enh_trace.beliefs[t].probs == belief.probs);
    const Codebook cb = enh_adapt_codebook(belief, cells[t], s);
    const int index = cb.quantize(path.observations[t]);
    CHECK(index == streams.enh_indices[t]);
    CHECK(enh_trace.recons[t] == cb.dequantize(index));
    const Interval enh_cell = intersect(cb.cell_interval(index), cells[t]);
    belief = update_belief(belief, enh_cell, s.base);
  }
}

TEST_CASE("a longer window never sees fewer cells than remain in the stream") {
  // delay_window larger than the remaining stream must not read past the end.
  const ScalableSystem s = scalable(2, 50);
  const auto path = sample(s.base.model, 30, 61);
  const ScalableStreams streams = encode_scalable(path.observations, s);
  const std::vector<double> enh = decode_enh(streams.base_indices, streams.enh_indices, s);
  CHECK(enh.size() == path.observations.size());
}

TEST_CASE("layer length mismatch is rejected") {
  const ScalableSystem s = scalable(2);
  std::vector<int> base = {0, 1, 2};
  std::vector<int> enh = {0, 1};
  CHECK_THROWS(decode_enh(base, enh, s));
}
