#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hmsq/quantizer.hpp"
#include "hmsq/rng.hpp"

using namespace hmsq;

namespace {

MixturePdf std_normal() { return MixturePdf::full({{1.0, 0.0, 1.0}}); }

MixturePdf symmetric_pair() {
  return MixturePdf::full({{0.5, -1.5, 1.0}, {0.5, 1.5, 1.0}});
}

const double kHalfNormalMean = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

TEST_CASE("uniform codebook closed form") {
  SUBCASE("unit interval, two levels") {
    const Codebook cb = uniform_codebook(2, 0.0, 1.0);
    CHECK(cb.reps == std::vector<double>{0.25, 0.75});
    CHECK(cb.thresholds == std::vector<double>{0.5});
  }
  SUBCASE("four levels") {
    const Codebook cb = uniform_codebook(4, -1.0, 1.0);
    CHECK(cb.reps[0] == doctest::Approx(-0.75).epsilon(1e-14));
    CHECK(cb.reps[1] == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(cb.reps[2] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(cb.reps[3] == doctest::Approx(0.75).epsilon(1e-14));
    for (std::size_t i = 0; i + 1 < cb.thresholds.size(); ++i)
      CHECK(cb.thresholds[i + 1] - cb.thresholds[i] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("infinite interval is rejected") {
    CHECK_THROWS(uniform_codebook(2, 0.0, kInf));
  }
}

TEST_CASE("quantize mechanics and the boundary tie rule") {
  const Codebook cb{{-1.0, 1.0}, {0.0}};
  CHECK(cb.quantize(0.3) == 1);
  CHECK(cb.dequantize(1) == 1.0);
  CHECK(cb.cell_interval(1).lo == 0.0);
  CHECK(cb.cell_interval(1).hi == kInf);
  // A point exactly on a boundary belongs to the lower cell.
  CHECK(cb.quantize(0.0) == 0);
  CHECK_THROWS(cb.dequantize(2));

  const Codebook four = uniform_codebook(4, -1.0, 1.0);
  for (int i = 0; i < four.size(); ++i) CHECK(four.quantize(four.dequantize(i)) == i);
  CHECK(four.quantize(four.thresholds[1]) == 1);
}

TEST_CASE("mixture moments") {
  SUBCASE("standard normal") {
    const MixturePdf pdf = std_normal();
    CHECK(pdf.mean() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(pdf.variance() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("symmetric pair has inflated variance") {
    const MixturePdf pdf = symmetric_pair();
    CHECK(pdf.mean() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(pdf.variance() == doctest::Approx(3.25).epsilon(1e-12));
  }
  SUBCASE("half-line truncation of the normal") {
    const MixturePdf pdf = MixturePdf::truncated({{1.0, 0.0, 1.0}}, 0.0, kInf);
    CHECK(pdf.mean() == doctest::Approx(kHalfNormalMean).epsilon(1e-12));
  }
  SUBCASE("two-sided truncated mixture against quadrature") {
    // Reference numbers from adaptive quadrature of the same mixture.
    const MixturePdf pdf =
        MixturePdf::truncated({{0.3, -1.5, 1.0}, {0.7, 1.5, 1.0}}, -0.5, 2.5);
    CHECK(pdf.mean() == doctest::Approx(1.174839007121876).epsilon(1e-11));
    CHECK(pdf.variance() == doctest::Approx(0.6049406163067135).epsilon(1e-9));
  }
}

TEST_CASE("cell mass") {
  const MixturePdf pdf = std_normal();
  CHECK(pdf.mass(-kInf, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(pdf.mass(-1.96, 1.96) == doctest::Approx(0.95).epsilon(1e-3));
  CHECK(pdf.mass(0.4, 0.4) == 0.0);
}

TEST_CASE("per-component truncation keeps the weight split") {
  const MixturePdf pdf =
      MixturePdf::truncated_per_component({{0.3, -1.5, 1.0}, {0.7, 1.5, 1.0}}, -0.5, 2.5);
  // The renormalized first component keeps 0.3 of the total despite its small
  // raw overlap, pushing mass into the lower region.  Reference value from
  // adaptive quadrature; shared normalization would give 0.0941 instead.
  CHECK(pdf.mass(pdf.support().lo, pdf.support().hi) == doctest::Approx(1.0).epsilon(1e-12));
  const double lower = pdf.mass(-0.5, 0.0);
  CHECK(lower == doctest::Approx(0.21138371579080495).epsilon(1e-10));
  const MixturePdf shared =
      MixturePdf::truncated({{0.3, -1.5, 1.0}, {0.7, 1.5, 1.0}}, -0.5, 2.5);
  CHECK(lower > 2.0 * shared.mass(-0.5, 0.0));
}

TEST_CASE("quantile inverts the cdf") {
  const MixturePdf pdf = MixturePdf::full({{0.3, -1.5, 1.0}, {0.7, 1.5, 1.0}});
  // Reference values from a root finder on the mixture CDF.
  CHECK(pdf.quantile(0.25) == doctest::Approx(-0.6657013381026624).epsilon(1e-9));
  CHECK(pdf.quantile(0.5) == doctest::Approx(0.943204978300439).epsilon(1e-9));
  CHECK(pdf.quantile(0.9) == doctest::Approx(2.567615630541623).epsilon(1e-9));
  for (double q : {0.1, 0.45, 0.8})
    CHECK(pdf.mass(-kInf, pdf.quantile(q)) == doctest::Approx(q).epsilon(1e-9));
}

TEST_CASE("expected distortion closed forms") {
  const MixturePdf pdf = std_normal();
  SUBCASE("single-level codebook pays the variance") {
    const Codebook cb{{0.0}, {}};
    CHECK(expected_distortion(pdf, cb) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two fixed levels at +-1") {
    const Codebook cb{{-1.0, 1.0}, {0.0}};
    // Quadrature reference for E(x - q(x))^2.
    CHECK(expected_distortion(pdf, cb) ==
          doctest::Approx(0.40423087839427047).epsilon(1e-12));
  }
}

TEST_CASE("cell masses over a codebook sum to one") {
  const MixturePdf pdf = symmetric_pair();
  const Codebook cb = lloyd_design(pdf, 8);
  double total = 0.0;
  for (int i = 0; i < cb.size(); ++i) {
    const Interval cell = cb.cell_interval(i);
    total += pdf.mass(cell.lo, cell.hi);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  const auto moments = cell_moments(pdf, cb.thresholds);
  REQUIRE(moments.size() == static_cast<std::size_t>(cb.size()));
  double m0 = 0.0, m1 = 0.0;
  for (const auto& m : moments) {
    m0 += m.m0;
    m1 += m.m1;
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m1 == doctest::Approx(pdf.mean()).epsilon(1e-9));
}

TEST_CASE("one-bit Lloyd on the standard normal hits the analytic optimum") {
  const MixturePdf pdf = std_normal();
  const Codebook cb = lloyd_design(pdf, 2);
  CHECK(cb.reps[0] == doctest::Approx(-kHalfNormalMean).epsilon(1e-6));
  CHECK(cb.reps[1] == doctest::Approx(kHalfNormalMean).epsilon(1e-6));
  CHECK(expected_distortion(pdf, cb) ==
        doctest::Approx(1.0 - 2.0 / std::numbers::pi).epsilon(1e-6));
}

TEST_CASE("two-bit Lloyd matches the classic optimum for the normal") {
  const MixturePdf pdf = std_normal();
  // Distortion improvement is quadratic in the rep error near the optimum, so
  // pinning reps to 1e-6 needs a much tighter stop than the default 1e-10.
  const Codebook cb = lloyd_design(pdf, 4, {2000, 1e-15, 0, 0});
  // Converged fixed point computed independently to full precision.
  CHECK(cb.reps[0] == doctest::Approx(-1.5104176084990961).epsilon(1e-6));
  CHECK(cb.reps[1] == doctest::Approx(-0.4527800346364921).epsilon(1e-6));
  CHECK(cb.reps[2] == doctest::Approx(0.4527800346364921).epsilon(1e-6));
  CHECK(cb.reps[3] == doctest::Approx(1.5104176084990961).epsilon(1e-6));
  CHECK(expected_distortion(pdf, cb) ==
        doctest::Approx(0.11748184782932929).epsilon(1e-6));
}

TEST_CASE("rate-zero design returns the pdf mean") {
  const MixturePdf pdf = symmetric_pair();
  const Codebook cb = lloyd_design(pdf, 1);
  REQUIRE(cb.size() == 1);
  CHECK(cb.reps[0] == doctest::Approx(pdf.mean()).epsilon(1e-12));
}

TEST_CASE("Lloyd iterations never increase the distortion") {
  const MixturePdf pdf = symmetric_pair();
  Codebook cb = uniform_codebook(8, -4.0, 4.0);
  double prev = expected_distortion(pdf, cb);
  for (int it = 0; it < 25; ++it) {
    cb = lloyd_iterate(pdf, std::move(cb), 1);
    const double d = expected_distortion(pdf, cb);
    CHECK(d <= prev + 1e-12);
    prev = d;
  }
}

TEST_CASE("design on a symmetric mixture stays symmetric") {
  const MixturePdf pdf = symmetric_pair();
  const Codebook cb = lloyd_design(pdf, 4);
  for (int i = 0; i < 4; ++i)
    CHECK(cb.reps[i] == doctest::Approx(-cb.reps[3 - i]).epsilon(1e-9));
}

TEST_CASE("converged codebook beats nearby perturbations") {
  const MixturePdf pdf = symmetric_pair();
  Codebook cb = lloyd_design(pdf, 4);
  cb = lloyd_converge(pdf, std::move(cb), 500, 1e-14);
  const double best = expected_distortion(pdf, cb);
  const double spacing = cb.reps[1] - cb.reps[0];
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    Codebook probe = cb;
    for (double& r : probe.reps) r += spacing * 0.01 * (2.0 * rng.uniform() - 1.0);
    for (std::size_t i = 0; i + 1 < probe.reps.size(); ++i)
      probe.thresholds[i] = 0.5 * (probe.reps[i] + probe.reps[i + 1]);
    CHECK(expected_distortion(pdf, probe) >= best - 1e-10);
  }
}

TEST_CASE("distortion decreases with rate") {
  const MixturePdf pdf = symmetric_pair();
  double prev = kInf;
  for (int k : {1, 2, 4, 8, 16}) {
    const double d = expected_distortion(pdf, lloyd_design(pdf, k));
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("expected distortion matches a Monte Carlo estimate") {
  const MixturePdf pdf = symmetric_pair();
  const Codebook cb = lloyd_design(pdf, 4);
  const double exact = expected_distortion(pdf, cb);

  Rng rng(77);
  const int n = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform() < 0.5 ? -1.5 + rng.gaussian() : 1.5 + rng.gaussian();
    const double e = x - cb.dequantize(cb.quantize(x));
    acc += e * e;
    acc2 += e * e * e * e;
  }
  const double mc = acc / n;
  const double se = std::sqrt((acc2 / n - mc * mc) / n);
  CHECK(std::abs(mc - exact) < 3.0 * se);
}

TEST_CASE("sample-based design matches density design on large samples") {
  Rng rng(15);
  std::vector<double> data(100000);
  for (double& x : data) x = rng.gaussian();
  const Codebook cb = lloyd_design_samples(data, 4);
  const Codebook ref = lloyd_design(std_normal(), 4);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(cb.reps[i] - ref.reps[i]) < 0.05);
}

TEST_CASE("empty cells are repaired during design") {
  // Far-apart narrow modes with more levels than modes force empty cells
  // under a naive init.
  const MixturePdf pdf = MixturePdf::full({{0.5, -50.0, 0.01}, {0.5, 50.0, 0.01}});
  const Codebook cb = lloyd_design(pdf, 4);
  cb.validate();
  CHECK(expected_distortion(pdf, cb) < pdf.variance());
}

TEST_CASE("codebook validation rejects broken geometry") {
  Codebook bad{{0.0, 1.0, 0.5}, {0.5, 0.75}};
  CHECK_THROWS(bad.validate());
  Codebook misplaced{{0.0, 1.0}, {2.0}};  // threshold outside (rep0, rep1)
  CHECK_THROWS(misplaced.validate());
}
