#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "hmsq/loss.hpp"
#include "hmsq/tracking.hpp"

using namespace hmsq;

namespace {

CodecSystem small_system(double a = 0.1, int rate_bits = 3) {
  const HmmModel model = make_two_state_source(-1.5, 1.5, 1.0, 1.0, a);
  TrainOptions opts;
  opts.train_len = 8000;
  opts.em_rounds = 3;
  return train_system(model, rate_bits, 3, 7, opts);
}

}  // namespace

TEST_CASE("encoder belief is the convex mixture of update and prediction") {
  const CodecSystem s = small_system();
  const StateBelief prior{{0.5, 0.5}};
  const Interval cell{0.0, kInf};

  SUBCASE("p = 0 takes the lossless path bit-for-bit") {
    const StateBelief a = lossy_update_encoder(prior, cell, 0.0, s);
    const StateBelief b = update_belief(prior, cell, s);
    CHECK(a.probs == b.probs);
  }
  SUBCASE("p = 1 is the pure transition step bit-for-bit") {
    const StateBelief a = lossy_update_encoder(prior, cell, 1.0, s);
    const StateBelief b = predict_belief(prior, s.model);
    CHECK(a.probs == b.probs);
  }
  SUBCASE("interior p, reference value") {
    // 0.8 * update + 0.2 * predict, both computed by adaptive quadrature.
    const StateBelief out = lossy_update_encoder(prior, cell, 0.2, s);
    CHECK(out[0] == doctest::Approx(0.22275660881206916).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.7772433911879308).epsilon(1e-12));
  }
  SUBCASE("matches the convex mixture of the public branches") {
    for (double p : {0.05, 0.3, 0.77}) {
      const StateBelief mix = lossy_update_encoder(prior, cell, p, s);
      const StateBelief up = update_belief(prior, cell, s);
      const StateBelief pr = predict_belief(prior, s.model);
      for (std::size_t i = 0; i < mix.size(); ++i)
        CHECK(mix[i] == doctest::Approx((1.0 - p) * up[i] + p * pr[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("erased-sample belief is the plain transition step") {
  const CodecSystem s = small_system();
  StateBelief b{{1.0, 0.0}};
  b = lossy_update_erased(b, s);
  CHECK(b[0] == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(0.1).epsilon(1e-14));
  b = lossy_update_erased(b, s);
  b = lossy_update_erased(b, s);
  // Three applications of the a = 0.1 chain from (1,0).
  CHECK(b[0] == doctest::Approx(0.756).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.244).epsilon(1e-12));
}

TEST_CASE("received-sample belief matches the lossless update") {
  const CodecSystem s = small_system();
  const StateBelief prior{{0.35, 0.65}};
  const Interval cell{-1.0, 0.5};
  const StateBelief a = lossy_update_received(prior, cell, s);
  const StateBelief b = update_belief(prior, cell, s);
  CHECK(a.probs == b.probs);
}

TEST_CASE("concealment is the belief-weighted emission mean") {
  const CodecSystem s = small_system();
  CHECK(conceal(StateBelief{{0.5, 0.5}}, s) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(conceal(StateBelief{{0.7, 0.3}}, s) == doctest::Approx(-0.6).epsilon(1e-14));
  CHECK(conceal(StateBelief{{0.0, 1.0}}, s) == 1.5);
}

TEST_CASE("channel simulation") {
  std::vector<int> indices(100000);
  for (std::size_t t = 0; t < indices.size(); ++t) indices[t] = static_cast<int>(t % 8);

  SUBCASE("p = 0 keeps everything, p = 1 drops everything") {
    const PacketStream all = simulate_loss(indices, 3, LossChannel{0.0, 1});
    CHECK(all.packets.size() == indices.size());
    CHECK(all.num_samples == indices.size());
    const PacketStream none = simulate_loss(indices, 3, LossChannel{1.0, 1});
    CHECK(none.packets.empty());
    CHECK(none.num_samples == indices.size());
  }
  SUBCASE("loss fraction concentrates on p") {
    const PacketStream st = simulate_loss(indices, 3, LossChannel{0.1, 42});
    const double lost =
        1.0 - static_cast<double>(st.packets.size()) / static_cast<double>(indices.size());
    CHECK(lost == doctest::Approx(0.1).epsilon(0.01));  // ~10 sigma at 1e5 draws
  }
  SUBCASE("deterministic for a fixed seed, survivors keep order and payload") {
    const PacketStream a = simulate_loss(indices, 3, LossChannel{0.25, 9});
    const PacketStream b = simulate_loss(indices, 3, LossChannel{0.25, 9});
    REQUIRE(a.packets.size() == b.packets.size());
    std::uint32_t prev_plus_one = 0;
    for (std::size_t k = 0; k < a.packets.size(); ++k) {
      CHECK(a.packets[k].seq_no == b.packets[k].seq_no);
      CHECK(a.packets[k].index == b.packets[k].index);
      CHECK(a.packets[k].seq_no >= prev_plus_one);
      prev_plus_one = a.packets[k].seq_no + 1;
      CHECK(a.packets[k].index == indices[a.packets[k].seq_no]);
    }
  }
}

TEST_CASE("lossless channel reduces the lossy decoder to the plain decoder") {
  const CodecSystem s = small_system();
  const auto path = sample(s.model, 5000, 11);
  const std::vector<int> indices = encode_lossy(path.observations, s, 0.0);
  CHECK(indices == encode(path.observations, s));

  const PacketStream st = simulate_loss(indices, s.rate_bits, LossChannel{0.0, 3});
  const std::vector<double> lossy = decode_lossy(st, s);
  const std::vector<double> plain = decode(indices, s);
  CHECK(lossy == plain);
}

TEST_CASE("erased positions output the concealment estimate") {
  const CodecSystem s = small_system();
  const auto path = sample(s.model, 40, 17);
  const std::vector<int> indices = encode_lossy(path.observations, s, 0.3);

  // Hand-build a stream with erasures at fixed positions.
  PacketStream st;
  st.rate_bits = s.rate_bits;
  st.num_samples = static_cast<std::uint32_t>(indices.size());
  const std::vector<std::uint32_t> erased = {0, 7, 8, 31};
  for (std::uint32_t t = 0; t < indices.size(); ++t) {
    bool drop = false;
    for (std::uint32_t e : erased) drop = drop || (e == t);
    if (!drop) st.packets.push_back({t, indices[t]});
  }

  CodedTrace trace;
  const std::vector<double> out = decode_lossy(st, s, &trace);
  REQUIRE(out.size() == indices.size());

  // Replay the decoder's branch logic with the free functions.
  StateBelief belief = StateBelief::normalized(s.model.initial);
  Codebook cb = s.initial_codebook;
  for (std::uint32_t t = 0; t < indices.size(); ++t) {
    CHECK(trace.beliefs[t].probs == belief.probs);
    bool drop = false;
    for (std::uint32_t e : erased) drop = drop || (e == t);
    if (drop) {
      CHECK(out[t] == conceal(belief, s));
      belief = lossy_update_erased(belief, s);
    } else {
      CHECK(out[t] == cb.dequantize(indices[t]));
      belief = lossy_update_received(belief, cb.cell_interval(indices[t]), s);
    }
    cb = adapt_codebook(belief, s);
  }
}

TEST_CASE("lossy decoder rejects inconsistent streams") {
  const CodecSystem s = small_system();
  PacketStream st;
  st.rate_bits = s.rate_bits + 1;
  st.num_samples = 4;
  st.packets = {{0, 1}};
  CHECK_THROWS(decode_lossy(st, s));

  st.rate_bits = s.rate_bits;
  st.packets = {{5, 1}};  // beyond num_samples
  CHECK_THROWS(decode_lossy(st, s));
}

TEST_CASE("loss hurts, concealment helps") {
  const CodecSystem s = small_system(0.1, 4);
  const auto path = sample(s.model, 100000, 23);
  const std::vector<double>& obs = path.observations;

  const std::vector<int> clean_idx = encode_lossy(obs, s, 0.0);
  const std::vector<double> clean = decode_lossy(
      simulate_loss(clean_idx, s.rate_bits, LossChannel{0.0, 5}), s);

  const std::vector<int> idx = encode_lossy(obs, s, 0.05);
  const PacketStream st = simulate_loss(idx, s.rate_bits, LossChannel{0.05, 5});
  const std::vector<double> lossy = decode_lossy(st, s);

  auto mse = [&](const std::vector<double>& rec) {
    double acc = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
      const double e = obs[t] - rec[t];
      acc += e * e;
    }
    return acc / static_cast<double>(obs.size());
  };
  CHECK(mse(lossy) > mse(clean));

  // On the erased positions, the belief-based estimate beats both zero
  // substitution and previous-output repetition.
  std::vector<bool> received(obs.size(), false);
  for (const Packet& p : st.packets) received[p.seq_no] = true;
  double err_conceal = 0.0, err_zero = 0.0, err_repeat = 0.0;
  std::size_t n_erased = 0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (received[t]) continue;
    ++n_erased;
    const double ec = obs[t] - lossy[t];
    err_conceal += ec * ec;
    err_zero += obs[t] * obs[t];
    const double prev = (t == 0) ? 0.0 : lossy[t - 1];
    const double er = obs[t] - prev;
    err_repeat += er * er;
  }
  REQUIRE(n_erased > 1000);
  CHECK(err_conceal < err_zero);
  CHECK(err_conceal < err_repeat);
}
