#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hmsq/bitstream.hpp"
#include "hmsq/tracking.hpp"

namespace hmsq {

// Memoryless (i.i.d. Bernoulli) erasure channel, one sample per packet.
struct LossChannel {
  double loss_prob = 0.0;
  std::uint64_t seed = 0;
};

// Encoder-side belief step without feedback: the encoder cannot observe the
// channel, so it tracks the expected decoder belief — a convex mixture of the
// received-packet update and the pure transition step. p_loss = 0 takes the
// exact lossless path (bit-identical to update_belief).
StateBelief lossy_update_encoder(const StateBelief& belief, const Interval& cell, double p_loss,
                                 const CodecSystem& system);

// Decoder-side belief steps branch on the realized outcome.
StateBelief lossy_update_received(const StateBelief& belief, const Interval& cell,
                                  const CodecSystem& system);
StateBelief lossy_update_erased(const StateBelief& belief, const CodecSystem& system);

// MMSE concealment of a lost sample: belief-weighted mean of the per-state
// emission means.
double conceal(const StateBelief& belief, const CodecSystem& system);

// Encoder run with the expected-mixture belief; the produced indices assume a
// decoder tracking realized outcomes with the same system.
std::vector<int> encode_lossy(std::span<const double> obs, const CodecSystem& system,
                              double p_loss, CodedTrace* trace = nullptr);

// Drop each index independently with probability loss_prob; survivors keep
// their sequence number, so erasures appear as gaps.
PacketStream simulate_loss(std::span<const int> indices, int rate_bits,
                           const LossChannel& channel);

// Walk the packet stream: received packets decode through the adapted
// codebook, erased positions output the concealment estimate; the belief
// advances by the matching branch either way.
std::vector<double> decode_lossy(const PacketStream& stream, const CodecSystem& system,
                                 CodedTrace* trace = nullptr);

}  // namespace hmsq
