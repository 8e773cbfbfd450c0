#include "hmsq/loss.hpp"

#include <stdexcept>

#include "hmsq/rng.hpp"

namespace hmsq {

StateBelief lossy_update_encoder(const StateBelief& belief, const Interval& cell, double p_loss,
                                 const CodecSystem& system) {
  if (p_loss < 0.0 || p_loss > 1.0)
    throw std::invalid_argument("lossy_update_encoder: p_loss outside [0, 1]");
  // Exact reduction at p_loss = 0: same arithmetic as the lossless codec.
  if (p_loss == 0.0) return update_belief(belief, cell, system);
  if (p_loss == 1.0) return predict_belief(belief, system.model);
  const StateBelief no_loss = update_belief(belief, cell, system);
  const StateBelief with_loss = predict_belief(belief, system.model);
  std::vector<double> mixed(belief.size());
  for (std::size_t i = 0; i < mixed.size(); ++i)
    mixed[i] = (1.0 - p_loss) * no_loss[i] + p_loss * with_loss[i];
  return StateBelief::normalized(std::move(mixed));
}

StateBelief lossy_update_received(const StateBelief& belief, const Interval& cell,
                                  const CodecSystem& system) {
  return update_belief(belief, cell, system);
}

StateBelief lossy_update_erased(const StateBelief& belief, const CodecSystem& system) {
  return predict_belief(belief, system.model);
}

double conceal(const StateBelief& belief, const CodecSystem& system) {
  const auto& g = system.model.gaussian();
  if (belief.size() != g.means.size())
    throw std::invalid_argument("conceal: belief dimension mismatch");
  double est = 0.0;
  for (std::size_t j = 0; j < belief.size(); ++j) est += belief[j] * g.means[j];
  return est;
}

std::vector<int> encode_lossy(std::span<const double> obs, const CodecSystem& system,
                              double p_loss, CodedTrace* trace) {
  system.validate();
  if (p_loss < 0.0 || p_loss > 1.0)
    throw std::invalid_argument("encode_lossy: p_loss outside [0, 1]");

  StateBelief belief = StateBelief::normalized(system.model.initial);
  Codebook cb = system.initial_codebook;
  std::vector<int> indices(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (trace) trace->beliefs.push_back(belief);
    const int idx = cb.quantize(obs[t]);
    indices[t] = idx;
    if (trace) trace->recons.push_back(cb.reps[idx]);
    belief = lossy_update_encoder(belief, cb.cell_interval(idx), p_loss, system);
    cb = adapt_codebook(belief, system);
  }
  return indices;
}

PacketStream simulate_loss(std::span<const int> indices, int rate_bits,
                           const LossChannel& channel) {
  if (channel.loss_prob < 0.0 || channel.loss_prob > 1.0)
    throw std::invalid_argument("simulate_loss: loss probability outside [0, 1]");
  PacketStream stream;
  stream.rate_bits = rate_bits;
  stream.num_samples = static_cast<std::uint32_t>(indices.size());
  Rng rng(channel.seed);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const bool lost = rng.uniform() < channel.loss_prob;
    if (!lost) stream.packets.push_back(Packet{static_cast<std::uint32_t>(t), indices[t]});
  }
  return stream;
}

std::vector<double> decode_lossy(const PacketStream& stream, const CodecSystem& system,
                                 CodedTrace* trace) {
  system.validate();
  if (stream.rate_bits != system.rate_bits)
    throw std::invalid_argument("decode_lossy: stream rate does not match the system");

  StateBelief belief = StateBelief::normalized(system.model.initial);
  Codebook cb = system.initial_codebook;
  std::vector<double> recons(stream.num_samples);
  std::size_t next_packet = 0;
  std::uint32_t prev_seq = 0;
  for (std::uint32_t t = 0; t < stream.num_samples; ++t) {
    const Packet* packet = nullptr;
    if (next_packet < stream.packets.size() && stream.packets[next_packet].seq_no == t) {
      packet = &stream.packets[next_packet];
      if (next_packet > 0 && packet->seq_no <= prev_seq)
        throw std::invalid_argument("decode_lossy: out-of-order packet");
      prev_seq = packet->seq_no;
      ++next_packet;
    }
    if (trace) trace->beliefs.push_back(belief);
    if (packet) {
      if (packet->index < 0 || packet->index >= system.levels())
        throw std::out_of_range("decode_lossy: index outside codebook");
      recons[t] = cb.dequantize(packet->index);
      belief = lossy_update_received(belief, cb.cell_interval(packet->index), system);
    } else {
      recons[t] = conceal(belief, system);
      belief = lossy_update_erased(belief, system);
    }
    cb = adapt_codebook(belief, system);
    if (trace) trace->recons.push_back(recons[t]);
  }
  if (next_packet != stream.packets.size())
    throw std::invalid_argument("decode_lossy: packet sequence number beyond sample count");
  return recons;
}

}  // namespace hmsq
