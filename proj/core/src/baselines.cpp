#include "hmsq/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hmsq/kmeans.hpp"

namespace hmsq {

namespace {

double to_db(double mse) { return 10.0 * std::log10(std::max(mse, 1e-300)); }

double sample_mean(std::span<const double> obs) {
  double m = 0.0;
  for (double x : obs) m += x;
  return m / obs.size();
}

}  // namespace

void DpcmCodec::validate() const {
  if (!(std::abs(predictor) < 1.0))
    throw std::invalid_argument("DpcmCodec: predictor coefficient must satisfy |a| < 1");
  residual_codebook.validate();
  if (residual_codebook.size() != (1 << rate_bits))
    throw std::invalid_argument("DpcmCodec: codebook size must be 2^rate_bits");
}

DpcmCodec dpcm_train(std::span<const double> obs, int rate_bits, int rounds) {
  if (obs.size() < (1u << rate_bits) * 4u)
    throw std::invalid_argument("dpcm_train: training sequence too short");

  const double mean = sample_mean(obs);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + 1 < obs.size(); ++t) {
    num += (obs[t] - mean) * (obs[t + 1] - mean);
    den += (obs[t] - mean) * (obs[t] - mean);
  }
  if (!(den > 0.0)) throw std::invalid_argument("dpcm_train: zero-variance training data");

  DpcmCodec codec;
  codec.rate_bits = rate_bits;
  codec.init_value = mean;
  codec.predictor = std::clamp(num / den, -0.999, 0.999);

  // First design on open-loop residuals (prediction from the true past), then
  // refine on the residuals the closed-loop codec actually sees.
  std::vector<double> residuals(obs.size());
  residuals[0] = obs[0] - codec.predictor * mean;
  for (std::size_t t = 1; t < obs.size(); ++t)
    residuals[t] = obs[t] - codec.predictor * obs[t - 1];
  codec.residual_codebook = lloyd_design_samples(residuals, 1 << rate_bits);

  for (int round = 0; round < rounds; ++round) {
    double prev = codec.init_value;
    for (std::size_t t = 0; t < obs.size(); ++t) {
      const double e = obs[t] - codec.predictor * prev;
      residuals[t] = e;
      const double ehat = codec.residual_codebook.reps[codec.residual_codebook.quantize(e)];
      prev = codec.predictor * prev + ehat;
    }
    codec.residual_codebook = lloyd_design_samples(residuals, 1 << rate_bits);
  }
  codec.validate();
  return codec;
}

std::vector<int> dpcm_encode(std::span<const double> obs, const DpcmCodec& codec,
                             std::vector<double>* encoder_recons) {
  codec.validate();
  std::vector<int> indices(obs.size());
  double prev = codec.init_value;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const double e = obs[t] - codec.predictor * prev;
    const int idx = codec.residual_codebook.quantize(e);
    indices[t] = idx;
    prev = codec.predictor * prev + codec.residual_codebook.reps[idx];
    if (encoder_recons) encoder_recons->push_back(prev);
  }
  return indices;
}

std::vector<double> dpcm_decode(std::span<const int> indices, const DpcmCodec& codec) {
  codec.validate();
  std::vector<double> recons(indices.size());
  double prev = codec.init_value;
  for (std::size_t t = 0; t < indices.size(); ++t) {
    prev = codec.predictor * prev + codec.residual_codebook.dequantize(indices[t]);
    recons[t] = prev;
  }
  return recons;
}

std::vector<double> dpcm_decode_lossy(const PacketStream& stream, const DpcmCodec& codec) {
  codec.validate();
  if (stream.rate_bits != codec.rate_bits)
    throw std::invalid_argument("dpcm_decode_lossy: stream rate does not match the codec");
  std::vector<double> recons(stream.num_samples);
  double prev = codec.init_value;
  std::size_t next_packet = 0;
  for (std::uint32_t t = 0; t < stream.num_samples; ++t) {
    double ehat = 0.0;  // erased packet: pure prediction
    if (next_packet < stream.packets.size() && stream.packets[next_packet].seq_no == t) {
      ehat = codec.residual_codebook.dequantize(stream.packets[next_packet].index);
      ++next_packet;
    }
    prev = codec.predictor * prev + ehat;
    recons[t] = prev;
  }
  if (next_packet != stream.packets.size())
    throw std::invalid_argument("dpcm_decode_lossy: packet beyond sample count");
  return recons;
}

void FsqCodec::validate() const {
  if (state_codebooks.empty()) throw std::invalid_argument("FsqCodec: no states");
  if (next_state.size() != state_codebooks.size())
    throw std::invalid_argument("FsqCodec: next-state table size mismatch");
  for (std::size_t s = 0; s < state_codebooks.size(); ++s) {
    state_codebooks[s].validate();
    if (state_codebooks[s].size() != (1 << rate_bits))
      throw std::invalid_argument("FsqCodec: codebook size must be 2^rate_bits");
    if (next_state[s].size() != static_cast<std::size_t>(1 << rate_bits))
      throw std::invalid_argument("FsqCodec: next-state row size mismatch");
    for (int v : next_state[s])
      if (v < 0 || v >= n_states())
        throw std::invalid_argument("FsqCodec: next-state entry out of range");
  }
}

namespace {

struct FsqPass {
  double mse = 0.0;
  std::vector<int> states;   // encoder state per sample
  std::vector<int> indices;  // transmitted index per sample
};

FsqPass fsq_run(std::span<const double> obs, const FsqCodec& codec) {
  FsqPass pass;
  pass.states.resize(obs.size());
  pass.indices.resize(obs.size());
  int state = 0;
  double acc = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const Codebook& cb = codec.state_codebooks[state];
    const int idx = cb.quantize(obs[t]);
    const double err = obs[t] - cb.reps[idx];
    acc += err * err;
    pass.states[t] = state;
    pass.indices[t] = idx;
    state = codec.next_state[state][idx];
  }
  pass.mse = acc / obs.size();
  return pass;
}

double codebook_sample_distortion(const Codebook& cb, std::span<const double> samples) {
  double acc = 0.0;
  for (double x : samples) {
    const double err = x - cb.reps[cb.quantize(x)];
    acc += err * err;
  }
  return samples.empty() ? 0.0 : acc / samples.size();
}

// Drop a state: remap the table and renumber everything above it.
void fsq_remove_state(FsqCodec& codec, int dead, int fallback) {
  codec.state_codebooks.erase(codec.state_codebooks.begin() + dead);
  codec.next_state.erase(codec.next_state.begin() + dead);
  for (auto& row : codec.next_state)
    for (int& v : row) {
      if (v == dead) v = fallback;
      if (v > dead) --v;
    }
}

}  // namespace

FsqCodec fsq_train(std::span<const double> obs, int n_states_q, int rate_bits, int rounds,
                   FsqTrainLog* log) {
  if (n_states_q < 1) throw std::invalid_argument("fsq_train: need at least one state");
  if (obs.size() < static_cast<std::size_t>(n_states_q) * (1u << rate_bits) * 4u)
    throw std::invalid_argument("fsq_train: training sequence too short");

  FsqCodec codec;
  codec.rate_bits = rate_bits;
  codec.train_mean = sample_mean(obs);

  // Initial state partition clusters the previous sample (the context the
  // encoder state is meant to summarize).
  std::vector<double> context(obs.size());
  context[0] = codec.train_mean;
  for (std::size_t t = 1; t < obs.size(); ++t) context[t] = obs[t - 1];
  const Kmeans1dResult km = kmeans_1d(context, n_states_q);

  std::vector<std::vector<double>> routed(n_states_q);
  for (std::size_t t = 0; t < obs.size(); ++t) routed[km.assignments[t]].push_back(obs[t]);
  for (int s = 0; s < n_states_q; ++s) {
    if (routed[s].empty()) routed[s].assign(obs.begin(), obs.end());
    codec.state_codebooks.push_back(lloyd_design_samples(routed[s], 1 << rate_bits));
  }
  codec.next_state.assign(n_states_q, std::vector<int>(1 << rate_bits, 0));
  for (int s = 0; s < n_states_q; ++s)
    for (int i = 0; i < (1 << rate_bits); ++i) {
      int best = 0;
      for (int k = 1; k < n_states_q; ++k)
        if (std::abs(km.centers[k] - codec.state_codebooks[s].reps[i]) <
            std::abs(km.centers[best] - codec.state_codebooks[s].reps[i]))
          best = k;
      codec.next_state[s][i] = best;
    }

  FsqCodec best_codec = codec;
  double best_mse = std::numeric_limits<double>::infinity();
  double prev_db = std::numeric_limits<double>::infinity();
  for (int round = 0; round < rounds; ++round) {
    const FsqPass pass = fsq_run(obs, codec);
    const double round_db = to_db(pass.mse);
    if (std::isfinite(prev_db) && round_db > prev_db + 0.005) {
      if (log) log->warnings.push_back("training stopped on a non-improving round");
      break;
    }
    if (log) log->round_distortion_db.push_back(round_db);
    if (pass.mse < best_mse) {
      best_mse = pass.mse;
      best_codec = codec;
    }
    if (std::isfinite(prev_db) && prev_db - round_db < 0.01) break;
    prev_db = round_db;

    // (a) Redesign each state's codebook on the samples it actually coded.
    for (auto& r : routed) r.clear();
    routed.resize(codec.n_states());
    for (std::size_t t = 0; t < obs.size(); ++t) routed[pass.states[t]].push_back(obs[t]);
    for (int s = 0; s < codec.n_states(); ++s) {
      if (routed[s].empty()) {
        // Starved state: fold it into state 0 and continue smaller.
        if (log)
          log->warnings.push_back("state " + std::to_string(s) + " starved; merged away");
        fsq_remove_state(codec, s, 0);
        routed.erase(routed.begin() + s);
        --s;
        continue;
      }
      codec.state_codebooks[s] = lloyd_design_samples(routed[s], 1 << rate_bits);
    }
    if (codec.n_states() == 0) throw std::runtime_error("fsq_train: all states starved");

    // (b) Re-optimize successors: route each (state, index) to the state
    // whose codebook best quantizes the samples that follow that event.
    const FsqPass repass = fsq_run(obs, codec);
    std::vector<std::vector<std::vector<double>>> followers(
        codec.n_states(), std::vector<std::vector<double>>(1 << rate_bits));
    for (std::size_t t = 0; t + 1 < obs.size(); ++t)
      followers[repass.states[t]][repass.indices[t]].push_back(obs[t + 1]);
    for (int s = 0; s < codec.n_states(); ++s)
      for (int i = 0; i < (1 << rate_bits); ++i) {
        if (followers[s][i].empty()) continue;  // unused event keeps its mapping
        int best = codec.next_state[s][i];
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < codec.n_states(); ++k) {
          const double d = codebook_sample_distortion(codec.state_codebooks[k], followers[s][i]);
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        codec.next_state[s][i] = best;
      }
  }
  best_codec.validate();
  return best_codec;
}

std::vector<int> fsq_encode(std::span<const double> obs, const FsqCodec& codec,
                            std::vector<double>* encoder_recons, std::vector<int>* states) {
  codec.validate();
  std::vector<int> indices(obs.size());
  int state = 0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const Codebook& cb = codec.state_codebooks[state];
    const int idx = cb.quantize(obs[t]);
    indices[t] = idx;
    if (encoder_recons) encoder_recons->push_back(cb.reps[idx]);
    if (states) states->push_back(state);
    state = codec.next_state[state][idx];
  }
  return indices;
}

std::vector<double> fsq_decode(std::span<const int> indices, const FsqCodec& codec,
                               std::vector<int>* states) {
  codec.validate();
  std::vector<double> recons(indices.size());
  int state = 0;
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (indices[t] < 0 || indices[t] >= (1 << codec.rate_bits))
      throw std::out_of_range("fsq_decode: index outside codebook");
    recons[t] = codec.state_codebooks[state].dequantize(indices[t]);
    if (states) states->push_back(state);
    state = codec.next_state[state][indices[t]];
  }
  return recons;
}

std::vector<double> fsq_decode_lossy(const PacketStream& stream, const FsqCodec& codec) {
  codec.validate();
  if (stream.rate_bits != codec.rate_bits)
    throw std::invalid_argument("fsq_decode_lossy: stream rate does not match the codec");
  std::vector<double> recons(stream.num_samples);
  int state = 0;
  std::size_t next_packet = 0;
  for (std::uint32_t t = 0; t < stream.num_samples; ++t) {
    const Codebook& cb = codec.state_codebooks[state];
    int idx;
    if (next_packet < stream.packets.size() && stream.packets[next_packet].seq_no == t) {
      idx = stream.packets[next_packet].index;
      if (idx < 0 || idx >= (1 << codec.rate_bits))
        throw std::out_of_range("fsq_decode_lossy: index outside codebook");
      recons[t] = cb.dequantize(idx);
      ++next_packet;
    } else {
      // Erasure: output the training mean and advance through the index whose
      // codeword is nearest to it, so encoder-free state tracking continues.
      recons[t] = codec.train_mean;
      idx = cb.quantize(codec.train_mean);
    }
    state = codec.next_state[state][idx];
  }
  if (next_packet != stream.packets.size())
    throw std::invalid_argument("fsq_decode_lossy: packet beyond sample count");
  return recons;
}

void ScalableDpcm::validate() const {
  base.validate();
  enh_codebook.validate();
  if (enh_codebook.size() != (1 << enh_rate_bits))
    throw std::invalid_argument("ScalableDpcm: enhancement codebook size must be 2^rate");
}

ScalableDpcm scalable_dpcm_train(std::span<const double> obs, int base_rate_bits,
                                 int enh_rate_bits, int rounds) {
  ScalableDpcm codec;
  codec.base = dpcm_train(obs, base_rate_bits, rounds);
  codec.enh_rate_bits = enh_rate_bits;

  std::vector<double> base_recons;
  base_recons.reserve(obs.size());
  dpcm_encode(obs, codec.base, &base_recons);
  std::vector<double> errors(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) errors[t] = obs[t] - base_recons[t];
  codec.enh_codebook = lloyd_design_samples(errors, 1 << enh_rate_bits);
  codec.validate();
  return codec;
}

ScalableDpcmStreams scalable_dpcm_encode(std::span<const double> obs,
                                         const ScalableDpcm& codec) {
  codec.validate();
  ScalableDpcmStreams streams;
  std::vector<double> base_recons;
  base_recons.reserve(obs.size());
  streams.base_indices = dpcm_encode(obs, codec.base, &base_recons);
  streams.enh_indices.resize(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t)
    streams.enh_indices[t] = codec.enh_codebook.quantize(obs[t] - base_recons[t]);
  return streams;
}

std::vector<double> scalable_dpcm_decode_base(std::span<const int> base_indices,
                                              const ScalableDpcm& codec) {
  return dpcm_decode(base_indices, codec.base);
}

std::vector<double> scalable_dpcm_decode_enh(std::span<const int> base_indices,
                                             std::span<const int> enh_indices,
                                             const ScalableDpcm& codec) {
  codec.validate();
  if (base_indices.size() != enh_indices.size())
    throw std::invalid_argument("scalable_dpcm_decode_enh: layer length mismatch");
  std::vector<double> recons = dpcm_decode(base_indices, codec.base);
  for (std::size_t t = 0; t < recons.size(); ++t)
    recons[t] += codec.enh_codebook.dequantize(enh_indices[t]);
  return recons;
}

}  // namespace hmsq
