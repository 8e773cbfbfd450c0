#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hmsq/bitstream.hpp"
#include "hmsq/quantizer.hpp"

namespace hmsq {

// First-order predictive codec: e_t = x_t - a*xhat_{t-1}, quantized residual
// transmitted, xhat_t = a*xhat_{t-1} + ehat_t. The decoder starts from the
// training mean like the encoder.
struct DpcmCodec {
  double predictor = 0.0;
  double init_value = 0.0;  // xhat_0
  Codebook residual_codebook;
  int rate_bits = 0;

  void validate() const;
};

DpcmCodec dpcm_train(std::span<const double> obs, int rate_bits, int rounds = 5);
std::vector<int> dpcm_encode(std::span<const double> obs, const DpcmCodec& codec,
                             std::vector<double>* encoder_recons = nullptr);
std::vector<double> dpcm_decode(std::span<const int> indices, const DpcmCodec& codec);
// Erased packets decode as a zero residual (pure prediction).
std::vector<double> dpcm_decode_lossy(const PacketStream& stream, const DpcmCodec& codec);

// Finite-state quantizer: one codebook per encoder state; the next state is a
// trained function of (state, transmitted index), so the decoder replays the
// exact state trajectory from the indices alone.
struct FsqCodec {
  int rate_bits = 0;
  std::vector<Codebook> state_codebooks;
  std::vector<std::vector<int>> next_state;  // [state][index]
  double train_mean = 0.0;                   // concealment value under loss

  int n_states() const { return static_cast<int>(state_codebooks.size()); }
  void validate() const;
};

struct FsqTrainLog {
  std::vector<double> round_distortion_db;
  std::vector<std::string> warnings;
};

FsqCodec fsq_train(std::span<const double> obs, int n_states_q, int rate_bits, int rounds = 10,
                   FsqTrainLog* log = nullptr);
std::vector<int> fsq_encode(std::span<const double> obs, const FsqCodec& codec,
                            std::vector<double>* encoder_recons = nullptr,
                            std::vector<int>* states = nullptr);
std::vector<double> fsq_decode(std::span<const int> indices, const FsqCodec& codec,
                               std::vector<int>* states = nullptr);
// Erased packets reconstruct as the training mean; the state advances through
// the index whose codeword is nearest to that mean.
std::vector<double> fsq_decode_lossy(const PacketStream& stream, const FsqCodec& codec);

// Scalable baseline: DPCM base layer plus a Lloyd quantizer for the base
// reconstruction error, trained on closed-loop residuals.
struct ScalableDpcm {
  DpcmCodec base;
  Codebook enh_codebook;
  int enh_rate_bits = 0;

  void validate() const;
};

ScalableDpcm scalable_dpcm_train(std::span<const double> obs, int base_rate_bits,
                                 int enh_rate_bits, int rounds = 5);
struct ScalableDpcmStreams {
  std::vector<int> base_indices;
  std::vector<int> enh_indices;
};
ScalableDpcmStreams scalable_dpcm_encode(std::span<const double> obs,
                                         const ScalableDpcm& codec);
std::vector<double> scalable_dpcm_decode_base(std::span<const int> base_indices,
                                              const ScalableDpcm& codec);
std::vector<double> scalable_dpcm_decode_enh(std::span<const int> base_indices,
                                             std::span<const int> enh_indices,
                                             const ScalableDpcm& codec);

}  // namespace hmsq
