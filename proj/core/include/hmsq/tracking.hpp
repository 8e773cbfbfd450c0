#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmsq/hmm.hpp"
#include "hmsq/quantizer.hpp"

namespace hmsq {

// A trained adaptive codec: T representative beliefs, each with a Lloyd
// codebook, plus the codebook used for the very first sample (designed for
// the initial-distribution mixture). The per-sample codebook is produced by
// one online Lloyd pass from the nearest class codebook.
struct CodecSystem {
  HmmModel model;
  int rate_bits = 0;
  int n_classes = 0;
  std::vector<StateBelief> class_reps;
  std::vector<Codebook> class_codebooks;
  Codebook initial_codebook;
  int online_lloyd_iters = 1;

  int levels() const { return 1 << rate_bits; }
  void validate() const;
};

// Source distribution implied by a belief: mixture of the per-state emission
// Gaussians weighted by the belief, on the full line.
MixturePdf belief_mixture(const StateBelief& belief, const HmmModel& model);

// P[x in cell | state j] for every j, clamped away from zero so a far-tail
// cell cannot zero out the whole belief.
std::vector<double> cell_likelihoods(const HmmModel& model, const Interval& cell);

// Nearest class representative by squared Euclidean distance; ties go to the
// lowest index.
int select_class(const StateBelief& belief, const CodecSystem& system);

// Codebook for the current belief: online Lloyd passes on the belief mixture,
// initialized from the selected class codebook.
Codebook adapt_codebook(const StateBelief& belief, const CodecSystem& system);

// Belief step after transmitting a cell: Bayes with the exact cell
// probability per state, then one transition step (the next predictive
// belief).
StateBelief update_belief(const StateBelief& belief, const Interval& cell,
                          const CodecSystem& system);

// Streaming coder state. Encoder and decoder both drive this class through
// the same member calls, so their beliefs and codebooks are bit-identical.
class TrackingCoder {
 public:
  explicit TrackingCoder(const CodecSystem& system);

  int encode_sample(double x);
  double decode_index(int index);

  // Shared post-sample step: belief update from the transmitted cell, then
  // codebook adaptation.
  void advance(const Interval& cell);

  const Codebook& codebook() const { return codebook_; }
  const StateBelief& belief() const { return belief_; }  // predictive, next sample

 private:
  const CodecSystem* system_;
  StateBelief belief_;
  Codebook codebook_;
};

// Optional per-sample introspection (beliefs are the predictive beliefs in
// effect when each sample was coded).
struct CodedTrace {
  std::vector<StateBelief> beliefs;
  std::vector<double> recons;
};

std::vector<int> encode(std::span<const double> obs, const CodecSystem& system,
                        CodedTrace* trace = nullptr);
std::vector<double> decode(std::span<const int> indices, const CodecSystem& system,
                           CodedTrace* trace = nullptr);

struct TrainOptions {
  std::size_t train_len = 50000;
  int em_rounds = 10;
  double tol_db = 0.01;       // stop when a round improves less than this
  double p_loss = 0.0;        // train on loss-aware encoder beliefs
  int lloyd_restarts = 3;     // per-class codebook design restarts
  int online_lloyd_iters = 1;
};

struct TrainingLog {
  std::vector<double> round_distortion_db;
  int final_classes = 0;
  std::vector<std::string> warnings;
};

// Iterative system design: collect predictive beliefs (first open-loop from
// the raw observations, then closed-loop through the candidate codec),
// cluster them into classes, Lloyd-design one codebook per class, repeat
// until the training distortion stops improving. Returns the best round.
// The first form samples opts.train_len observations from the model; the
// second trains on a given sequence (seed then only drives the clustering and
// codebook-design restarts).
CodecSystem train_system(const HmmModel& model, int rate_bits, int n_classes,
                         std::uint64_t seed, const TrainOptions& opts = {},
                         TrainingLog* log = nullptr);
CodecSystem train_system(const HmmModel& model, int rate_bits, int n_classes,
                         std::span<const double> train_obs, std::uint64_t seed,
                         const TrainOptions& opts = {}, TrainingLog* log = nullptr);

}  // namespace hmsq
