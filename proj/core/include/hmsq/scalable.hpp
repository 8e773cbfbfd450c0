#pragma once

#include <span>
#include <vector>

#include "hmsq/tracking.hpp"

namespace hmsq {

// Two-layer codec: a tracking-codec base layer plus an enhancement layer that
// refines each sample inside its base quantization cell. The enhancement
// layer keeps its own belief (driven by the finer enhancement cells) and
// designs a fresh codebook per sample from a uniform init — no trained bank.
// delay_window = L lets the enhancement belief condition on the base cells of
// the current and the next L-1 samples (decoded with L samples of latency).
struct ScalableSystem {
  CodecSystem base;
  int enh_rate_bits = 0;
  int delay_window = 0;
  int enh_online_lloyd_iters = 1;
  double clip_sigma = 6.0;

  int enh_levels() const { return 1 << enh_rate_bits; }
  void validate() const;
};

// Finite design interval: infinite ends of a base cell are clipped at the
// belief-mixture mean ± clip_sigma standard deviations (shifted inward when
// the whole cell lies beyond the clip point).
Interval clip_cell(const Interval& base_cell, const MixturePdf& mixture, double clip_sigma);

// Per-sample enhancement codebook: uniform init on the clipped base cell,
// then online Lloyd passes against the belief-weighted per-component
// truncation of the emission mixture.
Codebook enh_adapt_codebook(const StateBelief& enh_belief, const Interval& base_cell,
                            const ScalableSystem& system);

// Belief for the sample at the window's start, given the running predictive
// enhancement belief and the base cells of times t..t+window-1. An empty
// window returns the predictive belief unchanged; otherwise the first base
// cell enters a Bayes step (forward) and the remaining cells a backward
// product.
StateBelief delayed_enh_belief(const StateBelief& enh_predictive,
                               std::span<const Interval> base_cells_window,
                               const CodecSystem& base);

// Convenience form: derives the predictive belief from the enhancement-cell
// history first (used by tests against brute-force enumeration).
StateBelief delayed_enh_belief(std::span<const Interval> enh_history_cells,
                               std::span<const Interval> base_cells_window,
                               const CodecSystem& base);

struct ScalableStreams {
  std::vector<int> base_indices;
  std::vector<int> enh_indices;
};

ScalableStreams encode_scalable(std::span<const double> obs, const ScalableSystem& system,
                                CodedTrace* base_trace = nullptr,
                                CodedTrace* enh_trace = nullptr);

std::vector<double> decode_base(std::span<const int> base_indices,
                                const ScalableSystem& system);

std::vector<double> decode_enh(std::span<const int> base_indices,
                               std::span<const int> enh_indices, const ScalableSystem& system,
                               CodedTrace* enh_trace = nullptr);

// The per-sample quantization cells a base-layer index sequence implies
// (replays the base tracking recursion).
std::vector<Interval> base_cells_from_indices(std::span<const int> base_indices,
                                              const CodecSystem& base);

}  // namespace hmsq
