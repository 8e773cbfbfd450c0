#include "hmsq/scalable.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmsq {

void ScalableSystem::validate() const {
  base.validate();
  if (enh_rate_bits < 1 || enh_rate_bits > 16)
    throw std::invalid_argument("ScalableSystem: enhancement rate outside 1..16");
  if (delay_window < 0) throw std::invalid_argument("ScalableSystem: negative delay window");
  if (enh_online_lloyd_iters < 0)
    throw std::invalid_argument("ScalableSystem: negative online Lloyd iterations");
  if (!(clip_sigma > 0.0))
    throw std::invalid_argument("ScalableSystem: clip_sigma must be positive");
}

Interval clip_cell(const Interval& base_cell, const MixturePdf& mixture, double clip_sigma) {
  if (!(base_cell.lo < base_cell.hi))
    throw std::invalid_argument("clip_cell: empty base cell");
  Interval out = base_cell;
  const bool lo_inf = !std::isfinite(out.lo);
  const bool hi_inf = !std::isfinite(out.hi);
  if (!lo_inf && !hi_inf) return out;

  const double mean = mixture.mean();
  const double sd = std::sqrt(std::max(mixture.variance(), 1e-12));
  const double reach = clip_sigma * sd;
  if (lo_inf) out.lo = mean - reach;
  if (hi_inf) out.hi = mean + reach;
  // A cell entirely beyond the clip point keeps its finite end and extends
  // one reach inward from it.
  if (!(out.lo < out.hi)) {
    if (lo_inf && !hi_inf) out.lo = out.hi - reach;
    else if (hi_inf && !lo_inf) out.hi = out.lo + reach;
    else throw std::logic_error("clip_cell: degenerate clip");
  }
  return out;
}

namespace {

Interval intersect(const Interval& a, const Interval& b) {
  return Interval{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

}  // namespace

Codebook enh_adapt_codebook(const StateBelief& enh_belief, const Interval& base_cell,
                            const ScalableSystem& system) {
  const HmmModel& model = system.base.model;
  if (static_cast<int>(enh_belief.size()) != model.n_states)
    throw std::invalid_argument("enh_adapt_codebook: belief dimension mismatch");

  const MixturePdf design_mixture = belief_mixture(enh_belief, model);
  const Interval cell = clip_cell(base_cell, design_mixture, system.clip_sigma);
  const Codebook init = uniform_codebook(system.enh_levels(), cell.lo, cell.hi);

  const auto& g = model.gaussian();
  std::vector<GaussComponent> comps(model.n_states);
  for (int j = 0; j < model.n_states; ++j)
    comps[j] = GaussComponent{enh_belief[j], g.means[j], g.vars[j]};
  try {
    const MixturePdf pdf = MixturePdf::truncated_per_component(std::move(comps), cell.lo, cell.hi);
    return lloyd_iterate(pdf, init, system.enh_online_lloyd_iters);
  } catch (const std::invalid_argument&) {
    // The whole mixture underflows on a far-tail cell; the uniform codebook
    // is the deterministic fallback on a region of vanishing probability.
    return init;
  }
}

StateBelief delayed_enh_belief(const StateBelief& enh_predictive,
                               std::span<const Interval> base_cells_window,
                               const CodecSystem& base) {
  if (base_cells_window.empty()) return enh_predictive;

  // Forward: fold the window's first base cell into the predictive belief.
  const StateBelief alpha =
      bayes_update(enh_predictive, cell_likelihoods(base.model, base_cells_window[0]));
  if (base_cells_window.size() == 1) return alpha;

  // Backward over the remaining future base cells, normalized per step.
  const int n = base.model.n_states;
  std::vector<double> beta(n, 1.0);
  for (std::size_t s = base_cells_window.size(); s-- > 1;) {
    const std::vector<double> lik = cell_likelihoods(base.model, base_cells_window[s]);
    std::vector<double> next(n, 0.0);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) next[i] += base.model.transition[i][j] * lik[j] * beta[j];
      total += next[i];
    }
    if (!(total > 0.0)) throw std::runtime_error("delayed_enh_belief: vanishing mass");
    for (int i = 0; i < n; ++i) next[i] /= total;
    beta = std::move(next);
  }

  std::vector<double> posterior(n);
  for (int i = 0; i < n; ++i) posterior[i] = alpha[i] * beta[i];
  return StateBelief::normalized(std::move(posterior));
}

StateBelief delayed_enh_belief(std::span<const Interval> enh_history_cells,
                               std::span<const Interval> base_cells_window,
                               const CodecSystem& base) {
  StateBelief belief = StateBelief::normalized(base.model.initial);
  for (const Interval& cell : enh_history_cells) belief = update_belief(belief, cell, base);
  return delayed_enh_belief(belief, base_cells_window, base);
}

std::vector<Interval> base_cells_from_indices(std::span<const int> base_indices,
                                              const CodecSystem& base) {
  TrackingCoder coder(base);
  std::vector<Interval> cells(base_indices.size());
  for (std::size_t t = 0; t < base_indices.size(); ++t) {
    if (base_indices[t] < 0 || base_indices[t] >= base.levels())
      throw std::out_of_range("base_cells_from_indices: index outside codebook");
    cells[t] = coder.codebook().cell_interval(base_indices[t]);
    coder.advance(cells[t]);
  }
  return cells;
}

namespace {

// Enhancement-layer recursion shared verbatim by encoder and decoder. The
// caller supplies either the sample (encoder quantizes) or the index
// (decoder); everything else is identical arithmetic on both sides.
class EnhancementPass {
 public:
  EnhancementPass(const ScalableSystem& system, std::span<const Interval> base_cells)
      : system_(system),
        base_cells_(base_cells),
        belief_(StateBelief::normalized(system.base.model.initial)) {}

  Codebook codebook_at(std::size_t t) const {
    const std::size_t window =
        std::min<std::size_t>(system_.delay_window, base_cells_.size() - t);
    const StateBelief design =
        delayed_enh_belief(belief_, base_cells_.subspan(t, window), system_.base);
    return enh_adapt_codebook(design, base_cells_[t], system_);
  }

  // Advance past sample t given its enhancement index under `cb`.
  double step(std::size_t t, const Codebook& cb, int index) {
    const double recon = cb.dequantize(index);
    const Interval enh_cell = intersect(cb.cell_interval(index), base_cells_[t]);
    belief_ = update_belief(belief_, enh_cell, system_.base);
    return recon;
  }

  const StateBelief& belief() const { return belief_; }

 private:
  const ScalableSystem& system_;
  std::span<const Interval> base_cells_;
  StateBelief belief_;
};

}  // namespace

ScalableStreams encode_scalable(std::span<const double> obs, const ScalableSystem& system,
                                CodedTrace* base_trace, CodedTrace* enh_trace) {
  system.validate();
  ScalableStreams streams;
  streams.base_indices = encode(obs, system.base, base_trace);
  const std::vector<Interval> base_cells =
      base_cells_from_indices(streams.base_indices, system.base);

  EnhancementPass pass(system, base_cells);
  streams.enh_indices.resize(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const Codebook cb = pass.codebook_at(t);
    const int index = cb.quantize(obs[t]);
    streams.enh_indices[t] = index;
    if (enh_trace) enh_trace->beliefs.push_back(pass.belief());
    const double recon = pass.step(t, cb, index);
    if (enh_trace) enh_trace->recons.push_back(recon);
  }
  return streams;
}

std::vector<double> decode_base(std::span<const int> base_indices,
                                const ScalableSystem& system) {
  system.validate();
  return decode(base_indices, system.base);
}

std::vector<double> decode_enh(std::span<const int> base_indices,
                               std::span<const int> enh_indices, const ScalableSystem& system,
                               CodedTrace* enh_trace) {
  system.validate();
  if (base_indices.size() != enh_indices.size())
    throw std::invalid_argument("decode_enh: layer length mismatch");
  const std::vector<Interval> base_cells = base_cells_from_indices(base_indices, system.base);

  EnhancementPass pass(system, base_cells);
  std::vector<double> recons(enh_indices.size());
  for (std::size_t t = 0; t < enh_indices.size(); ++t) {
    if (enh_indices[t] < 0 || enh_indices[t] >= system.enh_levels())
      throw std::out_of_range("decode_enh: index outside codebook");
    const Codebook cb = pass.codebook_at(t);
    if (enh_trace) enh_trace->beliefs.push_back(pass.belief());
    recons[t] = pass.step(t, cb, enh_indices[t]);
    if (enh_trace) enh_trace->recons.push_back(recons[t]);
  }
  return recons;
}

}  // namespace hmsq
