#include "hmsq/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hmsq/gauss.hpp"
#include "hmsq/kmeans.hpp"
#include "hmsq/loss.hpp"
#include "hmsq/rng.hpp"

namespace hmsq {

namespace {

constexpr double kLikelihoodFloor = 1e-300;

double to_db(double mse) { return 10.0 * std::log10(std::max(mse, 1e-300)); }

}  // namespace

void CodecSystem::validate() const {
  model.validate();
  if (!model.is_gaussian())
    throw std::invalid_argument("CodecSystem: requires Gaussian emissions");
  if (rate_bits < 0 || rate_bits > 16)
    throw std::invalid_argument("CodecSystem: rate_bits outside 0..16");
  if (n_classes < 1) throw std::invalid_argument("CodecSystem: need at least one class");
  if (static_cast<int>(class_reps.size()) != n_classes ||
      static_cast<int>(class_codebooks.size()) != n_classes)
    throw std::invalid_argument("CodecSystem: class count mismatch");
  for (const auto& rep : class_reps)
    if (static_cast<int>(rep.size()) != model.n_states)
      throw std::invalid_argument("CodecSystem: class representative dimension mismatch");
  for (const auto& cb : class_codebooks) {
    cb.validate();
    if (cb.size() != levels())
      throw std::invalid_argument("CodecSystem: class codebook size must be 2^rate_bits");
  }
  initial_codebook.validate();
  if (initial_codebook.size() != levels())
    throw std::invalid_argument("CodecSystem: initial codebook size must be 2^rate_bits");
  if (online_lloyd_iters < 0)
    throw std::invalid_argument("CodecSystem: negative online Lloyd iterations");
}

MixturePdf belief_mixture(const StateBelief& belief, const HmmModel& model) {
  if (static_cast<int>(belief.size()) != model.n_states)
    throw std::invalid_argument("belief_mixture: belief dimension mismatch");
  const auto& g = model.gaussian();
  std::vector<GaussComponent> comps(model.n_states);
  for (int j = 0; j < model.n_states; ++j)
    comps[j] = GaussComponent{belief[j], g.means[j], g.vars[j]};
  return MixturePdf::full(std::move(comps));
}

std::vector<double> cell_likelihoods(const HmmModel& model, const Interval& cell) {
  const auto& g = model.gaussian();
  std::vector<double> out(model.n_states);
  for (int j = 0; j < model.n_states; ++j)
    out[j] = std::max(gauss_interval_mass(g.means[j], g.vars[j], cell.lo, cell.hi),
                      kLikelihoodFloor);
  return out;
}

int select_class(const StateBelief& belief, const CodecSystem& system) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int n = 0; n < system.n_classes; ++n) {
    double d = 0.0;
    for (std::size_t i = 0; i < belief.size(); ++i) {
      const double diff = belief[i] - system.class_reps[n][i];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

Codebook adapt_codebook(const StateBelief& belief, const CodecSystem& system) {
  const int cls = select_class(belief, system);
  const MixturePdf pdf = belief_mixture(belief, system.model);
  return lloyd_iterate(pdf, system.class_codebooks[cls], system.online_lloyd_iters);
}

StateBelief update_belief(const StateBelief& belief, const Interval& cell,
                          const CodecSystem& system) {
  const StateBelief posterior = bayes_update(belief, cell_likelihoods(system.model, cell));
  return predict_belief(posterior, system.model);
}

TrackingCoder::TrackingCoder(const CodecSystem& system) : system_(&system) {
  system.validate();
  belief_ = StateBelief::normalized(system.model.initial);
  codebook_ = system.initial_codebook;
}

void TrackingCoder::advance(const Interval& cell) {
  belief_ = update_belief(belief_, cell, *system_);
  codebook_ = adapt_codebook(belief_, *system_);
}

int TrackingCoder::encode_sample(double x) {
  const int index = codebook_.quantize(x);
  advance(codebook_.cell_interval(index));
  return index;
}

double TrackingCoder::decode_index(int index) {
  const double recon = codebook_.dequantize(index);
  advance(codebook_.cell_interval(index));
  return recon;
}

std::vector<int> encode(std::span<const double> obs, const CodecSystem& system,
                        CodedTrace* trace) {
  TrackingCoder coder(system);
  std::vector<int> indices(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (trace) {
      trace->beliefs.push_back(coder.belief());
      trace->recons.push_back(0.0);  // filled below with the encoder-side recon
    }
    const double recon = coder.codebook().dequantize(coder.codebook().quantize(obs[t]));
    indices[t] = coder.encode_sample(obs[t]);
    if (trace) trace->recons.back() = recon;
  }
  return indices;
}

std::vector<double> decode(std::span<const int> indices, const CodecSystem& system,
                           CodedTrace* trace) {
  TrackingCoder coder(system);
  std::vector<double> recons(indices.size());
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (indices[t] < 0 || indices[t] >= system.levels())
      throw std::out_of_range("decode: index outside codebook");
    if (trace) trace->beliefs.push_back(coder.belief());
    recons[t] = coder.decode_index(indices[t]);
    if (trace) trace->recons.push_back(recons[t]);
  }
  return recons;
}

namespace {

// Belief step from an unquantized observation (training's first pass): Bayes
// with the emission densities instead of cell masses, same loss mixture as
// the coder.
StateBelief open_loop_step(const StateBelief& belief, double x, double p_loss,
                           const HmmModel& model) {
  const auto& g = model.gaussian();
  std::vector<double> lik(model.n_states);
  for (int j = 0; j < model.n_states; ++j)
    lik[j] = std::max(std::exp(gauss_logpdf(x, g.means[j], g.vars[j])), kLikelihoodFloor);
  const StateBelief no_loss = predict_belief(bayes_update(belief, lik), model);
  if (p_loss <= 0.0) return no_loss;
  const StateBelief with_loss = predict_belief(belief, model);
  std::vector<double> mixed(belief.size());
  for (std::size_t i = 0; i < mixed.size(); ++i)
    mixed[i] = (1.0 - p_loss) * no_loss[i] + p_loss * with_loss[i];
  return StateBelief::normalized(std::move(mixed));
}

struct ClosedLoopResult {
  std::vector<std::vector<double>> beliefs;
  double distortion = 0.0;
};

// Run the candidate codec over the training data, recording the predictive
// belief in effect at each sample and the encoder-side squared error.
ClosedLoopResult closed_loop_pass(const CodecSystem& system, std::span<const double> obs,
                                  double p_loss) {
  ClosedLoopResult out;
  out.beliefs.reserve(obs.size());
  StateBelief belief = StateBelief::normalized(system.model.initial);
  Codebook cb = system.initial_codebook;
  double acc = 0.0;
  for (double x : obs) {
    out.beliefs.push_back(belief.probs);
    const int idx = cb.quantize(x);
    const double err = x - cb.reps[idx];
    acc += err * err;
    belief = lossy_update_encoder(belief, cb.cell_interval(idx), p_loss, system);
    cb = adapt_codebook(belief, system);
  }
  out.distortion = acc / obs.size();
  return out;
}

// Cluster beliefs into at most n_classes representatives; near-duplicate
// centers collapse (the i.i.d. limit leaves a single usable class).
std::vector<StateBelief> cluster_beliefs(const std::vector<std::vector<double>>& beliefs,
                                         int n_classes, std::uint64_t seed,
                                         TrainingLog* log) {
  const KmeansResult km = kmeans(beliefs, n_classes, seed);
  std::vector<StateBelief> reps;
  for (const auto& center : km.centers) {
    bool duplicate = false;
    for (const auto& kept : reps)
      if (squared_distance(kept.probs, center) < 1e-12) {
        duplicate = true;
        break;
      }
    if (!duplicate) reps.push_back(StateBelief::normalized(center));
  }
  if (log && static_cast<int>(reps.size()) < n_classes) {
    log->warnings.push_back("class count reduced to " + std::to_string(reps.size()) +
                            " (duplicate belief representatives)");
  }
  return reps;
}

}  // namespace

CodecSystem train_system(const HmmModel& model, int rate_bits, int n_classes,
                         std::uint64_t seed, const TrainOptions& opts, TrainingLog* log) {
  model.validate();
  const SampledPath path = sample(model, opts.train_len, Rng::mix(seed, 0x7472616e));
  return train_system(model, rate_bits, n_classes, path.observations, seed, opts, log);
}

CodecSystem train_system(const HmmModel& model, int rate_bits, int n_classes,
                         std::span<const double> obs, std::uint64_t seed,
                         const TrainOptions& opts, TrainingLog* log) {
  model.validate();
  if (!model.is_gaussian())
    throw std::invalid_argument("train_system: requires Gaussian emissions");
  if (n_classes < 1) throw std::invalid_argument("train_system: need at least one class");
  if (obs.size() < static_cast<std::size_t>(n_classes) * (1u << rate_bits))
    throw std::invalid_argument("train_system: training length too small for the bank size");
  if (opts.p_loss < 0.0 || opts.p_loss > 1.0)
    throw std::invalid_argument("train_system: p_loss outside [0, 1]");

  CodecSystem system;
  system.model = model;
  system.rate_bits = rate_bits;
  system.online_lloyd_iters = opts.online_lloyd_iters;
  // Bank designs must be driven to convergence: between well-separated modes
  // mass migrates one cell per pass, and the default cap leaves high-rate
  // books a sizable fraction of a dB short.
  LloydOptions bank_opts;
  bank_opts.max_iters = 5000;
  bank_opts.tol = 1e-13;
  bank_opts.restarts = opts.lloyd_restarts;
  {
    LloydOptions lo = bank_opts;
    lo.seed = Rng::mix(seed, 0x696e6974);
    system.initial_codebook =
        lloyd_design(belief_mixture(StateBelief::normalized(model.initial), model),
                     1 << rate_bits, lo);
  }

  // Pass 0: beliefs from the raw observations (no codec yet).
  std::vector<std::vector<double>> beliefs;
  beliefs.reserve(obs.size());
  {
    StateBelief belief = StateBelief::normalized(model.initial);
    for (double x : obs) {
      beliefs.push_back(belief.probs);
      belief = open_loop_step(belief, x, opts.p_loss, model);
    }
  }

  CodecSystem best;
  double best_mse = std::numeric_limits<double>::infinity();
  double prev_db = std::numeric_limits<double>::infinity();
  for (int round = 0; round < opts.em_rounds; ++round) {
    system.class_reps = cluster_beliefs(beliefs, n_classes,
                                        Rng::mix(seed, 0x6b6d0000 + round), log);
    system.n_classes = static_cast<int>(system.class_reps.size());
    system.class_codebooks.clear();
    system.class_codebooks.reserve(system.n_classes);
    for (int c = 0; c < system.n_classes; ++c) {
      LloydOptions lo = bank_opts;
      lo.seed = Rng::mix(seed, 0x636c0000 + (round << 8) + c);
      system.class_codebooks.push_back(
          lloyd_design(belief_mixture(system.class_reps[c], model), 1 << rate_bits, lo));
    }

    ClosedLoopResult pass = closed_loop_pass(system, obs, opts.p_loss);
    const double round_db = to_db(pass.distortion);
    if (std::isfinite(prev_db) && round_db > prev_db + 0.005) {
      // A worse bank than last round: keep the best one found and stop.
      if (log) log->warnings.push_back("training stopped on a non-improving round");
      break;
    }
    if (log) log->round_distortion_db.push_back(round_db);
    if (pass.distortion < best_mse) {
      best_mse = pass.distortion;
      best = system;
    }
    if (std::isfinite(prev_db) && prev_db - round_db < opts.tol_db) break;
    prev_db = round_db;
    beliefs = std::move(pass.beliefs);
  }

  if (log) log->final_classes = best.n_classes;
  best.validate();
  return best;
}

}  // namespace hmsq
