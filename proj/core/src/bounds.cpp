#include "hmsq/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hmsq/gauss.hpp"
#include "hmsq/quantizer.hpp"
#include "hmsq/rng.hpp"
#include "hmsq/tracking.hpp"

namespace hmsq {

double bound_switched(const HmmModel& model, int rate_bits, int restarts, std::uint64_t seed) {
  model.validate();
  if (!model.is_gaussian())
    throw std::invalid_argument("bound_switched: requires Gaussian emissions");
  const std::vector<double> rho = stationary_distribution(model);

  double bound = 0.0;
  for (int m = 0; m < model.n_states; ++m) {
    const MixturePdf pdf =
        belief_mixture(StateBelief::normalized(model.transition[m]), model);
    LloydOptions opts;
    // Mass migration between well-separated modes converges very slowly at
    // high rates; a loose cap would overstate the bound by up to a dB.
    opts.max_iters = 20000;
    opts.tol = 1e-14;
    opts.restarts = restarts;
    opts.seed = Rng::mix(seed, 0x62647377 + m);
    const Codebook cb = lloyd_design(pdf, 1 << rate_bits, opts);
    bound += rho[m] * expected_distortion(pdf, cb);
  }
  return bound;
}

namespace {

// Two-state beliefs live on a segment, so converged designs can be cached on
// a fine grid of the first state's probability and warm-started from the
// nearest already-solved grid point. The belief recursion itself stays exact;
// only the codebook lookup is snapped to the grid (step ~2.4e-4, far below
// Monte Carlo resolution).
class TwoStateDesignCache {
 public:
  TwoStateDesignCache(const HmmModel& model, int cells) : model_(model), cells_(cells) {}

  const Codebook& at(double p0) {
    const int g = static_cast<int>(std::lround(p0 * kGrid));
    const std::size_t idx = static_cast<std::size_t>(std::clamp(g, 0, kGrid));
    if (books_[idx]) return *books_[idx];

    const MixturePdf pdf =
        belief_mixture(StateBelief{{idx / double(kGrid), 1.0 - idx / double(kGrid)}}, model_);
    Codebook cb;
    if (const Codebook* warm = nearest(idx)) {
      // From a neighbouring grid point's book only a sliver of mass needs to
      // move, so a loose stop suffices: the leftover suboptimality is
      // ~tol * D / (1 - contraction rate), microdecibels at 1e-7 even where
      // the contraction is slow.
      cb = lloyd_converge(pdf, *warm, 2000, 1e-7);
    } else {
      LloydOptions opts;
      opts.max_iters = 20000;
      opts.tol = 1e-14;
      opts.restarts = 3;
      opts.seed = Rng::mix(0, 0x62646368);
      cb = lloyd_design(pdf, cells_, opts);
    }
    books_[idx] = std::move(cb);
    return *books_[idx];
  }

 private:
  const Codebook* nearest(std::size_t idx) const {
    for (int d = 1; d <= kGrid; ++d) {
      if (idx >= static_cast<std::size_t>(d) && books_[idx - d]) return &*books_[idx - d];
      if (idx + d <= static_cast<std::size_t>(kGrid) && books_[idx + d]) return &*books_[idx + d];
    }
    return nullptr;
  }

  static constexpr int kGrid = 4096;
  const HmmModel& model_;
  int cells_;
  std::vector<std::optional<Codebook>> books_{kGrid + 1};
};

}  // namespace

double bound_clean_history(const HmmModel& model, int rate_bits,
                           std::span<const double> eval_obs) {
  model.validate();
  if (!model.is_gaussian())
    throw std::invalid_argument("bound_clean_history: requires Gaussian emissions");
  if (eval_obs.empty())
    throw std::invalid_argument("bound_clean_history: empty evaluation sequence");
  const auto& g = model.gaussian();

  StateBelief belief = StateBelief::normalized(model.initial);
  const int cells = 1 << rate_bits;

  std::optional<TwoStateDesignCache> cache;
  Codebook cb;
  if (model.n_states == 2) {
    cache.emplace(model, cells);
  } else {
    LloydOptions opts;
    opts.restarts = 3;
    opts.seed = Rng::mix(0, 0x62646368);
    cb = lloyd_design(belief_mixture(belief, model), cells, opts);
  }

  double acc = 0.0;
  std::vector<double> lik(model.n_states);
  for (std::size_t t = 0; t < eval_obs.size(); ++t) {
    if (cache == std::nullopt && t > 0) {
      // Beliefs drift slowly, so the previous sample's converged codebook is
      // a warm start a few Lloyd passes away from the new optimum.
      cb = lloyd_converge(belief_mixture(belief, model), std::move(cb), 200);
    }
    const Codebook& book = cache ? cache->at(belief[0]) : cb;
    const double x = eval_obs[t];
    const double err = x - book.reps[book.quantize(x)];
    acc += err * err;

    for (int j = 0; j < model.n_states; ++j)
      lik[j] = std::max(std::exp(gauss_logpdf(x, g.means[j], g.vars[j])), 1e-300);
    belief = predict_belief(bayes_update(belief, lik), model);
  }
  return acc / eval_obs.size();
}

}  // namespace hmsq
