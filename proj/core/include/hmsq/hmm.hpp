#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace hmsq {

using Matrix = std::vector<std::vector<double>>;

struct GaussianEmissions {
  std::vector<double> means;
  std::vector<double> vars;
};

// Row-stochastic N x M symbol probabilities.
struct DiscreteEmissions {
  Matrix probs;
};

// Markov chain observed through a memoryless emission channel.
// transition[i][j] = P[q_{t+1} = j | q_t = i].
struct HmmModel {
  int n_states = 0;
  Matrix transition;
  std::vector<double> initial;
  std::variant<GaussianEmissions, DiscreteEmissions> emissions;

  bool is_gaussian() const { return std::holds_alternative<GaussianEmissions>(emissions); }
  const GaussianEmissions& gaussian() const { return std::get<GaussianEmissions>(emissions); }
  const DiscreteEmissions& discrete() const { return std::get<DiscreteEmissions>(emissions); }

  // Throws std::invalid_argument when stochasticity or positivity constraints
  // are violated (rows of A and pi must sum to 1 within 1e-12, variances > 0).
  void validate() const;
};

// Probability vector over the chain's states. Kept normalized after every
// update; `normalized` rescales and rejects negative or all-zero input.
struct StateBelief {
  std::vector<double> probs;

  static StateBelief normalized(std::vector<double> p);
  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

struct ForwardState {
  std::vector<double> scaled_alpha;     // alpha_t / sum_i alpha_t(i)
  double log_likelihood_accum = 0.0;    // sum of log scaling factors up to t
};

struct ForwardResult {
  std::vector<ForwardState> steps;
  double log_likelihood = 0.0;
};

struct BackwardResult {
  // scaled_beta[t] * exp(log_scale[t]) reconstructs the exact beta_t vector.
  std::vector<std::vector<double>> scaled_beta;
  std::vector<double> log_scale;
  double log_likelihood = 0.0;  // recomputed from beta for cross-checks
};

ForwardResult forward(const HmmModel& model, std::span<const double> obs);
ForwardResult forward(const HmmModel& model, std::span<const int> obs);

BackwardResult backward(const HmmModel& model, std::span<const double> obs);
BackwardResult backward(const HmmModel& model, std::span<const int> obs);

// Exact smoothing posteriors gamma_t(i) = P[q_t = i | O_{1..T}].
std::vector<StateBelief> gamma(const HmmModel& model, std::span<const double> obs);
std::vector<StateBelief> gamma(const HmmModel& model, std::span<const int> obs);

// One-step-ahead predictive belief: out_i = sum_j posterior_j * a_{ji}.
StateBelief predict_belief(const StateBelief& posterior, const HmmModel& model);

// Filtered posterior -> Bayes update of a predictive belief with per-state
// likelihoods (not necessarily normalized). Throws if all products vanish.
StateBelief bayes_update(const StateBelief& prior, std::span<const double> likelihoods);

struct FitOptions {
  int max_iters = 100;
  double tol = 1e-6;     // relative log-likelihood improvement
  int restarts = 3;      // retries with perturbed init on degenerate states
};

HmmModel fit_gaussian(std::span<const double> obs, int n_states, std::uint64_t seed,
                      const FitOptions& opts = {});
HmmModel fit_discrete(std::span<const int> obs, int n_states, int n_symbols, std::uint64_t seed,
                      const FitOptions& opts = {});

// Per-iteration log-likelihood trace of the most recent fit, for convergence
// diagnostics in tests and the CLI.
struct FitResult {
  HmmModel model;
  std::vector<double> log_likelihoods;
};
FitResult fit_gaussian_traced(std::span<const double> obs, int n_states, std::uint64_t seed,
                              const FitOptions& opts = {});
FitResult fit_discrete_traced(std::span<const int> obs, int n_states, int n_symbols,
                              std::uint64_t seed, const FitOptions& opts = {});

struct SampledPath {
  std::vector<int> states;
  std::vector<double> observations;
};
SampledPath sample(const HmmModel& model, std::size_t length, std::uint64_t seed);

struct SampledSymbols {
  std::vector<int> states;
  std::vector<int> observations;
};
SampledSymbols sample_symbols(const HmmModel& model, std::size_t length, std::uint64_t seed);

// Unique stationary distribution of an irreducible transition matrix; throws
// std::runtime_error on reducible chains.
std::vector<double> stationary_distribution(const HmmModel& model);

// Convenience constructor for the two-state symmetric Gaussian source used
// throughout the experiments: means -mu/+mu, unit-free variances, switch
// probability p, stationary initial distribution.
HmmModel make_two_state_source(double mean1, double mean2, double var1, double var2,
                               double switch_prob);

}  // namespace hmsq
