#include "hmsq/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "hmsq/gauss.hpp"
#include "hmsq/kmeans.hpp"
#include "hmsq/rng.hpp"

namespace hmsq {

namespace {

// Densities are clamped away from zero so a single outlier cannot zero out an
// entire forward step.
constexpr double kDensityFloor = 1e-300;
constexpr double kVarianceFloor = 1e-6;
constexpr double kStochasticTol = 1e-12;

void check_stochastic_row(const std::vector<double>& row, const char* what) {
  double total = 0.0;
  for (double v : row) {
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kStochasticTol)
    throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
}

// Emission likelihood column b_i(o_t) for every state, clamped at the floor.
std::vector<double> emission_likelihoods(const HmmModel& model, double x) {
  const auto& g = model.gaussian();
  std::vector<double> out(model.n_states);
  for (int i = 0; i < model.n_states; ++i)
    out[i] = std::max(std::exp(gauss_logpdf(x, g.means[i], g.vars[i])), kDensityFloor);
  return out;
}

std::vector<double> emission_likelihoods(const HmmModel& model, int symbol) {
  const auto& d = model.discrete();
  if (symbol < 0 || symbol >= static_cast<int>(d.probs[0].size()))
    throw std::out_of_range("hmm: symbol outside emission alphabet");
  std::vector<double> out(model.n_states);
  for (int i = 0; i < model.n_states; ++i)
    out[i] = std::max(d.probs[i][symbol], kDensityFloor);
  return out;
}

template <typename Obs>
ForwardResult forward_impl(const HmmModel& model, std::span<const Obs> obs) {
  model.validate();
  if (obs.empty()) throw std::invalid_argument("forward: empty observation sequence");
  const int n = model.n_states;

  ForwardResult result;
  result.steps.resize(obs.size());
  double log_lik = 0.0;

  std::vector<double> alpha(n);
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const std::vector<double> lik = emission_likelihoods(model, obs[t]);
    if (t == 0) {
      for (int i = 0; i < n; ++i) alpha[i] = model.initial[i] * lik[i];
    } else {
      const auto& prev = result.steps[t - 1].scaled_alpha;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += prev[j] * model.transition[j][i];
        alpha[i] = acc * lik[i];
      }
    }
    double scale = 0.0;
    for (double v : alpha) scale += v;
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw std::runtime_error("forward: vanishing probability mass");
    log_lik += std::log(scale);
    auto& step = result.steps[t];
    step.scaled_alpha.resize(n);
    for (int i = 0; i < n; ++i) step.scaled_alpha[i] = alpha[i] / scale;
    step.log_likelihood_accum = log_lik;
  }
  result.log_likelihood = log_lik;
  return result;
}

template <typename Obs>
BackwardResult backward_impl(const HmmModel& model, std::span<const Obs> obs) {
  model.validate();
  if (obs.empty()) throw std::invalid_argument("backward: empty observation sequence");
  const int n = model.n_states;
  const std::size_t len = obs.size();

  BackwardResult result;
  result.scaled_beta.assign(len, std::vector<double>(n));
  result.log_scale.assign(len, 0.0);

  // beta_T = 1; each stored vector sums to 1 with its scale logged so the
  // exact beta is recoverable as scaled_beta[t] * exp(log_scale[t]).
  for (int i = 0; i < n; ++i) result.scaled_beta[len - 1][i] = 1.0 / n;
  result.log_scale[len - 1] = std::log(static_cast<double>(n));

  std::vector<double> beta(n);
  for (std::size_t t = len - 1; t-- > 0;) {
    const std::vector<double> lik = emission_likelihoods(model, obs[t + 1]);
    const auto& next = result.scaled_beta[t + 1];
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += model.transition[i][j] * lik[j] * next[j];
      beta[i] = acc;
    }
    double scale = 0.0;
    for (double v : beta) scale += v;
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw std::runtime_error("backward: vanishing probability mass");
    for (int i = 0; i < n; ++i) result.scaled_beta[t][i] = beta[i] / scale;
    result.log_scale[t] = result.log_scale[t + 1] + std::log(scale);
  }

  const std::vector<double> first_lik = emission_likelihoods(model, obs[0]);
  double head = 0.0;
  for (int i = 0; i < n; ++i)
    head += model.initial[i] * first_lik[i] * result.scaled_beta[0][i];
  result.log_likelihood = std::log(head) + result.log_scale[0];
  return result;
}

template <typename Obs>
std::vector<StateBelief> gamma_impl(const HmmModel& model, std::span<const Obs> obs) {
  const ForwardResult fwd = forward_impl(model, obs);
  const BackwardResult bwd = backward_impl(model, obs);
  const int n = model.n_states;

  std::vector<StateBelief> out(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i)
      g[i] = fwd.steps[t].scaled_alpha[i] * bwd.scaled_beta[t][i];
    out[t] = StateBelief::normalized(std::move(g));
  }
  return out;
}

}  // namespace

void HmmModel::validate() const {
  if (n_states < 1) throw std::invalid_argument("HmmModel: n_states must be positive");
  if (static_cast<int>(transition.size()) != n_states ||
      static_cast<int>(initial.size()) != n_states)
    throw std::invalid_argument("HmmModel: dimension mismatch");
  for (const auto& row : transition) {
    if (static_cast<int>(row.size()) != n_states)
      throw std::invalid_argument("HmmModel: transition matrix is not square");
    check_stochastic_row(row, "HmmModel transition");
  }
  check_stochastic_row(initial, "HmmModel initial");
  if (is_gaussian()) {
    const auto& g = gaussian();
    if (static_cast<int>(g.means.size()) != n_states ||
        static_cast<int>(g.vars.size()) != n_states)
      throw std::invalid_argument("HmmModel: emission dimension mismatch");
    for (double v : g.vars)
      if (!(v > 0.0)) throw std::invalid_argument("HmmModel: variance must be positive");
  } else {
    const auto& d = discrete();
    if (static_cast<int>(d.probs.size()) != n_states)
      throw std::invalid_argument("HmmModel: emission dimension mismatch");
    const std::size_t m = d.probs[0].size();
    for (const auto& row : d.probs) {
      if (row.size() != m)
        throw std::invalid_argument("HmmModel: ragged emission matrix");
      check_stochastic_row(row, "HmmModel emission");
    }
  }
}

StateBelief StateBelief::normalized(std::vector<double> p) {
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("StateBelief: negative or non-finite probability");
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("StateBelief: zero total mass");
  for (double& v : p) v /= total;
  return StateBelief{std::move(p)};
}

ForwardResult forward(const HmmModel& model, std::span<const double> obs) {
  return forward_impl(model, obs);
}
ForwardResult forward(const HmmModel& model, std::span<const int> obs) {
  return forward_impl(model, obs);
}
BackwardResult backward(const HmmModel& model, std::span<const double> obs) {
  return backward_impl(model, obs);
}
BackwardResult backward(const HmmModel& model, std::span<const int> obs) {
  return backward_impl(model, obs);
}
std::vector<StateBelief> gamma(const HmmModel& model, std::span<const double> obs) {
  return gamma_impl(model, obs);
}
std::vector<StateBelief> gamma(const HmmModel& model, std::span<const int> obs) {
  return gamma_impl(model, obs);
}

StateBelief predict_belief(const StateBelief& posterior, const HmmModel& model) {
  const int n = model.n_states;
  if (static_cast<int>(posterior.size()) != n)
    throw std::invalid_argument("predict_belief: belief size mismatch");
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[i] += posterior[j] * model.transition[j][i];
  return StateBelief::normalized(std::move(out));
}

StateBelief bayes_update(const StateBelief& prior, std::span<const double> likelihoods) {
  if (prior.size() != likelihoods.size())
    throw std::invalid_argument("bayes_update: size mismatch");
  std::vector<double> out(prior.size());
  for (std::size_t i = 0; i < prior.size(); ++i) out[i] = prior[i] * likelihoods[i];
  return StateBelief::normalized(std::move(out));
}

namespace {

struct EmStats {
  Matrix xi_sum;                     // sum_t xi_t(i, j)
  std::vector<double> gamma_sum;     // sum over t < T of gamma_t(i)
  std::vector<double> gamma_sum_all; // sum over all t
  std::vector<double> gamma_first;
  std::vector<std::vector<double>> gammas;  // per t, for emission updates
  double log_likelihood = 0.0;
};

template <typename Obs>
EmStats e_step(const HmmModel& model, std::span<const Obs> obs) {
  const ForwardResult fwd = forward_impl(model, obs);
  const BackwardResult bwd = backward_impl(model, obs);
  const int n = model.n_states;
  const std::size_t len = obs.size();

  EmStats stats;
  stats.xi_sum.assign(n, std::vector<double>(n, 0.0));
  stats.gamma_sum.assign(n, 0.0);
  stats.gamma_sum_all.assign(n, 0.0);
  stats.gammas.assign(len, std::vector<double>(n));
  stats.log_likelihood = fwd.log_likelihood;

  for (std::size_t t = 0; t < len; ++t) {
    double total = 0.0;
    auto& g = stats.gammas[t];
    for (int i = 0; i < n; ++i) {
      g[i] = fwd.steps[t].scaled_alpha[i] * bwd.scaled_beta[t][i];
      total += g[i];
    }
    for (int i = 0; i < n; ++i) {
      g[i] /= total;
      stats.gamma_sum_all[i] += g[i];
      if (t + 1 < len) stats.gamma_sum[i] += g[i];
    }
  }
  stats.gamma_first = stats.gammas[0];

  for (std::size_t t = 0; t + 1 < len; ++t) {
    const std::vector<double> lik = emission_likelihoods(model, obs[t + 1]);
    double total = 0.0;
    Matrix xi(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        xi[i][j] = fwd.steps[t].scaled_alpha[i] * model.transition[i][j] * lik[j] *
                   bwd.scaled_beta[t + 1][j];
        total += xi[i][j];
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) stats.xi_sum[i][j] += xi[i][j] / total;
  }
  return stats;
}

void m_step_shared(HmmModel& model, const EmStats& stats) {
  const int n = model.n_states;
  model.initial = stats.gamma_first;
  for (int i = 0; i < n; ++i) {
    double row_total = 0.0;
    for (int j = 0; j < n; ++j) row_total += stats.xi_sum[i][j];
    if (row_total > 0.0) {
      for (int j = 0; j < n; ++j) model.transition[i][j] = stats.xi_sum[i][j] / row_total;
    } else {
      // A state with no expected visits keeps a uniform outgoing row rather
      // than a zero row, which would break stochasticity.
      for (int j = 0; j < n; ++j) model.transition[i][j] = 1.0 / n;
    }
  }
}

HmmModel init_gaussian_model(std::span<const double> obs, int n_states, Rng& rng,
                             bool perturb) {
  const Kmeans1dResult km = kmeans_1d(obs, n_states);
  GaussianEmissions em;
  em.means.resize(n_states);
  em.vars.resize(n_states);
  std::vector<double> sum2(n_states, 0.0);
  std::vector<std::size_t> count(n_states, 0);
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const int c = km.assignments[t];
    sum2[c] += (obs[t] - km.centers[c]) * (obs[t] - km.centers[c]);
    ++count[c];
  }
  double pooled = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t)
    pooled += (obs[t] - km.centers[km.assignments[t]]) * (obs[t] - km.centers[km.assignments[t]]);
  pooled = std::max(pooled / obs.size(), kVarianceFloor);
  for (int i = 0; i < n_states; ++i) {
    em.means[i] = km.centers[i];
    em.vars[i] = count[i] > 1 ? std::max(sum2[i] / count[i], kVarianceFloor) : pooled;
    if (perturb) {
      em.means[i] += rng.gaussian() * 0.1 * std::sqrt(pooled);
      em.vars[i] *= std::exp(0.2 * rng.gaussian());
    }
  }

  HmmModel model;
  model.n_states = n_states;
  model.transition.assign(n_states, std::vector<double>(n_states));
  for (int i = 0; i < n_states; ++i)
    for (int j = 0; j < n_states; ++j)
      model.transition[i][j] = (i == j) ? 0.8 : 0.2 / std::max(n_states - 1, 1);
  if (n_states == 1) model.transition[0][0] = 1.0;
  model.initial.assign(n_states, 1.0 / n_states);
  model.emissions = std::move(em);
  return model;
}

HmmModel init_discrete_model(std::span<const int> obs, int n_states, int n_symbols,
                             Rng& rng) {
  std::vector<double> hist(n_symbols, 1.0);  // add-one smoothing
  for (int s : obs) {
    if (s < 0 || s >= n_symbols)
      throw std::invalid_argument("fit_discrete: symbol outside alphabet");
    hist[s] += 1.0;
  }
  double total = 0.0;
  for (double h : hist) total += h;

  DiscreteEmissions em;
  em.probs.assign(n_states, std::vector<double>(n_symbols));
  for (int i = 0; i < n_states; ++i) {
    double row = 0.0;
    for (int k = 0; k < n_symbols; ++k) {
      // Histogram tilted per state so the states are distinguishable at init.
      em.probs[i][k] = hist[k] / total * std::exp(0.3 * rng.gaussian());
      row += em.probs[i][k];
    }
    for (int k = 0; k < n_symbols; ++k) em.probs[i][k] /= row;
  }

  HmmModel model;
  model.n_states = n_states;
  model.transition.assign(n_states, std::vector<double>(n_states));
  for (int i = 0; i < n_states; ++i)
    for (int j = 0; j < n_states; ++j)
      model.transition[i][j] = (i == j) ? 0.8 : 0.2 / std::max(n_states - 1, 1);
  if (n_states == 1) model.transition[0][0] = 1.0;
  model.initial.assign(n_states, 1.0 / n_states);
  model.emissions = std::move(em);
  return model;
}

template <typename Obs>
FitResult run_em(HmmModel model, std::span<const Obs> obs, const FitOptions& opts) {
  FitResult result;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const EmStats stats = e_step(model, obs);
    result.log_likelihoods.push_back(stats.log_likelihood);

    m_step_shared(model, stats);
    if (model.is_gaussian()) {
      auto& g = std::get<GaussianEmissions>(model.emissions);
      for (int i = 0; i < model.n_states; ++i) {
        if (stats.gamma_sum_all[i] <= 0.0) continue;  // starved state keeps params
        double mean = 0.0;
        for (std::size_t t = 0; t < obs.size(); ++t)
          mean += stats.gammas[t][i] * static_cast<double>(obs[t]);
        mean /= stats.gamma_sum_all[i];
        double var = 0.0;
        for (std::size_t t = 0; t < obs.size(); ++t) {
          const double d = static_cast<double>(obs[t]) - mean;
          var += stats.gammas[t][i] * d * d;
        }
        g.means[i] = mean;
        g.vars[i] = std::max(var / stats.gamma_sum_all[i], kVarianceFloor);
      }
    } else {
      auto& d = std::get<DiscreteEmissions>(model.emissions);
      const int m = static_cast<int>(d.probs[0].size());
      for (int i = 0; i < model.n_states; ++i) {
        if (stats.gamma_sum_all[i] <= 0.0) continue;
        std::vector<double> acc(m, 0.0);
        for (std::size_t t = 0; t < obs.size(); ++t)
          acc[static_cast<int>(obs[t])] += stats.gammas[t][i];
        for (int k = 0; k < m; ++k) d.probs[i][k] = acc[k] / stats.gamma_sum_all[i];
      }
    }

    const double ll = stats.log_likelihood;
    if (std::isfinite(prev_ll) &&
        ll - prev_ll < opts.tol * (std::abs(prev_ll) + 1.0))
      break;
    prev_ll = ll;
  }
  result.model = std::move(model);
  return result;
}

}  // namespace

FitResult fit_gaussian_traced(std::span<const double> obs, int n_states, std::uint64_t seed,
                              const FitOptions& opts) {
  if (n_states < 1) throw std::invalid_argument("fit_gaussian: n_states must be positive");
  if (obs.size() < static_cast<std::size_t>(n_states))
    throw std::invalid_argument("fit_gaussian: fewer observations than states");

  FitResult best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    Rng rng(Rng::mix(seed, 0x66697467 + attempt));
    HmmModel init = init_gaussian_model(obs, n_states, rng, attempt > 0);
    try {
      FitResult fit = run_em(std::move(init), obs, opts);
      const double ll = fit.log_likelihoods.back();
      if (std::isfinite(ll) && ll > best_ll) {
        best_ll = ll;
        best = std::move(fit);
      }
      if (attempt == 0 && std::isfinite(ll)) break;  // deterministic init succeeded
    } catch (const std::runtime_error&) {
      // Degenerate run (vanished mass); retry with a perturbed init.
    }
  }
  if (!std::isfinite(best_ll)) throw std::runtime_error("fit_gaussian: all restarts degenerate");
  best.model.validate();
  return best;
}

FitResult fit_discrete_traced(std::span<const int> obs, int n_states, int n_symbols,
                              std::uint64_t seed, const FitOptions& opts) {
  if (n_states < 1) throw std::invalid_argument("fit_discrete: n_states must be positive");
  if (n_symbols < 1) throw std::invalid_argument("fit_discrete: n_symbols must be positive");
  if (obs.empty()) throw std::invalid_argument("fit_discrete: empty observations");

  FitResult best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    Rng rng(Rng::mix(seed, 0x66697464 + attempt));
    HmmModel init = init_discrete_model(obs, n_states, n_symbols, rng);
    try {
      FitResult fit = run_em(std::move(init), obs, opts);
      const double ll = fit.log_likelihoods.back();
      if (std::isfinite(ll) && ll > best_ll) {
        best_ll = ll;
        best = std::move(fit);
      }
    } catch (const std::runtime_error&) {
    }
  }
  if (!std::isfinite(best_ll)) throw std::runtime_error("fit_discrete: all restarts degenerate");
  best.model.validate();
  return best;
}

HmmModel fit_gaussian(std::span<const double> obs, int n_states, std::uint64_t seed,
                      const FitOptions& opts) {
  return fit_gaussian_traced(obs, n_states, seed, opts).model;
}

HmmModel fit_discrete(std::span<const int> obs, int n_states, int n_symbols, std::uint64_t seed,
                      const FitOptions& opts) {
  return fit_discrete_traced(obs, n_states, n_symbols, seed, opts).model;
}

SampledPath sample(const HmmModel& model, std::size_t length, std::uint64_t seed) {
  model.validate();
  if (!model.is_gaussian())
    throw std::invalid_argument("sample: model does not have Gaussian emissions");
  const auto& g = model.gaussian();

  Rng rng(seed);
  SampledPath path;
  path.states.resize(length);
  path.observations.resize(length);
  int state = 0;
  for (std::size_t t = 0; t < length; ++t) {
    state = static_cast<int>(
        rng.categorical(t == 0 ? model.initial : model.transition[state]));
    path.states[t] = state;
    path.observations[t] = g.means[state] + std::sqrt(g.vars[state]) * rng.gaussian();
  }
  return path;
}

SampledSymbols sample_symbols(const HmmModel& model, std::size_t length, std::uint64_t seed) {
  model.validate();
  if (model.is_gaussian())
    throw std::invalid_argument("sample_symbols: model does not have discrete emissions");
  const auto& d = model.discrete();

  Rng rng(seed);
  SampledSymbols out;
  out.states.resize(length);
  out.observations.resize(length);
  int state = 0;
  for (std::size_t t = 0; t < length; ++t) {
    state = static_cast<int>(
        rng.categorical(t == 0 ? model.initial : model.transition[state]));
    out.states[t] = state;
    out.observations[t] = static_cast<int>(rng.categorical(d.probs[state]));
  }
  return out;
}

namespace {

// Strong connectivity of the positive-probability transition graph.
bool is_irreducible(const Matrix& a) {
  const int n = static_cast<int>(a.size());
  auto reachable = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::queue<int> queue;
    queue.push(0);
    seen[0] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop();
      for (int v = 0; v < n; ++v) {
        const double p = transpose ? a[v][u] : a[u][v];
        if (p > 0.0 && !seen[v]) {
          seen[v] = true;
          queue.push(v);
        }
      }
    }
    for (bool s : seen)
      if (!s) return false;
    return true;
  };
  return reachable(false) && reachable(true);
}

}  // namespace

std::vector<double> stationary_distribution(const HmmModel& model) {
  model.validate();
  const int n = model.n_states;
  if (n == 1) return {1.0};
  if (!is_irreducible(model.transition))
    throw std::runtime_error("stationary_distribution: chain is reducible");

  // Solve (A^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
  Matrix m(n, std::vector<double>(n + 1, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = model.transition[j][i] - (i == j ? 1.0 : 0.0);
  for (int j = 0; j < n; ++j) m[n - 1][j] = 1.0;
  m[n - 1][n] = 1.0;

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (std::abs(m[pivot][col]) < 1e-14)
      throw std::runtime_error("stationary_distribution: singular system");
    std::swap(m[col], m[pivot]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::vector<double> pi(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    pi[i] = m[i][n] / m[i][i];
    if (pi[i] < 0.0 && pi[i] > -1e-12) pi[i] = 0.0;
    if (pi[i] < 0.0) throw std::runtime_error("stationary_distribution: negative solution");
    total += pi[i];
  }
  for (double& v : pi) v /= total;
  return pi;
}

HmmModel make_two_state_source(double mean1, double mean2, double var1, double var2,
                               double switch_prob) {
  if (switch_prob < 0.0 || switch_prob > 1.0)
    throw std::invalid_argument("make_two_state_source: switch probability outside [0, 1]");
  HmmModel model;
  model.n_states = 2;
  model.transition = {{1.0 - switch_prob, switch_prob}, {switch_prob, 1.0 - switch_prob}};
  model.initial = {0.5, 0.5};  // stationary for the symmetric switch
  model.emissions = GaussianEmissions{{mean1, mean2}, {var1, var2}};
  model.validate();
  return model;
}

}  // namespace hmsq
