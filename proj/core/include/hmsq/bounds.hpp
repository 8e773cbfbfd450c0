#pragma once

#include <cstdint>
#include <span>

#include "hmsq/hmm.hpp"

namespace hmsq {

// Genie-aided switched-quantizer bound: the previous state is revealed, so
// state m gets its own optimal quantizer for the one-step-ahead mixture (row
// m of the transition matrix); states weighted by the stationary
// distribution. Multi-restart Lloyd stands in for the exact minimum.
double bound_switched(const HmmModel& model, int rate_bits, int restarts = 20,
                      std::uint64_t seed = 0);

// Clean-history bound: the belief at each step comes from the unquantized
// past, and each sample gets a fully converged Lloyd quantizer for that
// belief's mixture. Returns the mean squared error over the given
// observations.
double bound_clean_history(const HmmModel& model, int rate_bits,
                           std::span<const double> eval_obs);

}  // namespace hmsq
