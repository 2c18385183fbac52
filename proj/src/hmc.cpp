#include "aiseval/hmc.hpp"

#include <algorithm>

namespace aiseval {

void HmcParams::validate() const {
  if (!(step_size > 0.0)) throw ContractError("HMC step size must be positive");
  if (n_leapfrog < 1) throw ContractError("HMC needs at least one leapfrog step");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ContractError("HMC target acceptance must lie in (0, 1)");
  }
  if (!(adapt_factor > 1.0)) throw ContractError("HMC adapt factor must exceed 1");
  if (!(step_jitter >= 0.0 && step_jitter < 1.0)) {
    throw ContractError("HMC step jitter must lie in [0, 1)");
  }
}

double adapt_step_size(double step_size, bool accepted, const HmcParams& params) {
  const double exponent = accepted ? 1.0 - params.target_accept : -params.target_accept;
  return std::clamp(step_size * std::pow(params.adapt_factor, exponent), kMinStepSize,
                    kMaxStepSize);
}

}  // namespace aiseval
