#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lada/ndnum/mlp.hpp"

namespace lada {

/// One scalar parameter to perturb together with its analytic derivative.
struct ParamProbe {
  double* value = nullptr;
  double analytic = 0.0;
};

/// Max over probes of |analytic - fd| / max(1e-8, |analytic|, |fd|), with fd
/// the central difference at step eps. The closure must be deterministic.
/// Throws ErrorKind::Numeric if the closure returns a non-finite value.
double grad_check(const std::function<double()>& loss, std::span<const ParamProbe> probes,
                  double eps = 1e-5);

/// Draws `count` random (weight or bias) coordinates of `mlp` and pairs them
/// with the matching entries of `grads`.
std::vector<ParamProbe> sample_probes(Mlp& mlp, const MlpGrads& grads, std::size_t count, Rng& rng);

}  // namespace lada
