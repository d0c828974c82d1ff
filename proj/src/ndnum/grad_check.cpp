#include "lada/ndnum/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lada/error.hpp"

namespace lada {

double grad_check(const std::function<double()>& loss, std::span<const ParamProbe> probes, double eps) {
  double worst = 0.0;
  for (const ParamProbe& probe : probes) {
    const double saved = *probe.value;
    *probe.value = saved + eps;
    const double up = loss();
    *probe.value = saved - eps;
    const double down = loss();
    *probe.value = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::Numeric, "grad_check: loss closure returned a non-finite value");
    }
    const double fd = (up - down) / (2.0 * eps);
    const double denom = std::max({1e-8, std::abs(probe.analytic), std::abs(fd)});
    worst = std::max(worst, std::abs(probe.analytic - fd) / denom);
  }
  return worst;
}

std::vector<ParamProbe> sample_probes(Mlp& mlp, const MlpGrads& grads, std::size_t count, Rng& rng) {
  std::vector<ParamProbe> probes;
  const std::size_t total = mlp.num_parameters();
  if (total == 0) return probes;
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  probes.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::size_t flat = pick(rng);
    for (std::size_t i = 0; i < mlp.num_layers(); ++i) {
      Layer& layer = mlp.layers()[i];
      const auto w = static_cast<std::size_t>(layer.weight.size());
      if (flat < w) {
        probes.push_back({layer.weight.data() + flat, grads.layers[i].weight.data()[flat]});
        break;
      }
      flat -= w;
      const auto b = static_cast<std::size_t>(layer.bias.size());
      if (flat < b) {
        probes.push_back({layer.bias.data() + flat, grads.layers[i].bias.data()[flat]});
        break;
      }
      flat -= b;
    }
  }
  return probes;
}

}  // namespace lada
