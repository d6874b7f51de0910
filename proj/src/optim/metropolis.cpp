#include <cmath>

#include "tracker.hpp"

namespace synthmatch {

double metropolis_acceptance_probability(double delta_loglik) {
  return delta_loglik >= 0.0 ? 1.0 : std::exp(delta_loglik);
}

bool metropolis_accept(double delta_loglik, double uniform) {
  return uniform < metropolis_acceptance_probability(delta_loglik);
}

OptimizerResult metropolis(Objective& obj, const MetropolisConfig& cfg, Rng& rng) {
  if (cfg.samples < 1 || !(cfg.sigma > 0.0) || cfg.p_resample < 0.0 || cfg.p_resample > 1.0) {
    throw std::invalid_argument("metropolis: bad configuration");
  }
  const long start = obj.evaluations();
  const double inv_two_var = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  auto loglik = [&](const Evaluation& e) {
    if (cfg.likelihood == Likelihood::kWaveform) {
      if (std::isnan(e.squared_error)) {
        throw std::invalid_argument("metropolis: waveform likelihood needs an objective that renders audio");
      }
      return -e.squared_error * inv_two_var;
    }
    return -e.loss * inv_two_var;
  };

  detail::Tracker tracker(obj);
  std::vector<double> state = detail::uniform_point(obj.dimension(), rng);
  Evaluation current = obj.evaluate_full(state);
  double current_ll = loglik(current);
  tracker.observe(state, current.loss);
  tracker.mark(0);

  constexpr int kTraceEvery = 100;
  for (int s = 1; s <= cfg.samples; ++s) {
    // Uniform prior and symmetric resampling proposal: the ratio is the likelihood ratio.
    std::vector<double> proposal = state;
    for (auto& v : proposal) {
      if (rng.uniform() < cfg.p_resample) v = rng.uniform();
    }
    const Evaluation e = obj.evaluate_full(proposal);
    const double ll = loglik(e);
    if (metropolis_accept(ll - current_ll, rng.uniform())) {
      state = std::move(proposal);
      current = e;
      current_ll = ll;
      tracker.observe(state, current.loss);
    }
    if (s % kTraceEvery == 0 || s == cfg.samples) tracker.mark(s);
  }
  return tracker.best_result("metropolis", obj.evaluations() - start);
}

}  // namespace synthmatch
