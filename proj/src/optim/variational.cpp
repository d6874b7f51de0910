#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>

#include "tracker.hpp"

namespace synthmatch {

namespace {

constexpr double kConcentrationFloor = 1e-4;
constexpr double kLogClip = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double concentration(double raw) { return std::max(softplus(raw), kConcentrationFloor); }

}  // namespace

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sample_beta(Rng& rng, double alpha, double beta) {
  const double x = rng.gamma(alpha);
  const double y = rng.gamma(beta);
  if (x + y == 0.0) return alpha / (alpha + beta);
  return std::clamp(x / (x + y), 0.0, 1.0);
}

BetaGradient beta_score_gradient(std::span<const double> samples, std::span<const double> losses,
                                 std::span<const double> alpha, std::span<const double> beta) {
  const std::size_t n = alpha.size();
  const std::size_t batch = losses.size();
  if (samples.size() != batch * n || beta.size() != n) throw std::invalid_argument("beta_score_gradient: shape mismatch");
  BetaGradient g{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (batch == 0) return g;
  const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
  if (*lo == *hi) return g;  // baseline cancels every term

  double baseline = 0.0;
  for (double l : losses) baseline += l;
  baseline /= static_cast<double>(batch);

  std::vector<double> psi_a(n), psi_b(n), psi_ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    psi_a[i] = boost::math::digamma(alpha[i]);
    psi_b[i] = boost::math::digamma(beta[i]);
    psi_ab[i] = boost::math::digamma(alpha[i] + beta[i]);
  }
  for (std::size_t k = 0; k < batch; ++k) {
    const double adv = losses[k] - baseline;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::clamp(samples[k * n + i], kLogClip, 1.0 - kLogClip);
      g.alpha[i] += adv * (std::log(u) - psi_a[i] + psi_ab[i]);
      g.beta[i] += adv * (std::log1p(-u) - psi_b[i] + psi_ab[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    g.alpha[i] /= static_cast<double>(batch);
    g.beta[i] /= static_cast<double>(batch);
  }
  return g;
}

OptimizerResult variational_beta(Objective& obj, const VariationalConfig& cfg, Rng& rng) {
  if (cfg.iters < 1 || cfg.batch < 1) throw std::invalid_argument("variational_beta: bad configuration");
  const long start = obj.evaluations();
  const std::size_t n = obj.dimension();
  detail::Tracker tracker(obj);

  // raw = [a_0..a_{n-1}, b_0..b_{n-1}]; softplus(raw) = 1 gives the uniform distribution.
  std::vector<double> raw(2 * n, std::log(std::exp(1.0) - 1.0));
  Adam adam(raw.size(), cfg.lr);
  std::vector<double> alpha(n), beta(n), samples(static_cast<std::size_t>(cfg.batch) * n);

  std::vector<double> last_best;
  double last_best_loss = 0.0;
  for (int it = 1; it <= cfg.iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      alpha[i] = concentration(raw[i]);
      beta[i] = concentration(raw[n + i]);
    }
    std::vector<std::vector<double>> batch(static_cast<std::size_t>(cfg.batch), std::vector<double>(n));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        batch[k][i] = sample_beta(rng, alpha[i], beta[i]);
        samples[k * n + i] = batch[k][i];
      }
    }
    const auto losses = obj.evaluate_batch(batch);
    std::size_t arg = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      tracker.observe(batch[k], losses[k]);
      if (losses[k] < losses[arg]) arg = k;
    }
    if (it == cfg.iters) {
      last_best = batch[arg];
      last_best_loss = losses[arg];
    }

    const BetaGradient g = beta_score_gradient(samples, losses, alpha, beta);
    std::vector<double> grad(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = softplus(raw[i]) > kConcentrationFloor ? g.alpha[i] * sigmoid(raw[i]) : 0.0;
      grad[n + i] = softplus(raw[n + i]) > kConcentrationFloor ? g.beta[i] * sigmoid(raw[n + i]) : 0.0;
    }
    adam.step(raw, grad);
    tracker.mark(it);
  }
  return tracker.result("variational", std::move(last_best), last_best_loss, obj.evaluations() - start);
}

}  // namespace synthmatch
