#include <algorithm>
#include <cmath>
#include <numeric>

#include "tracker.hpp"

namespace synthmatch {

namespace {
constexpr double kSigmaFloor = 1e-5;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}
}  // namespace

ClipUp::ClipUp(std::size_t n, double step_size, double max_speed, double momentum)
    : step_size_(step_size), max_speed_(max_speed), momentum_(momentum), velocity_(n, 0.0) {}

const std::vector<double>& ClipUp::step(std::span<const double> grad) {
  const double gnorm = norm2(grad);
  for (std::size_t i = 0; i < velocity_.size(); ++i) {
    const double s = gnorm > 0.0 ? step_size_ * grad[i] / gnorm : 0.0;
    velocity_[i] = momentum_ * velocity_[i] + s;
  }
  const double vnorm = norm2(velocity_);
  if (vnorm > max_speed_) {
    for (auto& v : velocity_) v *= max_speed_ / vnorm;
  }
  return velocity_;
}

std::vector<double> centered_rank_utilities(std::span<const double> losses) {
  const std::size_t m = losses.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  std::vector<double> util(m, 0.0);
  if (m < 2) return util;
  for (std::size_t r = 0; r < m; ++r) util[order[r]] = 0.5 - static_cast<double>(r) / static_cast<double>(m - 1);
  return util;
}

PgpeGradient pgpe_gradient(std::span<const double> deltas, std::span<const double> util_plus,
                           std::span<const double> util_minus, std::span<const double> sigma) {
  const std::size_t n = sigma.size();
  const std::size_t pairs = util_plus.size();
  if (deltas.size() != pairs * n || util_minus.size() != pairs) throw std::invalid_argument("pgpe_gradient: shape mismatch");
  PgpeGradient g{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (pairs == 0) return g;
  double baseline = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) baseline += util_plus[k] + util_minus[k];
  baseline /= static_cast<double>(2 * pairs);
  for (std::size_t k = 0; k < pairs; ++k) {
    const double diff = 0.5 * (util_plus[k] - util_minus[k]);
    const double mean = 0.5 * (util_plus[k] + util_minus[k]) - baseline;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = deltas[k * n + i];
      g.center[i] += diff * d;
      g.sigma[i] += mean * (d * d - sigma[i] * sigma[i]) / sigma[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    g.center[i] /= static_cast<double>(pairs);
    g.sigma[i] /= static_cast<double>(pairs);
  }
  return g;
}

OptimizerResult pgpe_clipup(Objective& obj, const PgpeConfig& cfg, Rng& rng) {
  if (cfg.population < 2 || cfg.population % 2 != 0 || cfg.generations < 0) {
    throw std::invalid_argument("pgpe_clipup: population must be even and >= 2");
  }
  const long start = obj.evaluations();
  const std::size_t n = obj.dimension();
  const auto pairs = static_cast<std::size_t>(cfg.population / 2);
  detail::Tracker tracker(obj);

  std::vector<double> center = detail::uniform_point(n, rng);
  std::vector<double> sigma(n, cfg.sigma_init);
  ClipUp clipup(n, cfg.center_lr, cfg.clipup_max_speed, cfg.clipup_momentum);

  for (int g = 1; g <= cfg.generations; ++g) {
    std::vector<double> deltas(pairs * n);
    std::vector<std::vector<double>> candidates;
    candidates.reserve(2 * pairs);
    for (std::size_t k = 0; k < pairs; ++k) {
      std::vector<double> plus(n), minus(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sigma[i] * rng.normal();
        deltas[k * n + i] = d;
        plus[i] = std::clamp(center[i] + d, 0.0, 1.0);
        minus[i] = std::clamp(center[i] - d, 0.0, 1.0);
      }
      candidates.push_back(std::move(plus));
      candidates.push_back(std::move(minus));
    }
    const auto losses = obj.evaluate_batch(candidates);
    for (std::size_t k = 0; k < candidates.size(); ++k) tracker.observe(candidates[k], losses[k]);

    const auto util = centered_rank_utilities(losses);
    std::vector<double> up(pairs), um(pairs);
    for (std::size_t k = 0; k < pairs; ++k) {
      up[k] = util[2 * k];
      um[k] = util[2 * k + 1];
    }
    const PgpeGradient grad = pgpe_gradient(deltas, up, um, sigma);

    const auto& velocity = clipup.step(grad.center);
    for (std::size_t i = 0; i < n; ++i) center[i] = std::clamp(center[i] + velocity[i], 0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double proposed = sigma[i] + cfg.sigma_lr * grad.sigma[i];
      const double lo = sigma[i] * (1.0 - cfg.sigma_max_change);
      const double hi = sigma[i] * (1.0 + cfg.sigma_max_change);
      sigma[i] = std::max(std::clamp(proposed, lo, hi), kSigmaFloor);
    }
    if (g < cfg.generations) tracker.mark(g);
  }
  const double final_loss = obj.evaluate(center);
  tracker.observe(center, final_loss);
  tracker.mark(cfg.generations);
  return tracker.result("pgpe", center, final_loss, obj.evaluations() - start);
}

}  // namespace synthmatch
