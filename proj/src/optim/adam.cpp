#include <algorithm>
#include <cmath>

#include "tracker.hpp"

namespace synthmatch {

namespace {

struct FdProbe {
  std::vector<std::vector<double>> points;  // +e_0, -e_0, +e_1, -e_1, ...
  std::vector<double> spans;                // actual (upper - lower) per coordinate
};

FdProbe fd_probe(std::span<const double> u, double eps) {
  FdProbe p;
  p.points.reserve(2 * u.size());
  p.spans.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::vector<double> hi(u.begin(), u.end()), lo(u.begin(), u.end());
    hi[i] = std::min(1.0, u[i] + eps);
    lo[i] = std::max(0.0, u[i] - eps);
    p.spans[i] = hi[i] - lo[i];
    p.points.push_back(std::move(hi));
    p.points.push_back(std::move(lo));
  }
  return p;
}

std::vector<double> fd_from_losses(const FdProbe& p, std::span<const double> losses) {
  std::vector<double> g(p.spans.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = p.spans[i] > 0.0 ? (losses[2 * i] - losses[2 * i + 1]) / p.spans[i] : 0.0;
  }
  return g;
}

}  // namespace

std::vector<double> finite_difference_gradient(Objective& obj, std::span<const double> u, double eps) {
  const FdProbe p = fd_probe(u, eps);
  return fd_from_losses(p, obj.evaluate_batch(p.points));
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
  }
}

OptimizerResult adam_fd(Objective& obj, const AdamConfig& cfg, Rng& rng) {
  if (cfg.iters < 0 || !(cfg.fd_eps > 0.0)) throw std::invalid_argument("adam_fd: bad configuration");
  const long start = obj.evaluations();
  detail::Tracker tracker(obj);
  std::vector<double> u = detail::uniform_point(obj.dimension(), rng);
  Adam adam(u.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);

  for (int it = 1; it <= cfg.iters; ++it) {
    const FdProbe probe = fd_probe(u, cfg.fd_eps);
    const auto losses = obj.evaluate_batch(probe.points);
    for (std::size_t k = 0; k < losses.size(); ++k) tracker.observe(probe.points[k], losses[k]);
    adam.step(u, fd_from_losses(probe, losses));
    u = detail::clamp_unit(std::move(u));
    if (it < cfg.iters) tracker.mark(it);
  }
  // The final iterate is reported, not the best probe.
  const double final_loss = obj.evaluate(u);
  tracker.observe(u, final_loss);
  tracker.mark(cfg.iters);
  return tracker.result("adam_fd", u, final_loss, obj.evaluations() - start);
}

}  // namespace synthmatch
