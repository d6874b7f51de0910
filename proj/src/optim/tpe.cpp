#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tracker.hpp"

namespace synthmatch {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

std::size_t tpe_good_count(std::size_t n, double gamma) {
  return static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n)));
}

ParzenEstimator::ParzenEstimator(std::vector<double> points) : points_(std::move(points)) {
  const auto m = static_cast<double>(points_.size());
  // Scott's rule, floored so large sets cannot collapse onto single points.
  double sd = 0.5;
  if (points_.size() >= 2) {
    const double mean = std::accumulate(points_.begin(), points_.end(), 0.0) / m;
    double ss = 0.0;
    for (double p : points_) ss += (p - mean) * (p - mean);
    sd = std::sqrt(ss / (m - 1.0));
  }
  const double floor = 1.0 / std::min(100.0, m + 1.0);
  bandwidth_ = std::clamp(1.059 * sd * std::pow(std::max(m, 1.0), -0.2), floor, 1.0);
  log_mass_.reserve(points_.size());
  for (double p : points_) {
    const double mass = normal_cdf((1.0 - p) / bandwidth_) - normal_cdf(-p / bandwidth_);
    log_mass_.push_back(std::log(std::max(mass, 1e-300)));
  }
}

double ParzenEstimator::log_pdf(double x) const {
  // Equal-weight mixture of the truncated kernels and a uniform prior on [0,1].
  const double log_norm = -std::log(bandwidth_) - 0.5 * std::log(2.0 * std::numbers::pi);
  auto term = [&](std::size_t j) {
    const double z = (x - points_[j]) / bandwidth_;
    return log_norm - 0.5 * z * z - log_mass_[j];
  };
  double peak = 0.0;  // the prior term is log(1) = 0
  for (std::size_t j = 0; j < points_.size(); ++j) peak = std::max(peak, term(j));
  double s = std::exp(-peak);
  for (std::size_t j = 0; j < points_.size(); ++j) s += std::exp(term(j) - peak);
  return peak + std::log(s) - std::log(static_cast<double>(points_.size() + 1));
}

double ParzenEstimator::sample(Rng& rng) const {
  const std::size_t c = rng.index(points_.size() + 1);
  if (c == points_.size()) return rng.uniform();
  const double mu = points_[c];
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = mu + bandwidth_ * rng.normal();
    if (x >= 0.0 && x <= 1.0) return x;
  }
  return std::clamp(mu, 0.0, 1.0);
}

OptimizerResult tpe(Objective& obj, const TpeConfig& cfg, Rng& rng) {
  if (cfg.trials < 1 || cfg.startup < 1 || cfg.candidates < 1 || !(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) {
    throw std::invalid_argument("tpe: bad configuration");
  }
  const long start = obj.evaluations();
  const std::size_t n = obj.dimension();
  detail::Tracker tracker(obj);
  std::vector<std::vector<double>> history;
  std::vector<double> losses;

  const int startup = std::min(cfg.startup, cfg.trials);
  for (int t = 0; t < startup; ++t) history.push_back(detail::uniform_point(n, rng));
  losses = obj.evaluate_batch(history);
  for (int t = 0; t < startup; ++t) {
    tracker.observe(history[static_cast<std::size_t>(t)], losses[static_cast<std::size_t>(t)]);
    tracker.mark(t + 1);
  }

  for (int t = startup; t < cfg.trials; ++t) {
    std::vector<std::size_t> order(history.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    const std::size_t n_good = tpe_good_count(history.size(), cfg.gamma);

    std::vector<double> score(static_cast<std::size_t>(cfg.candidates), 0.0);
    std::vector<std::vector<double>> cand(static_cast<std::size_t>(cfg.candidates), std::vector<double>(n));
    for (std::size_t d = 0; d < n; ++d) {
      std::vector<double> good, bad;
      for (std::size_t r = 0; r < order.size(); ++r) (r < n_good ? good : bad).push_back(history[order[r]][d]);
      const ParzenEstimator l(std::move(good)), g(std::move(bad));
      for (std::size_t c = 0; c < cand.size(); ++c) {
        const double x = l.sample(rng);
        cand[c][d] = x;
        score[c] += l.log_pdf(x) - g.log_pdf(x);
      }
    }
    const auto best = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
    const double loss = obj.evaluate(cand[best]);
    tracker.observe(cand[best], loss);
    history.push_back(std::move(cand[best]));
    losses.push_back(loss);
    tracker.mark(t + 1);
  }
  return tracker.best_result("tpe", obj.evaluations() - start);
}

}  // namespace synthmatch
