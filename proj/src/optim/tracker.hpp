#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "synthmatch/optim.hpp"

namespace synthmatch::detail {

// Best-so-far bookkeeping shared by every optimizer. Ties keep the earliest.
class Tracker {
 public:
  explicit Tracker(const Objective& obj) : obj_(obj) {}

  bool observe(std::span<const double> u, double loss) {
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_.assign(u.begin(), u.end());
      return true;
    }
    return false;
  }

  void mark(int iteration) { trace_.push_back({iteration, obj_.evaluations(), best_loss_}); }

  double best_loss() const { return best_loss_; }
  const std::vector<double>& best() const { return best_; }
  std::vector<TracePoint>& trace() { return trace_; }

  OptimizerResult result(std::string method, std::vector<double> solution, double loss, long evaluations) {
    OptimizerResult r;
    r.best.values = std::move(solution);
    r.best.source = method;
    r.best_loss = loss;
    r.evaluations = evaluations;
    r.trace = std::move(trace_);
    r.method = std::move(method);
    return r;
  }

  // Result for methods that report the best evaluated point.
  OptimizerResult best_result(std::string method, long evaluations) {
    return result(std::move(method), best_, best_loss_, evaluations);
  }

 private:
  const Objective& obj_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::vector<double> best_;
  std::vector<TracePoint> trace_;
};

inline std::vector<double> uniform_point(std::size_t n, Rng& rng) {
  std::vector<double> u(n);
  for (auto& v : u) v = rng.uniform();
  return u;
}

inline std::vector<double> clamp_unit(std::vector<double> u) {
  for (auto& v : u) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return u;
}

}  // namespace synthmatch::detail
