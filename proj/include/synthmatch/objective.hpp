#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "synthmatch/spectral.hpp"
#include "synthmatch/synth.hpp"

namespace synthmatch {

struct Evaluation {
  double loss = 0.0;
  // Sum of squared waveform residuals; NaN when the objective has no waveform.
  double squared_error = std::numeric_limits<double>::quiet_NaN();
};

/// Thread count for batch evaluation: SYNTHMATCH_THREADS, else hardware concurrency.
int default_thread_count();

/// Box-constrained objective over [0,1]^dimension with an evaluation counter.
///
/// compute() must be pure; batches may be evaluated concurrently but results
/// are always returned in candidate order.
class Objective {
 public:
  Objective(std::size_t dimension, std::string target_id);
  virtual ~Objective() = default;
  Objective(const Objective&) = delete;
  Objective& operator=(const Objective&) = delete;

  double evaluate(std::span<const double> u) { return evaluate_full(u).loss; }
  Evaluation evaluate_full(std::span<const double> u);
  std::vector<double> evaluate_batch(const std::vector<std::vector<double>>& candidates);

  std::size_t dimension() const { return dimension_; }
  long evaluations() const { return count_.load(); }
  const std::string& target_id() const { return target_id_; }
  void set_threads(int n) { threads_ = n < 1 ? 1 : n; }

 protected:
  virtual Evaluation compute(std::span<const double> u) const = 0;

 private:
  void check_box(std::span<const double> u) const;

  std::size_t dimension_;
  std::string target_id_;
  std::atomic<long> count_{0};
  int threads_;
};

/// Closed-form objective, mainly for optimizer oracles.
class FunctionObjective final : public Objective {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  FunctionObjective(std::size_t dimension, Fn fn, std::string target_id = "function");

 protected:
  Evaluation compute(std::span<const double> u) const override;

 private:
  Fn fn_;
};

/// Renders a candidate patch and scores it against a fixed target.
class SynthObjective final : public Objective {
 public:
  SynthObjective(AudioBuffer target, RenderConfig render_cfg = {}, LossConfig loss_cfg = {},
                 std::string target_id = "target");

  const AudioBuffer& target() const { return target_; }
  const RenderConfig& render_config() const { return render_cfg_; }
  const MultiResolutionLoss& loss() const { return *loss_; }

 protected:
  Evaluation compute(std::span<const double> u) const override;

 private:
  AudioBuffer target_;
  RenderConfig render_cfg_;
  std::shared_ptr<const MultiResolutionLoss> loss_;
  std::vector<Matrix> target_mels_;
};

}  // namespace synthmatch
