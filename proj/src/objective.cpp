#include "synthmatch/objective.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace synthmatch {

int default_thread_count() {
  if (const char* env = std::getenv("SYNTHMATCH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Objective::Objective(std::size_t dimension, std::string target_id)
    : dimension_(dimension), target_id_(std::move(target_id)), threads_(default_thread_count()) {}

void Objective::check_box(std::span<const double> u) const {
  if (u.size() != dimension_) {
    throw std::invalid_argument("objective: expected " + std::to_string(dimension_) + " values, got " +
                                std::to_string(u.size()));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0 && u[i] <= 1.0)) {
      throw std::out_of_range("objective: candidate coordinate " + std::to_string(i) + " outside [0,1]");
    }
  }
}

Evaluation Objective::evaluate_full(std::span<const double> u) {
  check_box(u);
  ++count_;
  return compute(u);
}

std::vector<double> Objective::evaluate_batch(const std::vector<std::vector<double>>& candidates) {
  for (const auto& c : candidates) check_box(c);
  count_ += static_cast<long>(candidates.size());
  std::vector<double> out(candidates.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads_), candidates.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = compute(candidates[i]).loss;
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < candidates.size(); i = next++) {
          try {
            out[i] = compute(candidates[i]).loss;
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

FunctionObjective::FunctionObjective(std::size_t dimension, Fn fn, std::string target_id)
    : Objective(dimension, std::move(target_id)), fn_(std::move(fn)) {}

Evaluation FunctionObjective::compute(std::span<const double> u) const { return {fn_(u)}; }

SynthObjective::SynthObjective(AudioBuffer target, RenderConfig render_cfg, LossConfig loss_cfg,
                               std::string target_id)
    : Objective(kNumParams, std::move(target_id)), target_(std::move(target)), render_cfg_(render_cfg) {
  render_cfg_.check();
  if (target_.sample_rate != render_cfg_.sample_rate) {
    throw std::invalid_argument("SynthObjective: target sample rate differs from render rate");
  }
  if (target_.samples.size() != render_cfg_.num_samples()) {
    throw std::invalid_argument("SynthObjective: target length " + std::to_string(target_.samples.size()) +
                                " differs from render length " + std::to_string(render_cfg_.num_samples()));
  }
  loss_ = std::make_shared<const MultiResolutionLoss>(std::move(loss_cfg), render_cfg_.sample_rate);
  target_mels_ = loss_->analyze(target_.samples);
}

Evaluation SynthObjective::compute(std::span<const double> u) const {
  Patch p;
  p.values.assign(u.begin(), u.end());
  const AudioBuffer pred = render(p, render_cfg_);
  Evaluation e;
  e.loss = loss_->loss(target_mels_, pred.samples);
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.samples.size(); ++i) {
    const double d = pred.samples[i] - target_.samples[i];
    sse += d * d;
  }
  e.squared_error = sse;
  return e;
}

}  // namespace synthmatch
