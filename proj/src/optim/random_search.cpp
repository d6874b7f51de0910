#include <algorithm>

#include "tracker.hpp"

namespace synthmatch {

OptimizerResult random_search(Objective& obj, const RandomSearchConfig& cfg, Rng& rng) {
  if (cfg.n < 1) throw std::invalid_argument("random_search: n must be >= 1");
  constexpr int kChunk = 100;
  const long start = obj.evaluations();
  detail::Tracker tracker(obj);
  int iteration = 0;
  for (int done = 0; done < cfg.n; done += kChunk) {
    const int m = std::min(kChunk, cfg.n - done);
    std::vector<std::vector<double>> batch;
    batch.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) batch.push_back(detail::uniform_point(obj.dimension(), rng));
    const auto losses = obj.evaluate_batch(batch);
    for (std::size_t k = 0; k < batch.size(); ++k) tracker.observe(batch[k], losses[k]);
    tracker.mark(++iteration);
  }
  return tracker.best_result("random_search", obj.evaluations() - start);
}

}  // namespace synthmatch
