#include <algorithm>

#include "tracker.hpp"

namespace synthmatch {

std::vector<double> de_mutant(std::span<const double> best, std::span<const double> b, std::span<const double> c,
                              double f) {
  std::vector<double> v(best.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = best[i] + f * (b[i] - c[i]);
  return v;
}

std::vector<double> de_crossover(std::span<const double> target, std::span<const double> mutant, double cr,
                                 std::size_t forced_index, Rng& rng) {
  std::vector<double> trial(target.begin(), target.end());
  for (std::size_t i = 0; i < trial.size(); ++i) {
    const bool take = rng.uniform() < cr;
    if (take || i == forced_index) trial[i] = mutant[i];
  }
  return trial;
}

OptimizerResult differential_evolution(Objective& obj, const DeConfig& cfg, Rng& rng) {
  if (cfg.population < 4 || cfg.generations < 0) throw std::invalid_argument("differential_evolution: population must be >= 4");
  const long start = obj.evaluations();
  const std::size_t n = obj.dimension();
  const auto pop = static_cast<std::size_t>(cfg.population);
  detail::Tracker tracker(obj);

  std::vector<std::vector<double>> population;
  for (std::size_t k = 0; k < pop; ++k) population.push_back(detail::uniform_point(n, rng));
  std::vector<double> fitness = obj.evaluate_batch(population);
  for (std::size_t k = 0; k < pop; ++k) tracker.observe(population[k], fitness[k]);
  tracker.mark(0);

  auto best_index = [&] { return static_cast<std::size_t>(std::min_element(fitness.begin(), fitness.end()) - fitness.begin()); };

  for (int g = 1; g <= cfg.generations; ++g) {
    // best/1/bin with per-generation dithered F; trials built from the
    // generation-start population so the batch can be evaluated together.
    const double f = rng.uniform(cfg.f_min, cfg.f_max);
    const std::vector<double> best = population[best_index()];
    std::vector<std::vector<double>> trials;
    trials.reserve(pop);
    for (std::size_t i = 0; i < pop; ++i) {
      std::size_t b, c;
      do b = rng.index(pop); while (b == i);
      do c = rng.index(pop); while (c == i || c == b);
      const auto mutant = de_mutant(best, population[b], population[c], f);
      const std::size_t forced = rng.index(n);
      trials.push_back(detail::clamp_unit(de_crossover(population[i], mutant, cfg.cr, forced, rng)));
    }
    const auto losses = obj.evaluate_batch(trials);
    for (std::size_t i = 0; i < pop; ++i) {
      tracker.observe(trials[i], losses[i]);
      if (losses[i] < fitness[i]) {
        population[i] = std::move(trials[i]);
        fitness[i] = losses[i];
      }
    }
    tracker.mark(g);
  }
  return tracker.best_result("differential_evolution", obj.evaluations() - start);
}

}  // namespace synthmatch
