#include <algorithm>
#include <cmath>
#include <numeric>

#include "tracker.hpp"

namespace synthmatch {

std::vector<double> single_point_crossover(std::span<const double> a, std::span<const double> b, std::size_t point) {
  if (a.size() != b.size() || point > a.size()) throw std::invalid_argument("single_point_crossover: bad arguments");
  std::vector<double> child(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(point));
  child.insert(child.end(), b.begin() + static_cast<std::ptrdiff_t>(point), b.end());
  return child;
}

void mutate_genes(std::vector<double>& genes, double rate, Rng& rng) {
  const auto count = std::min<std::size_t>(genes.size(), static_cast<std::size_t>(std::lround(rate * static_cast<double>(genes.size()))));
  std::vector<std::size_t> idx(genes.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first `count` entries are a uniform subset.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t j = k + rng.index(idx.size() - k);
    std::swap(idx[k], idx[j]);
    genes[idx[k]] = rng.uniform();
  }
}

namespace {

std::vector<std::size_t> rank_by_loss(const std::vector<double>& fitness) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  return order;
}

}  // namespace

std::vector<double> genetic_generation(GeneticState& state, Objective& obj, const GeneticConfig& cfg, Rng& rng) {
  const auto pop = static_cast<std::size_t>(cfg.population);
  const auto num_parents = static_cast<std::size_t>(cfg.num_parents);
  if (state.population.size() != pop || state.fitness.size() != pop) {
    throw std::invalid_argument("genetic_generation: population size mismatch");
  }
  const std::size_t n = obj.dimension();

  // Steady-state selection: the fittest individuals become parents and survive.
  const auto order = rank_by_loss(state.fitness);
  std::vector<std::vector<double>> parents;
  std::vector<double> parent_fitness;
  for (std::size_t k = 0; k < num_parents; ++k) {
    parents.push_back(state.population[order[k]]);
    parent_fitness.push_back(state.fitness[order[k]]);
  }

  std::vector<std::vector<double>> children;
  for (std::size_t c = 0; c < pop - num_parents; ++c) {
    const std::size_t a = rng.index(num_parents);
    std::size_t b = rng.index(num_parents - 1);
    if (b >= a) ++b;
    const std::size_t point = n > 1 ? 1 + rng.index(n - 1) : 0;
    auto child = single_point_crossover(parents[a], parents[b], point);
    mutate_genes(child, cfg.mutation_rate, rng);
    children.push_back(std::move(child));
  }
  const auto losses = obj.evaluate_batch(children);

  state.population = std::move(parents);
  state.fitness = std::move(parent_fitness);
  for (std::size_t c = 0; c < children.size(); ++c) {
    state.population.push_back(children[c]);
    state.fitness.push_back(losses[c]);
  }
  return losses;
}

OptimizerResult genetic(Objective& obj, const GeneticConfig& cfg, Rng& rng) {
  if (cfg.num_parents < 2 || cfg.population < cfg.num_parents || cfg.iters < 0) {
    throw std::invalid_argument("genetic: need population >= num_parents >= 2");
  }
  const long start = obj.evaluations();
  detail::Tracker tracker(obj);
  GeneticState state;
  for (int k = 0; k < cfg.population; ++k) state.population.push_back(detail::uniform_point(obj.dimension(), rng));
  state.fitness = obj.evaluate_batch(state.population);
  for (std::size_t k = 0; k < state.population.size(); ++k) tracker.observe(state.population[k], state.fitness[k]);
  tracker.mark(0);

  const auto first_child = static_cast<std::size_t>(cfg.num_parents);
  for (int it = 1; it <= cfg.iters; ++it) {
    genetic_generation(state, obj, cfg, rng);
    for (std::size_t k = first_child; k < state.population.size(); ++k) tracker.observe(state.population[k], state.fitness[k]);
    tracker.mark(it);
  }
  return tracker.best_result("genetic_algorithm", obj.evaluations() - start);
}

}  // namespace synthmatch
