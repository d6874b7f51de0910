#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "tracker.hpp"

namespace synthmatch {

std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,evaluations,best_loss\n";
  for (const auto& t : trace) out << t.iteration << ',' << t.evaluations << ',' << t.best_loss << '\n';
  return out.str();
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"random_search", "adam_fd", "variational",
                                                 "genetic_algorithm", "differential_evolution", "pgpe",
                                                 "cma_es", "metropolis", "tpe"};
  return names;
}

void check_method_name(std::string_view name) {
  const auto& names = method_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) return;
  std::string valid;
  for (const auto& m : names) valid += (valid.empty() ? "" : ", ") + m;
  throw UnknownMethod("unknown method '" + std::string(name) + "'; valid methods: " + valid);
}

OptimizerResult run_method(std::string_view name, Objective& obj, const MethodConfig& cfg, std::uint64_t seed) {
  check_method_name(name);
  cfg.check();
  Rng rng(seed);
  OptimizerResult r;
  if (name == "random_search") r = random_search(obj, cfg.random_search, rng);
  else if (name == "adam_fd") r = adam_fd(obj, cfg.adam_fd, rng);
  else if (name == "variational") r = variational_beta(obj, cfg.variational, rng);
  else if (name == "genetic_algorithm") r = genetic(obj, cfg.genetic_algorithm, rng);
  else if (name == "differential_evolution") r = differential_evolution(obj, cfg.differential_evolution, rng);
  else if (name == "pgpe") r = pgpe_clipup(obj, cfg.pgpe, rng);
  else if (name == "cma_es") r = cma_es(obj, cfg.cma_es, rng);
  else if (name == "metropolis") r = metropolis(obj, cfg.metropolis, rng);
  else if (name == "tpe") r = tpe(obj, cfg.tpe, rng);
  else check_method_name(name);
  r.method = std::string(name);
  r.best.source = r.method;
  r.seed = seed;
  return r;
}

OptimizerResult run_method(std::string_view name, const AudioBuffer& target, const MethodConfig& cfg,
                           std::uint64_t seed, const std::string& target_id) {
  check_method_name(name);
  RenderConfig rc;
  rc.sample_rate = target.sample_rate;
  rc.noise_seed = 0;
  SynthObjective obj(target, rc, LossConfig{}, target_id);
  return run_method(name, obj, cfg, seed);
}

}  // namespace synthmatch
