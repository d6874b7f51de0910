#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "synthmatch/optim.hpp"

namespace synthmatch {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int scale_count(int v, double factor) { return std::max(1, static_cast<int>(std::lround(v * factor))); }

void require_positive(int v, const char* what) {
  if (v < 1) throw std::invalid_argument(std::string("method config: ") + what + " must be positive");
}

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("method config: ") + what + " must lie in [0,1]");
}

// Reads known keys of one method section; anything else is rejected.
class Section {
 public:
  Section(const json& j, std::string method) : j_(j), method_(std::move(method)) {
    if (!j_.is_object()) throw std::invalid_argument("method config: '" + method_ + "' must be an object");
  }
  template <typename T>
  Section& field(const char* key, T& out) {
    seen_.emplace_back(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->get<T>();
      } catch (const json::exception& e) {
        throw std::invalid_argument("method config: " + method_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }
  void done() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        throw std::invalid_argument("method config: unknown key '" + method_ + "." + k + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string method_;
  std::vector<std::string> seen_;
};

}  // namespace

MethodConfig MethodConfig::scaled(double factor) const {
  MethodConfig c = *this;
  c.random_search.n = scale_count(c.random_search.n, factor);
  c.adam_fd.iters = scale_count(c.adam_fd.iters, factor);
  c.variational.iters = scale_count(c.variational.iters, factor);
  c.genetic_algorithm.iters = scale_count(c.genetic_algorithm.iters, factor);
  c.differential_evolution.generations = scale_count(c.differential_evolution.generations, factor);
  c.pgpe.generations = scale_count(c.pgpe.generations, factor);
  c.cma_es.max_iters = scale_count(c.cma_es.max_iters, factor);
  c.metropolis.samples = scale_count(c.metropolis.samples, factor);
  c.tpe.trials = scale_count(c.tpe.trials, factor);
  c.tpe.startup = std::min(c.tpe.startup, c.tpe.trials);
  return c;
}

void MethodConfig::check() const {
  require_positive(random_search.n, "random_search.n");
  if (adam_fd.iters < 0) throw std::invalid_argument("method config: adam_fd.iters must be >= 0");
  if (!(adam_fd.fd_eps > 0.0)) throw std::invalid_argument("method config: adam_fd.fd_eps must be positive");
  require_positive(variational.iters, "variational.iters");
  require_positive(variational.batch, "variational.batch");
  require_positive(genetic_algorithm.iters, "genetic_algorithm.iters");
  if (genetic_algorithm.num_parents < 2 || genetic_algorithm.population < genetic_algorithm.num_parents) {
    throw std::invalid_argument("method config: genetic_algorithm needs population >= num_parents >= 2");
  }
  require_probability(genetic_algorithm.mutation_rate, "genetic_algorithm.mutation_rate");
  require_positive(differential_evolution.generations, "differential_evolution.generations");
  if (differential_evolution.population < 4) throw std::invalid_argument("method config: differential_evolution.population must be >= 4");
  require_probability(differential_evolution.cr, "differential_evolution.cr");
  require_positive(pgpe.generations, "pgpe.generations");
  if (pgpe.population < 2 || pgpe.population % 2 != 0) throw std::invalid_argument("method config: pgpe.population must be even");
  if (!(pgpe.sigma_init > 0.0)) throw std::invalid_argument("method config: pgpe.sigma_init must be positive");
  require_probability(pgpe.clipup_momentum, "pgpe.clipup_momentum");
  if (cma_es.max_iters < 0 || !(cma_es.sigma0 > 0.0)) throw std::invalid_argument("method config: bad cma_es settings");
  require_positive(metropolis.samples, "metropolis.samples");
  if (!(metropolis.sigma > 0.0)) throw std::invalid_argument("method config: metropolis.sigma must be positive");
  require_probability(metropolis.p_resample, "metropolis.p_resample");
  require_positive(tpe.trials, "tpe.trials");
  require_positive(tpe.startup, "tpe.startup");
  require_positive(tpe.candidates, "tpe.candidates");
  if (!(tpe.gamma > 0.0 && tpe.gamma <= 1.0)) throw std::invalid_argument("method config: tpe.gamma must lie in (0,1]");
}

ordered_json to_json(const MethodConfig& c) {
  ordered_json j;
  j["random_search"] = {{"n", c.random_search.n}};
  j["adam_fd"] = {{"iters", c.adam_fd.iters}, {"lr", c.adam_fd.lr}, {"fd_eps", c.adam_fd.fd_eps},
                  {"beta1", c.adam_fd.beta1}, {"beta2", c.adam_fd.beta2}, {"epsilon", c.adam_fd.epsilon}};
  j["variational"] = {{"iters", c.variational.iters}, {"lr", c.variational.lr}, {"batch", c.variational.batch}};
  j["genetic_algorithm"] = {{"iters", c.genetic_algorithm.iters}, {"num_parents", c.genetic_algorithm.num_parents},
                            {"population", c.genetic_algorithm.population},
                            {"mutation_rate", c.genetic_algorithm.mutation_rate}};
  j["differential_evolution"] = {{"generations", c.differential_evolution.generations},
                                 {"population", c.differential_evolution.population},
                                 {"cr", c.differential_evolution.cr},
                                 {"f_min", c.differential_evolution.f_min},
                                 {"f_max", c.differential_evolution.f_max}};
  j["pgpe"] = {{"generations", c.pgpe.generations}, {"population", c.pgpe.population},
               {"sigma_init", c.pgpe.sigma_init}, {"sigma_lr", c.pgpe.sigma_lr},
               {"sigma_max_change", c.pgpe.sigma_max_change}, {"center_lr", c.pgpe.center_lr},
               {"clipup_max_speed", c.pgpe.clipup_max_speed}, {"clipup_momentum", c.pgpe.clipup_momentum}};
  j["cma_es"] = {{"max_iters", c.cma_es.max_iters}, {"sigma0", c.cma_es.sigma0}};
  j["metropolis"] = {{"samples", c.metropolis.samples}, {"sigma", c.metropolis.sigma},
                     {"p_resample", c.metropolis.p_resample},
                     {"likelihood", c.metropolis.likelihood == Likelihood::kWaveform ? "waveform" : "loss"}};
  j["tpe"] = {{"trials", c.tpe.trials}, {"startup", c.tpe.startup}, {"gamma", c.tpe.gamma},
              {"candidates", c.tpe.candidates}};
  return j;
}

MethodConfig method_config_from_json(const json& j, const MethodConfig& base) {
  if (!j.is_object()) throw std::invalid_argument("method config: top level must be an object");
  MethodConfig c = base;
  for (const auto& [method, body] : j.items()) {
    if (method == "random_search") {
      Section(body, method).field("n", c.random_search.n).done();
    } else if (method == "adam_fd") {
      Section(body, method).field("iters", c.adam_fd.iters).field("lr", c.adam_fd.lr).field("fd_eps", c.adam_fd.fd_eps)
          .field("beta1", c.adam_fd.beta1).field("beta2", c.adam_fd.beta2).field("epsilon", c.adam_fd.epsilon).done();
    } else if (method == "variational") {
      Section(body, method).field("iters", c.variational.iters).field("lr", c.variational.lr)
          .field("batch", c.variational.batch).done();
    } else if (method == "genetic_algorithm") {
      Section(body, method).field("iters", c.genetic_algorithm.iters)
          .field("num_parents", c.genetic_algorithm.num_parents).field("population", c.genetic_algorithm.population)
          .field("mutation_rate", c.genetic_algorithm.mutation_rate).done();
    } else if (method == "differential_evolution") {
      auto& d = c.differential_evolution;
      Section(body, method).field("generations", d.generations).field("population", d.population).field("cr", d.cr)
          .field("f_min", d.f_min).field("f_max", d.f_max).done();
    } else if (method == "pgpe") {
      auto& p = c.pgpe;
      Section(body, method).field("generations", p.generations).field("population", p.population)
          .field("sigma_init", p.sigma_init).field("sigma_lr", p.sigma_lr).field("sigma_max_change", p.sigma_max_change)
          .field("center_lr", p.center_lr).field("clipup_max_speed", p.clipup_max_speed)
          .field("clipup_momentum", p.clipup_momentum).done();
    } else if (method == "cma_es") {
      Section(body, method).field("max_iters", c.cma_es.max_iters).field("sigma0", c.cma_es.sigma0).done();
    } else if (method == "metropolis") {
      std::string likelihood = c.metropolis.likelihood == Likelihood::kWaveform ? "waveform" : "loss";
      Section(body, method).field("samples", c.metropolis.samples).field("sigma", c.metropolis.sigma)
          .field("p_resample", c.metropolis.p_resample).field("likelihood", likelihood).done();
      if (likelihood == "waveform") c.metropolis.likelihood = Likelihood::kWaveform;
      else if (likelihood == "loss") c.metropolis.likelihood = Likelihood::kLoss;
      else throw std::invalid_argument("method config: metropolis.likelihood must be 'waveform' or 'loss'");
    } else if (method == "tpe") {
      Section(body, method).field("trials", c.tpe.trials).field("startup", c.tpe.startup).field("gamma", c.tpe.gamma)
          .field("candidates", c.tpe.candidates).done();
    } else {
      throw std::invalid_argument("method config: unknown method section '" + method + "'");
    }
  }
  c.check();
  return c;
}

}  // namespace synthmatch
