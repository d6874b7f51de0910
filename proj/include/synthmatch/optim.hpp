#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthmatch/objective.hpp"
#include "synthmatch/param_space.hpp"

namespace synthmatch {

struct TracePoint {
  int iteration = 0;
  long evaluations = 0;
  double best_loss = 0.0;
};

struct OptimizerResult {
  Patch best;
  double best_loss = 0.0;
  long evaluations = 0;
  std::vector<TracePoint> trace;
  std::string method;
  std::uint64_t seed = 0;
};

/// CSV with header: iteration,evaluations,best_loss
std::string trace_csv(const std::vector<TracePoint>& trace);

// ---------------------------------------------------------------------------
// Method configurations. Defaults are the published budgets; constants the
// original runs left to library defaults are pinned here.

struct RandomSearchConfig {
  int n = 1000;
};

struct AdamConfig {
  int iters = 200;
  double lr = 0.001;
  double fd_eps = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct VariationalConfig {
  int iters = 500;
  double lr = 0.001;
  int batch = 200;
};

struct GeneticConfig {
  int iters = 100;
  int num_parents = 4;
  int population = 20;
  double mutation_rate = 0.1;
};

struct DeConfig {
  int generations = 20;
  int population = 10;
  double cr = 0.7;
  double f_min = 0.5;
  double f_max = 1.0;
};

struct PgpeConfig {
  int generations = 100;
  int population = 100;
  double sigma_init = 0.1;
  double sigma_lr = 0.1;
  double sigma_max_change = 0.2;
  double center_lr = 0.075;
  double clipup_max_speed = 0.15;
  double clipup_momentum = 0.9;
};

struct CmaesConfig {
  int max_iters = 200;
  double sigma0 = 0.25;
};

enum class Likelihood { kWaveform, kLoss };

struct MetropolisConfig {
  int samples = 10000;
  double sigma = 0.1;
  double p_resample = 0.1;
  Likelihood likelihood = Likelihood::kWaveform;
};

struct TpeConfig {
  int trials = 1000;
  int startup = 10;
  double gamma = 0.25;
  int candidates = 24;
};

struct MethodConfig {
  RandomSearchConfig random_search;
  AdamConfig adam_fd;
  VariationalConfig variational;
  GeneticConfig genetic_algorithm;
  DeConfig differential_evolution;
  PgpeConfig pgpe;
  CmaesConfig cma_es;
  MetropolisConfig metropolis;
  TpeConfig tpe;

  /// Scales every iteration/sample budget by `factor` (minimum 1). Population sizes are kept.
  MethodConfig scaled(double factor) const;
  /// Throws std::invalid_argument on non-positive counts or probabilities outside [0,1].
  void check() const;
};

nlohmann::ordered_json to_json(const MethodConfig& cfg);
/// Fields absent from `j` keep the values of `base`; unknown keys throw std::invalid_argument.
MethodConfig method_config_from_json(const nlohmann::json& j, const MethodConfig& base = {});

// ---------------------------------------------------------------------------
// Optimizers. All operate in [0,1]^dimension of the objective.

OptimizerResult random_search(Objective& obj, const RandomSearchConfig& cfg, Rng& rng);
OptimizerResult adam_fd(Objective& obj, const AdamConfig& cfg, Rng& rng);
OptimizerResult variational_beta(Objective& obj, const VariationalConfig& cfg, Rng& rng);
OptimizerResult genetic(Objective& obj, const GeneticConfig& cfg, Rng& rng);
OptimizerResult differential_evolution(Objective& obj, const DeConfig& cfg, Rng& rng);
OptimizerResult pgpe_clipup(Objective& obj, const PgpeConfig& cfg, Rng& rng);
OptimizerResult cma_es(Objective& obj, const CmaesConfig& cfg, Rng& rng);
OptimizerResult metropolis(Objective& obj, const MetropolisConfig& cfg, Rng& rng);
OptimizerResult tpe(Objective& obj, const TpeConfig& cfg, Rng& rng);

/// The nine method names accepted by run_method, in benchmark order.
const std::vector<std::string>& method_names();

class UnknownMethod : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws UnknownMethod listing the valid names.
void check_method_name(std::string_view name);

OptimizerResult run_method(std::string_view name, Objective& obj, const MethodConfig& cfg, std::uint64_t seed);
/// Builds a SynthObjective (render noise seed 0) around `target` and dispatches.
OptimizerResult run_method(std::string_view name, const AudioBuffer& target, const MethodConfig& cfg,
                           std::uint64_t seed, const std::string& target_id = "target");

// ---------------------------------------------------------------------------
// Building blocks, exposed for testing.

/// Central differences; steps that would leave the box are shortened to stay inside.
/// Costs 2 * dimension evaluations.
std::vector<double> finite_difference_gradient(Objective& obj, std::span<const double> u, double eps);

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  /// Descends: params -= lr * m_hat / (sqrt(v_hat) + epsilon).
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

double softplus(double x);
double sample_beta(Rng& rng, double alpha, double beta);

struct BetaGradient {
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// Score-function estimate of d E[loss] / d(alpha, beta) with batch-mean baseline.
/// `samples` is batch x n, row-major.
BetaGradient beta_score_gradient(std::span<const double> samples, std::span<const double> losses,
                                 std::span<const double> alpha, std::span<const double> beta);

std::vector<double> single_point_crossover(std::span<const double> a, std::span<const double> b, std::size_t point);
/// Replaces round(rate * n) distinct genes with fresh uniform values.
void mutate_genes(std::vector<double>& genes, double rate, Rng& rng);

struct GeneticState {
  std::vector<std::vector<double>> population;
  std::vector<double> fitness;  // loss; lower is better
};

/// One steady-state generation; returns the children's losses.
std::vector<double> genetic_generation(GeneticState& state, Objective& obj, const GeneticConfig& cfg, Rng& rng);

std::vector<double> de_mutant(std::span<const double> best, std::span<const double> b, std::span<const double> c,
                              double f);
std::vector<double> de_crossover(std::span<const double> target, std::span<const double> mutant, double cr,
                                 std::size_t forced_index, Rng& rng);

class ClipUp {
 public:
  ClipUp(std::size_t n, double step_size, double max_speed, double momentum);
  /// Updates and returns the velocity for ascent direction `grad`.
  const std::vector<double>& step(std::span<const double> grad);
  const std::vector<double>& velocity() const { return velocity_; }

 private:
  double step_size_, max_speed_, momentum_;
  std::vector<double> velocity_;
};

/// Centered ranks in [-0.5, 0.5]; lowest loss gets +0.5.
std::vector<double> centered_rank_utilities(std::span<const double> losses);

struct PgpeGradient {
  std::vector<double> center;
  std::vector<double> sigma;
};

/// Gradient of expected utility for symmetric pairs. `deltas` is pairs x n;
/// `util_plus` / `util_minus` are utilities of center+delta / center-delta.
PgpeGradient pgpe_gradient(std::span<const double> deltas, std::span<const double> util_plus,
                           std::span<const double> util_minus, std::span<const double> sigma);

int cma_population_size(std::size_t n);

double metropolis_acceptance_probability(double delta_loglik);
/// `uniform` in [0,1).
bool metropolis_accept(double delta_loglik, double uniform);

std::size_t tpe_good_count(std::size_t n, double gamma);

/// One-dimensional truncated-Gaussian Parzen density on [0,1] with a uniform prior component.
class ParzenEstimator {
 public:
  explicit ParzenEstimator(std::vector<double> points);
  double log_pdf(double x) const;
  double sample(Rng& rng) const;
  double bandwidth() const { return bandwidth_; }

 private:
  std::vector<double> points_;
  std::vector<double> log_mass_;  // log of truncation mass per point
  double bandwidth_;
};

}  // namespace synthmatch
