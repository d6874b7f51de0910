#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tracker.hpp"

namespace synthmatch {

int cma_population_size(std::size_t n) { return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(n)))); }

OptimizerResult cma_es(Objective& obj, const CmaesConfig& cfg, Rng& rng) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  if (cfg.max_iters < 0 || !(cfg.sigma0 > 0.0)) throw std::invalid_argument("cma_es: bad configuration");
  const long start = obj.evaluations();
  const auto n = static_cast<Eigen::Index>(obj.dimension());
  const double nd = static_cast<double>(n);
  detail::Tracker tracker(obj);

  const int lambda = cma_population_size(obj.dimension());
  const int mu = lambda / 2;
  VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cc = (4.0 + mueff / nd) / (nd + 4.0 + 2.0 * mueff / nd);
  const double cs = (mueff + 2.0) / (nd + mueff + 5.0);
  const double c1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nd + 2.0) * (nd + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (nd + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  VectorXd mean = VectorXd::Constant(n, 0.5);
  double sigma = cfg.sigma0;
  VectorXd pc = VectorXd::Zero(n), ps = VectorXd::Zero(n);
  MatrixXd B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  MatrixXd C = MatrixXd::Identity(n, n);
  MatrixXd inv_sqrt_c = MatrixXd::Identity(n, n);
  long eigen_eval = 0;
  long counteval = 0;

  auto to_vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  for (int g = 1; g <= cfg.max_iters; ++g) {
    MatrixXd xs(n, lambda);
    std::vector<std::vector<double>> candidates(static_cast<std::size_t>(lambda));
    std::vector<double> penalty(static_cast<std::size_t>(lambda));
    for (int k = 0; k < lambda; ++k) {
      VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
      xs.col(k) = mean + sigma * (B * D.cwiseProduct(z));
      const std::vector<double> raw = to_vec(xs.col(k));
      candidates[static_cast<std::size_t>(k)] = detail::clamp_unit(raw);
      double pen = 0.0;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const double d = raw[i] - candidates[static_cast<std::size_t>(k)][i];
        pen += d * d;
      }
      penalty[static_cast<std::size_t>(k)] = pen;
    }
    const auto losses = obj.evaluate_batch(candidates);
    counteval += lambda;
    for (std::size_t k = 0; k < candidates.size(); ++k) tracker.observe(candidates[k], losses[k]);

    // Rank on loss plus distance outside the box so the mean stays near it.
    std::vector<int> order(static_cast<std::size_t>(lambda));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return losses[static_cast<std::size_t>(a)] + penalty[static_cast<std::size_t>(a)] <
             losses[static_cast<std::size_t>(b)] + penalty[static_cast<std::size_t>(b)];
    });

    const VectorXd old_mean = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += weights(i) * xs.col(order[static_cast<std::size_t>(i)]);
    const VectorXd step = (mean - old_mean) / sigma;

    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_c * step);
    const double ps_norm = ps.norm();
    const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * g)) / chi_n < 1.4 + 2.0 / (nd + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * step;

    MatrixXd artmp(n, mu);
    for (int i = 0; i < mu; ++i) artmp.col(i) = (xs.col(order[static_cast<std::size_t>(i)]) - old_mean) / sigma;
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * C) +
        cmu * artmp * weights.asDiagonal() * artmp.transpose();
    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    if (!C.allFinite() || !std::isfinite(sigma) || !mean.allFinite()) {
      std::ostringstream msg;
      msg << "cma_es: non-finite state at iteration " << g << " (sigma=" << sigma << ")";
      throw std::runtime_error(msg.str());
    }
    // Refresh the eigendecomposition once it is stale.
    if (static_cast<double>(counteval - eigen_eval) > lambda / (c1 + cmu) / nd / 10.0) {
      eigen_eval = counteval;
      C = C.triangularView<Eigen::Upper>();
      C = C.selfadjointView<Eigen::Upper>();
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
      if (es.info() != Eigen::Success) throw std::runtime_error("cma_es: eigendecomposition failed at iteration " + std::to_string(g));
      B = es.eigenvectors();
      D = es.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
      inv_sqrt_c = B * D.cwiseInverse().asDiagonal() * B.transpose();
    }
    if (g < cfg.max_iters) tracker.mark(g);
  }

  const std::vector<double> solution = detail::clamp_unit(to_vec(mean));
  const double final_loss = obj.evaluate(solution);
  tracker.observe(solution, final_loss);
  tracker.mark(cfg.max_iters);
  return tracker.result("cma_es", solution, final_loss, obj.evaluations() - start);
}

}  // namespace synthmatch
