#include "ihaz/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "ihaz/numeric.hpp"
#include "ihaz/parallel.hpp"

namespace ihaz {

namespace {

void check_sigma(std::span<const double> sigma) {
  for (std::size_t g = 0; g < sigma.size(); ++g) {
    if (!(sigma[g] > 0.0)) {
      fail(ErrorKind::degenerate_variance,
           "sigma_hat is zero at grid point " + std::to_string(g + 1) + "; the standardized process is undefined");
    }
  }
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;


}  // namespace

void fill_multipliers(double* xi, std::size_t n, std::uint64_t seed, std::uint64_t b, MultiplierKind kind) {
  auto rng = make_rng(seed, b);
  if (kind == MultiplierKind::gaussian) {
    std::normal_distribution<double> z;
    for (std::size_t i = 0; i < n; ++i) xi[i] = z(rng);
    return;
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) bits = rng();
    xi[i] = (bits & 1ULL) ? 1.0 : -1.0;
    bits >>= 1;
  }
}

MultiplierDraws multiplier_bootstrap(const Eigen::MatrixXd& phi, std::span<const double> psi,
                                     std::span<const double> sigma, const BootstrapOptions& options) {
  const Eigen::Index n = phi.rows(), G = phi.cols();
  if (G == 0) fail(ErrorKind::argument, "multiplier bootstrap needs a nonempty grid");
  if (static_cast<Eigen::Index>(psi.size()) != G || static_cast<Eigen::Index>(sigma.size()) != G) {
    fail(ErrorKind::argument, "psi/sigma length does not match the grid");
  }
  if (options.B < 100) fail(ErrorKind::argument, "multiplier bootstrap needs B >= 100");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) fail(ErrorKind::argument, "alpha must lie in (0, 1)");
  check_sigma(sigma);

  Eigen::MatrixXd z(n, G);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    z.col(g) = (phi.col(g).array() - psi[gi]) / (sigma[gi] * root_n);
  }

  MultiplierDraws out;
  out.sups.assign(options.B, 0.0);
  const std::size_t chunk = std::clamp<std::size_t>(static_cast<std::size_t>(4'000'000 / std::max<Eigen::Index>(n, 1)), 1, 256);
  const std::size_t chunks = (options.B + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = c * chunk;
    const std::size_t count = std::min(chunk, options.B - first);
    RowMatrix xi(static_cast<Eigen::Index>(count), n);
    for (std::size_t r = 0; r < count; ++r) {
      fill_multipliers(xi.row(static_cast<Eigen::Index>(r)).data(), static_cast<std::size_t>(n), options.seed, first + r, options.multipliers);
    }
    // One matrix-vector product per grid point keeps each column's values independent of the grid.
    Eigen::MatrixXd proc(static_cast<Eigen::Index>(count), z.cols());
    for (Eigen::Index g = 0; g < z.cols(); ++g) proc.col(g).noalias() = xi * z.col(g);
    for (std::size_t r = 0; r < count; ++r) out.sups[first + r] = proc.row(static_cast<Eigen::Index>(r)).cwiseAbs().maxCoeff();
  });
  out.c_alpha = empirical_quantile(out.sups, 1.0 - options.alpha);
  return out;
}

double multiplier_critical_value(const Eigen::MatrixXd& phi, std::span<const double> psi,
                                 std::span<const double> sigma, const BootstrapOptions& options) {
  return multiplier_bootstrap(phi, psi, sigma, options).c_alpha;
}

double horizontal_line_q(std::span<const double> psi, std::span<const double> sigma, std::size_t n) {
  if (psi.empty() || psi.size() != sigma.size()) fail(ErrorKind::argument, "global null test needs a nonempty grid");
  if (n == 0) fail(ErrorKind::argument, "global null test needs n >= 1");
  const double root_n = std::sqrt(static_cast<double>(n));
  auto fits = [&](double q) {
    double top = -std::numeric_limits<double>::infinity();
    double bottom = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < psi.size(); ++g) {
      const double s = sigma[g] / root_n;
      top = std::max(top, psi[g] - q * s);
      bottom = std::min(bottom, psi[g] + q * s);
    }
    return top <= bottom;
  };
  if (fits(0.0)) return 0.0;
  double hi = 1.0;
  while (!fits(hi)) {
    hi *= 2.0;
    if (hi > 1e15) return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (fits(mid) ? hi : lo) = mid;
  }
  return hi;
}

double global_null_pvalue(std::span<const double> psi, std::span<const double> sigma, std::size_t n,
                          std::span<const double> sups) {
  if (sups.empty()) fail(ErrorKind::argument, "global null test needs bootstrap suprema");
  const double q = horizontal_line_q(psi, sigma, n);
  const auto hits = std::count_if(sups.begin(), sups.end(), [q](double s) { return s >= q; });
  return static_cast<double>(hits) / static_cast<double>(sups.size());
}

BandResult band_from_estimate(const GridEstimate& estimate, const BootstrapOptions& options) {
  BandResult band;
  band.kind = estimate.kind;
  band.grid = estimate.grid;
  band.psi_hat = estimate.psi();
  band.sigma_hat = estimate.sigma();
  band.n = static_cast<std::size_t>(estimate.phi.rows());
  band.K = estimate.plan ? estimate.plan->K : 0;
  band.alpha = options.alpha;
  band.B = options.B;
  band.seed = options.seed;
  auto draws = multiplier_bootstrap(estimate.phi, band.psi_hat, band.sigma_hat, options);
  band.c_alpha = draws.c_alpha;
  band.sups = std::move(draws.sups);
  const double root_n = std::sqrt(static_cast<double>(band.n));
  for (std::size_t g = 0; g < band.psi_hat.size(); ++g) {
    const double half = band.c_alpha * band.sigma_hat[g] / root_n;
    band.lower.push_back(band.psi_hat[g] - half);
    band.upper.push_back(band.psi_hat[g] + half);
  }
  band.q_star = horizontal_line_q(band.psi_hat, band.sigma_hat, band.n);
  band.p_value = global_null_pvalue(band.psi_hat, band.sigma_hat, band.n, band.sups);
  return band;
}

BandResult uniform_band(const Dataset& data, const ThetaGrid& grid, const LearnerConfig& config, std::size_t K,
                        const BootstrapOptions& options) {
  const auto plan = make_folds(data.size(), K, options.seed);
  return band_from_estimate(estimate_cf(data, grid, plan, config), options);
}

// ---------------------------------------------------------------------------

double weighted_ipw(const Dataset& data, const HazardShift& shift, const StepCumHazard& hazard,
                    std::span<const double> weights) {
  if (weights.size() != data.size()) fail(ErrorKind::argument, "weight vector length does not match the data");
  const IpwEvaluator eval(hazard, shift);
  std::vector<double> num(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) num[i] = weights[i] * data[i].y * eval.weight(data[i]);
  return pairwise_sum(num) / pairwise_sum(weights);
}

std::vector<double> bayesian_bootstrap_se(const Dataset& data, const ThetaGrid& grid, const LearnerConfig& config,
                                          std::size_t B, std::uint64_t seed) {
  if (B < 50) fail(ErrorKind::argument, "Bayesian bootstrap needs B >= 50");
  const std::size_t n = data.size(), G = grid.size();
  if (n == 0) fail(ErrorKind::argument, "Bayesian bootstrap needs data");
  std::vector<std::vector<double>> draws(B);
  std::vector<char> ok(B, 0);
  parallel_for(B, [&](std::size_t b) {
    auto rng = make_rng(seed, b);
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(n);
    for (auto& v : w) v = expo(rng);
    const double scale = static_cast<double>(n) / pairwise_sum(w);
    for (auto& v : w) v *= scale;
    try {
      const auto hazard = fit_hazard(data, config, w);
      std::vector<double> psi(G);
      for (std::size_t g = 0; g < G; ++g) psi[g] = weighted_ipw(data, grid.shifts[g], hazard, w);
      draws[b] = std::move(psi);
      ok[b] = 1;
    } catch (const Error&) {
      ok[b] = 0;
    }
  });
  const auto good = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
  if (10 * (B - good) > B) {
    fail(ErrorKind::convergence, "Bayesian bootstrap: " + std::to_string(B - good) + " of " + std::to_string(B) +
                                     " draws failed to refit");
  }
  std::vector<double> se(G);
  std::vector<double> col;
  for (std::size_t g = 0; g < G; ++g) {
    col.clear();
    for (std::size_t b = 0; b < B; ++b) {
      if (ok[b]) col.push_back(draws[b][g]);
    }
    se[g] = sd_sample(col);
  }
  return se;
}

double bayesian_bootstrap_se(const Dataset& data, const HazardShift& shift, const LearnerConfig& config,
                             std::size_t B, std::uint64_t seed) {
  return bayesian_bootstrap_se(data, ThetaGrid({0.0}, {shift}), config, B, seed).front();
}

}  // namespace ihaz
