#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "ihaz/estimators.hpp"

namespace ihaz {

enum class MultiplierKind { rademacher, gaussian };

struct BootstrapOptions {
  double alpha = 0.05;
  std::size_t B = 2000;
  std::uint64_t seed = 0;
  MultiplierKind multipliers = MultiplierKind::rademacher;
};

/// Multipliers of bootstrap draw b: n values from the stream make_rng(seed, b).
void fill_multipliers(double* xi, std::size_t n, std::uint64_t seed, std::uint64_t b, MultiplierKind kind);

struct MultiplierDraws {
  double c_alpha = 0.0;
  /// sup over the grid of |multiplier process|, one entry per draw
  std::vector<double> sups;
};

/// Draw b uses its own stream seeded from (seed, b), so results do not depend
/// on the thread count or on how draws are batched.
MultiplierDraws multiplier_bootstrap(const Eigen::MatrixXd& phi, std::span<const double> psi,
                                     std::span<const double> sigma, const BootstrapOptions& options);

double multiplier_critical_value(const Eigen::MatrixXd& phi, std::span<const double> psi,
                                 std::span<const double> sigma, const BootstrapOptions& options);

struct BandResult {
  EstimatorKind kind = EstimatorKind::aipw_cf;
  ThetaGrid grid;
  std::vector<double> psi_hat, sigma_hat, lower, upper;
  double c_alpha = 0.0;
  double alpha = 0.05;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<double> sups;
  double q_star = 0.0;
  double p_value = 1.0;
};

/// Band psi_hat -/+ c_alpha sigma_hat / sqrt(n) from an already computed estimate.
/// Also fills in the global-null p-value.
BandResult band_from_estimate(const GridEstimate& estimate, const BootstrapOptions& options);

/// Cross-fitted estimate over the grid with folds drawn from options.seed, then its band.
BandResult uniform_band(const Dataset& data, const ThetaGrid& grid, const LearnerConfig& config, std::size_t K,
                        const BootstrapOptions& options);

/// Smallest q >= 0 for which a horizontal line fits inside psi -/+ q sigma / sqrt(n).
/// Infinity when no finite q works.
double horizontal_line_q(std::span<const double> psi, std::span<const double> sigma, std::size_t n);

/// Share of bootstrap suprema at or above horizontal_line_q.
double global_null_pvalue(std::span<const double> psi, std::span<const double> sigma, std::size_t n,
                          std::span<const double> sups);

/// sum w_i y_i W_i / sum w_i
double weighted_ipw(const Dataset& data, const HazardShift& shift, const StepCumHazard& hazard,
                    std::span<const double> weights);

/// Bayesian-bootstrap SE of the IPW estimator: exponential weights, weighted
/// hazard refit, weighted IPW; sample SD across successful draws.
std::vector<double> bayesian_bootstrap_se(const Dataset& data, const ThetaGrid& grid, const LearnerConfig& config,
                                          std::size_t B, std::uint64_t seed);
double bayesian_bootstrap_se(const Dataset& data, const HazardShift& shift, const LearnerConfig& config,
                             std::size_t B, std::uint64_t seed);

}  // namespace ihaz
