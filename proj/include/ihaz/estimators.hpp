#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ihaz/core.hpp"
#include "ihaz/eif.hpp"
#include "ihaz/nuisance.hpp"

namespace ihaz {

enum class EstimatorKind { ipw, aipw, aipw_cf, oracle };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

struct EstimateResult {
  EstimatorKind kind = EstimatorKind::aipw;
  double theta = 1.0;  // grid index value
  std::string shift;   // HazardShift::describe()
  double psi_hat = 0.0;
  double sigma_hat = 0.0;
  std::size_t n = 0;
  std::size_t K = 0;  // 0 unless cross-fitted
  std::uint64_t seed = 0;

  double se() const;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// One estimator over a whole grid. phi holds the per-unit summands (n x G),
/// which the multiplier bootstrap reuses.
struct GridEstimate {
  EstimatorKind kind = EstimatorKind::aipw;
  ThetaGrid grid;
  Eigen::MatrixXd phi;
  std::vector<EstimateResult> points;
  std::optional<FoldPlan> plan;

  std::vector<double> psi() const;
  std::vector<double> sigma() const;
};

/// Column means and 1/n standard deviations of an n x G summand matrix.
std::vector<EstimateResult> summarize_columns(const Eigen::MatrixXd& phi, const ThetaGrid& grid, EstimatorKind kind);

GridEstimate estimate_ipw(const Dataset& data, const ThetaGrid& grid, const StepCumHazard& hazard);
GridEstimate estimate_aipw(const Dataset& data, const ThetaGrid& grid, const Nuisances& nuisances,
                           const TermsSink& sink = {});
/// Fits the K out-of-fold nuisance pairs, then evaluates unit i with pair fold(i).
GridEstimate estimate_cf(const Dataset& data, const ThetaGrid& grid, const FoldPlan& plan,
                         const LearnerConfig& config, const TermsSink& sink = {});
/// Cross-fitted estimate with caller-supplied per-fold nuisances.
GridEstimate estimate_cf_with(const Dataset& data, const ThetaGrid& grid, const FoldPlan& plan,
                              std::span<const Nuisances> fold_nuisances, const TermsSink& sink = {});
/// AIPW with externally supplied true nuisances.
GridEstimate estimate_oracle(const Dataset& data, const ThetaGrid& grid, const Nuisances& truth);

EstimateResult estimate_ipw(const Dataset& data, const HazardShift& shift, const StepCumHazard& hazard);
EstimateResult estimate_aipw(const Dataset& data, const HazardShift& shift, const Nuisances& nuisances);

/// psi_hat -/+ z_{1 - alpha/2} sigma_hat / sqrt(n)
Interval wald_ci(const EstimateResult& result, double alpha);

}  // namespace ihaz
