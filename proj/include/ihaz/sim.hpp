#pragma once

// Simulation design: L ~ U(0, 2), treatment hazard exp(0.2 L), tau = 2,
// Y | L, U ~ N(3 - 0.6 L - (2 - U), 0.5^2).

#include <cstdint>
#include <string>
#include <vector>

#include "ihaz/estimators.hpp"
#include "ihaz/nuisance.hpp"

namespace ihaz::sim {

constexpr double kTau = 2.0;

enum class Design {
  standard,           // the design above
  null_outcome,    // same treatment process, Y ~ N(1.5, 0.5^2) independent of (U, L)
  no_positivity,   // hazard exp(0.2 L) for L <= 1 and exactly 0 for L > 1
};

CovariateBox covariate_box();
Dataset draw_dataset(std::size_t n, std::uint64_t seed, Design design = Design::standard);

/// (a t + b) exp(beta L) on [0, 2] x [0, 2]
HazardShift scenario_shift(double a, double b, double beta);

struct ScenarioSpec {
  std::string label;
  double a = 0.0, b = 1.0, beta = 0.0;
  std::size_t n = 1000;
  std::size_t R = 300;
  std::uint64_t seed = 1;

  HazardShift shift() const { return scenario_shift(a, b, beta); }
};

/// theta1 ... theta8
const std::vector<ScenarioSpec>& standard_scenarios();
ScenarioSpec find_scenario(const std::string& label);

/// psi(theta) under the standard design by nested adaptive Gauss-Kronrod quadrature.
double true_psi(const HazardShift& shift);
/// P(T >= 2) under the standard design.
double true_untreated_rate();

struct MonteCarlo {
  double mean = 0.0;
  double se = 0.0;
};

/// Samples (L, T(theta), Y) from the intervened law by inverting the shifted
/// cumulative hazard.
MonteCarlo monte_carlo_psi(const HazardShift& shift, std::size_t draws, std::uint64_t seed);

/// True nuisances: exp(0.2 l) t discretized into `steps` jumps at the step
/// midpoints, and mu(t, l) = 1 + t - 0.6 l.
Nuisances oracle_nuisances(std::size_t steps = 2000);

// ---------------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------------

/// Cox with time interactions for the hazard, kernel regression for the outcome.
inline LearnerConfig flexible_learners() {
  LearnerConfig c;
  c.hazard = HazardLearner::cox_flex;
  c.outcome = OutcomeLearner::kernel;
  return c;
}

struct ReplicationOptions {
  std::vector<EstimatorKind> estimators{EstimatorKind::ipw, EstimatorKind::aipw, EstimatorKind::oracle};
  /// Full-sample learners for ipw / aipw.
  LearnerConfig parametric{};
  /// Learners for aipw_cf.
  LearnerConfig cross_fit = flexible_learners();
  std::size_t K = 5;
  /// Bayesian-bootstrap draws for the IPW standard error; 0 uses the plug-in SD.
  std::size_t ipw_bootstrap = 200;
  std::size_t oracle_steps = 2000;
  double alpha = 0.05;
};

struct ReplicationRow {
  EstimatorKind kind = EstimatorKind::aipw;
  double bias = 0.0;
  double pct_bias = 0.0;
  double sd = 0.0;
  double avg_se = 0.0;
  double cp = 0.0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<double> estimates;
  std::vector<double> ses;
};

struct ReplicationReport {
  ScenarioSpec spec;
  double truth = 0.0;
  std::vector<ReplicationRow> rows;

  const ReplicationRow& row(EstimatorKind kind) const;
};

/// Bias, %bias, SD, average SE and Wald coverage of one estimator's replicates.
ReplicationRow summarize_replicates(EstimatorKind kind, std::span<const double> estimates,
                                    std::span<const double> ses, double truth, double alpha);

ReplicationReport replicate_study(const ScenarioSpec& spec, const ReplicationOptions& options = {});

}  // namespace ihaz::sim
