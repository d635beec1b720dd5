#pragma once

// Nuisance learners: treatment hazard Lambda(t | l), outcome regression
// mu(t, l), and K-fold cross-fitting plans.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ihaz/core.hpp"

namespace ihaz {

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct FoldPlan {
  std::size_t n = 0;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold;  // 0-based fold id per unit

  std::vector<std::size_t> members(int k) const;
  std::vector<std::size_t> complement(int k) const;
};

/// Shuffled partition of {0..n-1} into K folds whose sizes differ by at most one.
FoldPlan make_folds(std::size_t n, std::size_t K, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hazards
// ---------------------------------------------------------------------------

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

/// Nelson-Aalen: jumps d_j / r_j at the distinct event times. Optional
/// per-unit weights replace the counts by weighted sums.
StepCumHazard fit_nelson_aalen(const Dataset& data, std::span<const double> weights = {});

/// -log of the Kaplan-Meier curve on the same jump set.
StepCumHazard fit_km_log(const Dataset& data, std::span<const double> weights = {});

struct CoxFit {
  /// Row d multiplies t^d; row 0 holds the ordinary log hazard ratios.
  Eigen::MatrixXd coef;
  StepCumHazard hazard;  // Breslow baseline at l = 0 times exp(linear predictor)
  int iterations = 0;
  double gradient_norm = 0.0;
  double loglik = 0.0;
  /// Observed information at the optimum (free coefficients only).
  Eigen::MatrixXd information;

  std::vector<double> beta() const;
};

struct CoxOptions {
  NewtonOptions newton;
  /// Highest power of t interacting with the covariates (0 = proportional hazards).
  int time_degree = 0;
  /// Force the O(n m) time-varying code path even when time_degree == 0.
  bool generic_path = false;
  /// Covariate domain attached to the fitted hazard; defaults to the training box.
  std::optional<CovariateBox> domain;
};

/// Breslow partial likelihood maximised by Newton-Raphson with step halving.
/// Covariates with no variation get a zero coefficient.
CoxFit fit_cox(const Dataset& data, const CoxOptions& options = {}, std::span<const double> weights = {});

// ---------------------------------------------------------------------------
// Outcome regressions
// ---------------------------------------------------------------------------

enum class OutcomeLearner { linear, logistic, kernel };
enum class HazardLearner { nelson_aalen, km_log, cox, cox_flex };

std::string to_string(OutcomeLearner learner);
std::string to_string(HazardLearner learner);
OutcomeLearner parse_outcome_learner(const std::string& name);
HazardLearner parse_hazard_learner(const std::string& name);

/// Least squares / logistic regression on the features (1, u, l).
class GlmOutcome final : public OutcomeModel {
 public:
  GlmOutcome(Eigen::VectorXd coef, bool logistic, double tau, CovariateBox box);
  const Eigen::VectorXd& coef() const { return coef_; }
  std::string learner() const override { return logistic_ ? "logistic" : "linear"; }

 protected:
  double predict_unchecked(double t, Covariates l) const override;

 private:
  Eigen::VectorXd coef_;
  bool logistic_;
};

/// Nadaraya-Watson regression on (u, l) with a product Gaussian kernel.
class KernelOutcome final : public OutcomeModel {
 public:
  KernelOutcome(Eigen::MatrixXd points, Eigen::VectorXd response, Eigen::VectorXd bandwidth, double tau,
                CovariateBox box);
  const Eigen::VectorXd& bandwidth() const { return bandwidth_; }
  std::string learner() const override { return "kernel"; }

 protected:
  double predict_unchecked(double t, Covariates l) const override;
  void predict_path_unchecked(std::span<const double> times, Covariates l, std::span<double> out) const override;

 private:
  struct TimeKernel {
    std::vector<double> times;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> weights;  // m x n
  };

  std::shared_ptr<const TimeKernel> time_kernel(std::span<const double> times) const;
  std::vector<double> covariate_log_weights(Covariates l) const;
  double predict_stable(double t, const std::vector<double>& base) const;

  Eigen::MatrixXd points_;  // n x (1 + p): column 0 is u
  Eigen::VectorXd response_;
  Eigen::VectorXd bandwidth_;
  // Time factors of the kernel on the last path grid; paths share the hazard's jump set.
  mutable std::mutex cache_mutex_;
  mutable std::shared_ptr<const TimeKernel> cache_;
};

struct OutcomeOptions {
  NewtonOptions newton;
  /// Multiplies every Silverman bandwidth (kernel learner only).
  double bandwidth_scale = 1.0;
  std::optional<CovariateBox> domain;
};

OutcomePtr fit_outcome(const Dataset& data, OutcomeLearner learner, const OutcomeOptions& options = {});

/// Silverman's rule per dimension, floored at 1e-3 times the range.
Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& points);

// ---------------------------------------------------------------------------
// Learner configuration and cross-fitting
// ---------------------------------------------------------------------------

struct LearnerConfig {
  HazardLearner hazard = HazardLearner::cox;
  OutcomeLearner outcome = OutcomeLearner::linear;
  int flex_degree = 2;
  double bandwidth_scale = 1.0;
  NewtonOptions newton;
};

struct Nuisances {
  StepCumHazard hazard;
  OutcomePtr outcome;
  int fold = -1;
};

/// Falls back to Nelson-Aalen for covariate-free data when a Cox learner is requested.
StepCumHazard fit_hazard(const Dataset& data, const LearnerConfig& config, std::span<const double> weights = {},
                         const std::optional<CovariateBox>& domain = std::nullopt);

Nuisances fit_nuisances(const Dataset& train, const LearnerConfig& config,
                        const std::optional<CovariateBox>& domain = std::nullopt);

/// One nuisance pair per fold k, fitted on the units outside fold k. Every
/// pair carries the full-sample covariate box as its domain.
std::vector<Nuisances> fit_cross_nuisances(const Dataset& data, const FoldPlan& plan, const LearnerConfig& config);

}  // namespace ihaz
