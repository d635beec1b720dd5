#pragma once

// Observed-data model, step cumulative hazards, outcome models and hazard
// shifts. Everything here is immutable after construction.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ihaz/error.hpp"

namespace ihaz {

using Covariates = std::span<const double>;

/// One subject: outcome y at the horizon, follow-up u = min(T, tau),
/// treatment indicator delta = 1(u < tau) and baseline covariates l.
struct ObservedUnit {
  double y = 0.0;
  double u = 0.0;
  int delta = 0;
  std::vector<double> l;
};

/// Axis-aligned covariate box. An unbounded box accepts any covariate vector.
class CovariateBox {
 public:
  CovariateBox() = default;
  CovariateBox(std::vector<double> lo, std::vector<double> hi);

  static CovariateBox unbounded() { return {}; }
  static CovariateBox of(const std::vector<ObservedUnit>& units);

  bool bounded() const { return bounded_; }
  std::size_t dim() const { return lo_.size(); }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  bool contains(Covariates l) const;
  void require(Covariates l, const char* who) const;

 private:
  std::vector<double> lo_, hi_;
  bool bounded_ = false;
};

/// A validated sample sharing one horizon tau and one covariate dimension.
class Dataset {
 public:
  Dataset(std::vector<ObservedUnit> units, double tau);

  double tau() const { return tau_; }
  std::size_t size() const { return units_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return units_.empty(); }
  const std::vector<ObservedUnit>& units() const { return units_; }
  const ObservedUnit& operator[](std::size_t i) const { return units_[i]; }
  const CovariateBox& box() const { return box_; }

  Dataset subset(std::span<const std::size_t> idx) const;
  std::vector<double> outcomes() const;

 private:
  std::vector<ObservedUnit> units_;
  double tau_;
  std::size_t dim_ = 0;
  CovariateBox box_;
};

/// Throws ErrorKind::input describing the first violated record invariant.
void validate_unit(const ObservedUnit& unit, double tau, std::size_t dim, std::size_t row);

// ---------------------------------------------------------------------------
// Hazard shifts theta(t, l)
// ---------------------------------------------------------------------------

struct ConstantShift {
  double theta = 1.0;
};

/// (a t + b) exp(beta' l)
struct FamilyShift {
  double a = 0.0;
  double b = 1.0;
  std::vector<double> beta;
};

/// Right-continuous piecewise-constant curve in t: values[k] on [times[k], times[k+1]).
/// times[0] must be 0.
struct TabulatedShift {
  std::vector<double> times;
  std::vector<double> values;
};

/// Multiplicative intervention on the treatment hazard. Every supported kind
/// factors as theta(t, l) = g(t) h(l), which the IPW fast path relies on.
class HazardShift {
 public:
  using Spec = std::variant<ConstantShift, FamilyShift, TabulatedShift>;

  /// Constant shifts are valid for any tau and any covariates.
  static HazardShift constant(double theta);
  /// Fails unless (a t + b) exp(beta' l) > 0 on [0, tau] x box.
  static HazardShift family(double a, double b, std::vector<double> beta, double tau,
                            CovariateBox box);
  static HazardShift tabulated(std::vector<double> times, std::vector<double> values,
                               double tau);

  const Spec& spec() const { return spec_; }
  bool is_constant() const { return std::holds_alternative<ConstantShift>(spec_); }
  double constant_value() const;
  double c_low() const { return c_low_; }
  double c_high() const { return c_high_; }
  double tau() const { return tau_; }
  const CovariateBox& box() const { return box_; }

  /// Checked evaluation; domain error outside [0, tau] x box.
  double operator()(double t, Covariates l) const;

  double time_factor(double t) const;
  double covariate_factor(Covariates l) const;
  /// int_0^t theta(s, l) ds
  double integral(double t, Covariates l) const;

  std::string describe() const;

 private:
  HazardShift(Spec spec, double tau, CovariateBox box);

  Spec spec_;
  double tau_;
  CovariateBox box_;
  double c_low_ = 1.0, c_high_ = 1.0;
};

/// Ordered collection of shifts indexed by a scalar (theta for constant grids,
/// a family parameter otherwise).
struct ThetaGrid {
  std::vector<double> index;
  std::vector<HazardShift> shifts;

  ThetaGrid() = default;
  ThetaGrid(std::vector<double> index, std::vector<HazardShift> shifts);

  static ThetaGrid constant_range(double lo, double hi, std::size_t count);
  static ThetaGrid constants(std::vector<double> values);

  std::size_t size() const { return shifts.size(); }
  bool contains_identity() const;
};

// ---------------------------------------------------------------------------
// Step cumulative hazards
// ---------------------------------------------------------------------------

/// Lambda(t | l) = sum_{t_j <= t} dLambda_j(l) over a global jump set in (0, tau).
///
/// Increments factor as base_j * r(t_j, l); r is one of
///  - 1 (covariate free, e.g. Nelson-Aalen),
///  - exp(sum_d t^d coef.row(d) . l) (Cox, with optional polynomial time
///    interactions),
///  - an arbitrary multiplier function (oracle or externally supplied hazards).
class StepCumHazard {
 public:
  using Multiplier = std::function<double(double t, Covariates l)>;

  static constexpr double kDefaultCap = 50.0;

  StepCumHazard() = default;

  static StepCumHazard covariate_free(double tau, std::vector<double> times,
                                      std::vector<double> increments);
  /// coef has one row per time power (row 0 = constant) and one column per covariate.
  static StepCumHazard proportional(double tau, std::vector<double> times,
                                    std::vector<double> base, Eigen::MatrixXd coef,
                                    CovariateBox box);
  static StepCumHazard custom(double tau, std::vector<double> times, std::vector<double> base,
                              Multiplier multiplier, CovariateBox box);

  double tau() const { return tau_; }
  std::size_t size() const { return times_.size(); }
  std::span<const double> times() const { return times_; }
  std::span<const double> base() const { return base_; }
  const CovariateBox& box() const { return box_; }
  double cap() const { return cap_; }
  void set_cap(double cap) { cap_ = cap; }

  /// True when dLambda_j(l) = base_j * r(l) with r independent of t.
  bool separable() const;
  /// r(l) for separable hazards.
  double risk(Covariates l) const;

  /// dLambda_j(l) for every jump; checks the box and the cap on Lambda(tau | l).
  std::vector<double> increments(Covariates l) const;
  double cum_hazard(double t, Covariates l) const;
  /// Number of jump times <= t.
  std::size_t count_upto(double t) const;

 private:
  enum class Kind { covariate_free, proportional, custom };

  Kind kind_ = Kind::covariate_free;
  double tau_ = 0.0;
  std::vector<double> times_;
  std::vector<double> base_;
  Eigen::MatrixXd coef_;
  Multiplier multiplier_;
  CovariateBox box_;
  double cap_ = kDefaultCap;

  void check_times() const;
};

// ---------------------------------------------------------------------------
// Outcome regressions mu(t, l) = E(Y | U = t, L = l)
// ---------------------------------------------------------------------------

class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;

  double predict(double t, Covariates l) const;
  /// Predictions at several times for one covariate vector.
  void predict_path(std::span<const double> times, Covariates l, std::span<double> out) const;

  virtual std::string learner() const = 0;
  int fold() const { return fold_; }
  void set_fold(int fold) { fold_ = fold; }
  double tau() const { return tau_; }
  const CovariateBox& box() const { return box_; }

 protected:
  OutcomeModel(double tau, CovariateBox box) : tau_(tau), box_(std::move(box)) {}

  virtual double predict_unchecked(double t, Covariates l) const = 0;
  virtual void predict_path_unchecked(std::span<const double> times, Covariates l,
                                      std::span<double> out) const;

 private:
  double tau_;
  CovariateBox box_;
  int fold_ = -1;
};

using OutcomePtr = std::shared_ptr<const OutcomeModel>;

/// Wraps a closed-form regression function (oracle nuisances, tests).
class FunctionOutcome final : public OutcomeModel {
 public:
  using Fn = std::function<double(double t, Covariates l)>;
  FunctionOutcome(Fn fn, double tau, std::string name = "function",
                  CovariateBox box = CovariateBox::unbounded());
  std::string learner() const override { return name_; }

 protected:
  double predict_unchecked(double t, Covariates l) const override { return fn_(t, l); }

 private:
  Fn fn_;
  std::string name_;
};

OutcomePtr constant_outcome(double value, double tau);

}  // namespace ihaz
