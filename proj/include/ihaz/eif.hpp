#pragma once

// Per-subject identification weights and efficient influence function values,
// computed as exact sums over the atoms of the step hazard plus the terminal
// atom at tau.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ihaz/core.hpp"
#include "ihaz/nuisance.hpp"

namespace ihaz {

/// Quantities of one subject that do not depend on the shift.
struct SubjectProfile {
  std::span<const double> times;  // global jump times
  std::vector<double> dlam;       // dLambda_j(l)
  std::vector<double> lam;        // Lambda(t_j | l)
  std::vector<double> exp_lam;    // exp(Lambda(t_j | l))
  std::vector<double> mu;         // mu(t_j, l); empty without an outcome model
  double mu_tau = 0.0;            // mu(tau, l)
  std::size_t k_u = 0;            // number of jumps <= u
};

SubjectProfile make_profile(const ObservedUnit& unit, const StepCumHazard& hazard, const OutcomeModel* outcome);

/// theta(t_j, l) for every jump and theta(u, l) of one subject.
struct ShiftValues {
  std::vector<double> at_jumps;
  double at_u = 1.0;
};

ShiftValues shift_values(const HazardShift& shift, const ObservedUnit& unit, std::span<const double> times);

struct EifTerms {
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double phi = 0.0;
};

/// General-theta form: term1 - term2 + term3.
EifTerms eif_terms(const ObservedUnit& unit, const SubjectProfile& profile, const ShiftValues& theta);

/// Constant-theta form built on the distribution function F = 1 - exp(-Lambda).
double eif_constant(const ObservedUnit& unit, const SubjectProfile& profile, double theta);

/// theta(u, l)^delta exp{-sum_{t_j <= u} (theta_j - 1) dLambda_j}
double ipw_weight(const ObservedUnit& unit, const HazardShift& shift, const StepCumHazard& hazard);
/// exp{-sum_{t_j <= u} theta_j dLambda_j}
double survival_under_shift(double u, Covariates l, const HazardShift& shift, const StepCumHazard& hazard);
/// sum_{t_j <= u_cap} (theta_j - 1)(e^{Lambda_j} - e^{Lambda_{j-1}})
double inner_g(double u_cap, Covariates l, const HazardShift& shift, const StepCumHazard& hazard);
double eif_value(const ObservedUnit& unit, const HazardShift& shift, const StepCumHazard& hazard,
                 const OutcomeModel& outcome);
double eif_value_constant(const ObservedUnit& unit, double theta, const StepCumHazard& hazard,
                          const OutcomeModel& outcome);

// ---------------------------------------------------------------------------
// Grid evaluation
// ---------------------------------------------------------------------------

/// Optional per-(unit, grid point) callback receiving the three EIF terms.
using TermsSink = std::function<void(std::size_t unit, std::size_t grid_index, const EifTerms& terms)>;

/// phi(i, g) for every unit and grid point. unit_model[i] selects the nuisance
/// pair used for unit i (all zeros for full-sample fits).
struct EifMatrix {
  Eigen::MatrixXd phi;
  std::vector<int> model;
};

EifMatrix eif_matrix(const Dataset& data, const ThetaGrid& grid, std::span<const Nuisances> models,
                     std::span<const int> unit_model, const TermsSink& sink = {});

/// y_i times the identification weight, n x G.
Eigen::MatrixXd ipw_matrix(const Dataset& data, const ThetaGrid& grid, const StepCumHazard& hazard);

/// Identification weights of every unit under one shift. Separable hazards use
/// prefix sums, so each unit costs O(log m) instead of O(m).
class IpwEvaluator {
 public:
  IpwEvaluator(const StepCumHazard& hazard, const HazardShift& shift);
  double weight(const ObservedUnit& unit) const;
  bool fast() const { return fast_; }

 private:
  const StepCumHazard& hazard_;
  const HazardShift& shift_;
  bool fast_ = false;
  std::vector<double> prefix_gbase_;  // sum_{j <= k} g(t_j) base_j, k = 0..m
  std::vector<double> prefix_base_;   // sum_{j <= k} base_j
};

/// Reference O(m) weight loop; the fast path is checked against it.
double ipw_weight_loop(const ObservedUnit& unit, const HazardShift& shift, const StepCumHazard& hazard);

}  // namespace ihaz
