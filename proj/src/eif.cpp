#include "ihaz/eif.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ihaz/parallel.hpp"

namespace ihaz {

namespace {

void check_u(const ObservedUnit& unit, double tau) {
  if (!(unit.u >= 0.0 && unit.u <= tau)) {
    fail(ErrorKind::domain, "follow-up time u = " + std::to_string(unit.u) + " outside [0, tau]");
  }
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorKind::numeric, std::string("EIF ") + what + " is not finite");
}

}  // namespace

SubjectProfile make_profile(const ObservedUnit& unit, const StepCumHazard& hazard, const OutcomeModel* outcome) {
  check_u(unit, hazard.tau());
  SubjectProfile p;
  p.times = hazard.times();
  p.dlam = hazard.increments(unit.l);
  const std::size_t m = p.dlam.size();
  p.lam.resize(m);
  p.exp_lam.resize(m);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    acc += p.dlam[j];
    p.lam[j] = acc;
    p.exp_lam[j] = std::exp(acc);
  }
  p.k_u = hazard.count_upto(unit.u);
  if (outcome != nullptr) {
    p.mu.resize(m);
    outcome->predict_path(p.times, unit.l, p.mu);
    p.mu_tau = outcome->predict(hazard.tau(), unit.l);
    for (double v : p.mu) require_finite(v, "outcome prediction");
    require_finite(p.mu_tau, "outcome prediction");
  }
  return p;
}

ShiftValues shift_values(const HazardShift& shift, const ObservedUnit& unit, std::span<const double> times) {
  ShiftValues out;
  out.at_u = shift(unit.u, unit.l);
  const double h = shift.covariate_factor(unit.l);
  out.at_jumps.resize(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] > shift.tau()) fail(ErrorKind::domain, "shift evaluated beyond its horizon");
    out.at_jumps[j] = shift.time_factor(times[j]) * h;
  }
  return out;
}

EifTerms eif_terms(const ObservedUnit& unit, const SubjectProfile& p, const ShiftValues& theta) {
  const std::size_t m = p.dlam.size();
  const std::size_t k = p.k_u;
  const bool has_mu = !p.mu.empty();
  const double* th = theta.at_jumps.data();

  double shifted = 0.0;  // sum_{j < k} (theta_j - 1) dLambda_j
  for (std::size_t j = 0; j < k; ++j) shifted += (th[j] - 1.0) * p.dlam[j];

  EifTerms t;
  t.term1 = unit.y * (unit.delta ? theta.at_u : 1.0) * std::exp(-shifted);

  if (has_mu) {
    // Walk the atoms of S(t) = exp(-sum theta dLambda): G lags by one jump
    // before u and freezes at G_k afterwards.
    double s_prev = 1.0, g = 0.0, e_prev = 1.0;
    double head = 0.0, tail = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double ds = s_prev * std::expm1(-th[j] * p.dlam[j]);
      if (j < k) {
        head += p.mu[j] * g * ds;
        g += (th[j] - 1.0) * (p.exp_lam[j] - e_prev);
      } else {
        tail += p.mu[j] * ds;
      }
      e_prev = p.exp_lam[j];
      s_prev += ds;
    }
    const double terminal = p.mu_tau * -s_prev;
    t.term2 = head + g * (tail + terminal);
    if (unit.delta) {
      const double e_u = k == 0 ? 1.0 : p.exp_lam[k - 1];
      t.term3 = (theta.at_u - 1.0) * e_u * (tail + terminal);
    }
  }
  require_finite(t.term1, "term1");
  require_finite(t.term2, "term2");
  require_finite(t.term3, "term3");
  t.phi = t.term1 - t.term2 + t.term3;
  return t;
}

double eif_constant(const ObservedUnit& unit, const SubjectProfile& p, double theta) {
  const std::size_t m = p.dlam.size();
  const std::size_t k = p.k_u;
  const double lam_u = k == 0 ? 0.0 : p.lam[k - 1];
  const double term1 = unit.y * (unit.delta ? theta : 1.0) * std::exp(-(theta - 1.0) * lam_u);
  if (p.mu.empty() || theta == 1.0) {
    require_finite(term1, "term1");
    return term1;
  }
  // dF has mass e^{-Lambda_{j-1}} (1 - e^{-dLambda_j}) at each jump; kappa
  // integrates theta e^{-(theta-1) Lambda} exactly across the jump.
  double a = 0.0, b = 0.0, lam_prev = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double d = p.dlam[j];
    const double f = std::exp(-lam_prev) * -std::expm1(-d);
    const double kappa = d > 0.0 ? std::expm1(-theta * d) / (theta * std::expm1(-d)) : 1.0;
    const double wb = theta * std::exp(-(theta - 1.0) * lam_prev) * kappa * f;
    const double wa = theta * std::exp(-(theta - 2.0) * lam_prev) * kappa * f;
    if (j < k) a += p.mu[j] * wa;
    b += p.mu[j] * wb;
    lam_prev = p.lam[j];
  }
  const double f_tau = std::exp(-lam_prev);
  b += p.mu_tau * std::exp(-(theta - 1.0) * lam_prev) * f_tau;
  if (!unit.delta) a += p.mu_tau * std::exp(-(theta - 2.0) * lam_prev) * f_tau;
  const double phi = term1 + (theta - 1.0) * a - (theta - 1.0) * b;
  require_finite(phi, "value");
  return phi;
}

// ---------------------------------------------------------------------------

double ipw_weight_loop(const ObservedUnit& unit, const HazardShift& shift, const StepCumHazard& hazard) {
  check_u(unit, hazard.tau());
  const auto inc = hazard.increments(unit.l);
  const auto times = hazard.times();
  const std::size_t k = hazard.count_upto(unit.u);
  const double th_u = shift(unit.u, unit.l);
  const double h = shift.covariate_factor(unit.l);
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += (shift.time_factor(times[j]) * h - 1.0) * inc[j];
  return (unit.delta ? th_u : 1.0) * std::exp(-s);
}

double ipw_weight(const ObservedUnit& unit, const HazardShift& shift, const StepCumHazard& hazard) {
  return IpwEvaluator(hazard, shift).weight(unit);
}

double survival_under_shift(double u, Covariates l, const HazardShift& shift, const StepCumHazard& hazard) {
  if (!(u >= 0.0 && u <= hazard.tau())) fail(ErrorKind::domain, "survival evaluated outside [0, tau]");
  shift.box().require(l, "shift");
  const auto inc = hazard.increments(l);
  const auto times = hazard.times();
  const std::size_t k = hazard.count_upto(u);
  const double h = shift.covariate_factor(l);
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += shift.time_factor(times[j]) * h * inc[j];
  return std::exp(-s);
}

double inner_g(double u_cap, Covariates l, const HazardShift& shift, const StepCumHazard& hazard) {
  if (!(u_cap >= 0.0 && u_cap <= hazard.tau())) fail(ErrorKind::domain, "inner integral cap outside [0, tau]");
  shift.box().require(l, "shift");
  const auto inc = hazard.increments(l);
  const auto times = hazard.times();
  const std::size_t k = hazard.count_upto(u_cap);
  const double h = shift.covariate_factor(l);
  double g = 0.0, lam = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double next = lam + inc[j];
    g += (shift.time_factor(times[j]) * h - 1.0) * (std::exp(next) - std::exp(lam));
    lam = next;
  }
  return g;
}

double eif_value(const ObservedUnit& unit, const HazardShift& shift, const StepCumHazard& hazard,
                 const OutcomeModel& outcome) {
  const auto profile = make_profile(unit, hazard, &outcome);
  return eif_terms(unit, profile, shift_values(shift, unit, profile.times)).phi;
}

double eif_value_constant(const ObservedUnit& unit, double theta, const StepCumHazard& hazard,
                          const OutcomeModel& outcome) {
  if (!(theta > 0.0) || !std::isfinite(theta)) fail(ErrorKind::argument, "constant theta must be positive");
  const auto profile = make_profile(unit, hazard, &outcome);
  return eif_constant(unit, profile, theta);
}

// ---------------------------------------------------------------------------

EifMatrix eif_matrix(const Dataset& data, const ThetaGrid& grid, std::span<const Nuisances> models,
                     std::span<const int> unit_model, const TermsSink& sink) {
  const std::size_t n = data.size(), G = grid.size();
  if (unit_model.size() != n) fail(ErrorKind::argument, "unit-to-model map has the wrong length");
  for (int m : unit_model) {
    if (m < 0 || static_cast<std::size_t>(m) >= models.size()) fail(ErrorKind::argument, "unit mapped to a missing nuisance pair");
  }
  EifMatrix out;
  out.phi.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(G));
  out.model.assign(unit_model.begin(), unit_model.end());
  std::vector<EifTerms> dump(sink ? n * G : 0);
  parallel_for(n, [&](std::size_t i) {
    const auto& unit = data[i];
    const auto& nuis = models[static_cast<std::size_t>(unit_model[i])];
    try {
      const auto profile = make_profile(unit, nuis.hazard, nuis.outcome.get());
      for (std::size_t g = 0; g < G; ++g) {
        const auto terms = eif_terms(unit, profile, shift_values(grid.shifts[g], unit, profile.times));
        out.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = terms.phi;
        if (sink) dump[i * G + g] = terms;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "unit " + std::to_string(i + 1) + ": " + e.what());
    }
  });
  if (sink) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t g = 0; g < G; ++g) sink(i, g, dump[i * G + g]);
    }
  }
  return out;
}

Eigen::MatrixXd ipw_matrix(const Dataset& data, const ThetaGrid& grid, const StepCumHazard& hazard) {
  const std::size_t n = data.size(), G = grid.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(G));
  for (std::size_t g = 0; g < G; ++g) {
    const IpwEvaluator eval(hazard, grid.shifts[g]);
    parallel_for(n, [&](std::size_t i) {
      try {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = data[i].y * eval.weight(data[i]);
      } catch (const Error& e) {
        throw Error(e.kind(), "unit " + std::to_string(i + 1) + ": " + e.what());
      }
    });
  }
  return out;
}

IpwEvaluator::IpwEvaluator(const StepCumHazard& hazard, const HazardShift& shift)
    : hazard_(hazard), shift_(shift), fast_(hazard.separable()) {
  if (!fast_) return;
  const auto times = hazard.times();
  const auto base = hazard.base();
  prefix_gbase_.assign(times.size() + 1, 0.0);
  prefix_base_.assign(times.size() + 1, 0.0);
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] > shift.tau()) fail(ErrorKind::domain, "shift evaluated beyond its horizon");
    prefix_gbase_[j + 1] = prefix_gbase_[j] + shift.time_factor(times[j]) * base[j];
    prefix_base_[j + 1] = prefix_base_[j] + base[j];
  }
}

double IpwEvaluator::weight(const ObservedUnit& unit) const {
  if (!fast_) return ipw_weight_loop(unit, shift_, hazard_);
  check_u(unit, hazard_.tau());
  const double th_u = shift_(unit.u, unit.l);
  const double r = hazard_.risk(unit.l);
  if (r * prefix_base_.back() > hazard_.cap()) {
    fail(ErrorKind::numeric, "Lambda(tau | l) exceeds the cap " + std::to_string(hazard_.cap()));
  }
  const double h = shift_.covariate_factor(unit.l);
  const std::size_t k = hazard_.count_upto(unit.u);
  const double exponent = -(h * r * prefix_gbase_[k] - r * prefix_base_[k]);
  const double w = (unit.delta ? th_u : 1.0) * std::exp(exponent);
  require_finite(w, "weight");
  return w;
}

}  // namespace ihaz
