#include "ihaz/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ihaz {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::input: return "input error";
    case ErrorKind::config: return "config error";
    case ErrorKind::convergence: return "convergence error";
    case ErrorKind::separation: return "separation error";
    case ErrorKind::rank: return "rank error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::degenerate_variance: return "degenerate variance";
  }
  return "error";
}

// ---------------------------------------------------------------------------

CovariateBox::CovariateBox(std::vector<double> lo, std::vector<double> hi)
    : lo_(std::move(lo)), hi_(std::move(hi)), bounded_(true) {
  if (lo_.size() != hi_.size()) fail(ErrorKind::argument, "covariate box bounds differ in size");
  for (std::size_t k = 0; k < lo_.size(); ++k) {
    if (!(lo_[k] <= hi_[k])) fail(ErrorKind::argument, "covariate box has lo > hi");
  }
}

CovariateBox CovariateBox::of(const std::vector<ObservedUnit>& units) {
  if (units.empty()) return {};
  const std::size_t p = units.front().l.size();
  std::vector<double> lo(p, std::numeric_limits<double>::infinity());
  std::vector<double> hi(p, -std::numeric_limits<double>::infinity());
  for (const auto& u : units) {
    for (std::size_t k = 0; k < p; ++k) {
      lo[k] = std::min(lo[k], u.l[k]);
      hi[k] = std::max(hi[k], u.l[k]);
    }
  }
  return {std::move(lo), std::move(hi)};
}

bool CovariateBox::contains(Covariates l) const {
  if (!bounded_) return true;
  if (l.size() != lo_.size()) return false;
  for (std::size_t k = 0; k < l.size(); ++k) {
    if (!(l[k] >= lo_[k] && l[k] <= hi_[k])) return false;
  }
  return true;
}

void CovariateBox::require(Covariates l, const char* who) const {
  if (contains(l)) return;
  std::ostringstream os;
  os << who << ": covariate vector (";
  for (std::size_t k = 0; k < l.size(); ++k) os << (k ? ", " : "") << l[k];
  os << ") outside the declared covariate domain";
  fail(ErrorKind::domain, os.str());
}

// ---------------------------------------------------------------------------

void validate_unit(const ObservedUnit& unit, double tau, std::size_t dim, std::size_t row) {
  auto bad = [&](const std::string& what) {
    std::ostringstream os;
    os << "row " << row << ": " << what;
    fail(ErrorKind::input, os.str());
  };
  if (!std::isfinite(unit.y)) bad("y is not finite");
  if (!std::isfinite(unit.u)) bad("u is not finite");
  if (unit.u < 0.0) bad("u < 0");
  if (unit.u > tau) bad("u exceeds tau");
  if (unit.delta != 0 && unit.delta != 1) bad("delta must be 0 or 1");
  if (unit.delta == 1 && !(unit.u < tau)) bad("delta = 1 requires u < tau");
  if (unit.delta == 0 && unit.u != tau) bad("delta = 0 requires u = tau");
  if (unit.l.size() != dim) bad("covariate dimension mismatch");
  for (std::size_t k = 0; k < unit.l.size(); ++k) {
    if (!std::isfinite(unit.l[k])) bad("covariate l" + std::to_string(k + 1) + " is not finite");
  }
}

Dataset::Dataset(std::vector<ObservedUnit> units, double tau) : units_(std::move(units)), tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::argument, "tau must be positive and finite");
  dim_ = units_.empty() ? 0 : units_.front().l.size();
  for (std::size_t i = 0; i < units_.size(); ++i) validate_unit(units_[i], tau_, dim_, i + 1);
  box_ = CovariateBox::of(units_);
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  std::vector<ObservedUnit> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(units_.at(i));
  return {std::move(out), tau_};
}

std::vector<double> Dataset::outcomes() const {
  std::vector<double> y(units_.size());
  for (std::size_t i = 0; i < units_.size(); ++i) y[i] = units_[i].y;
  return y;
}

// ---------------------------------------------------------------------------

namespace {

double dot(std::span<const double> a, Covariates b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

HazardShift::HazardShift(Spec spec, double tau, CovariateBox box)
    : spec_(std::move(spec)), tau_(tau), box_(std::move(box)) {}

HazardShift HazardShift::constant(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    fail(ErrorKind::argument, "constant shift must be positive and finite, got " + fmt(theta));
  }
  HazardShift s(ConstantShift{theta}, std::numeric_limits<double>::infinity(),
                CovariateBox::unbounded());
  s.c_low_ = s.c_high_ = theta;
  return s;
}

HazardShift HazardShift::family(double a, double b, std::vector<double> beta, double tau,
                                CovariateBox box) {
  if (!std::isfinite(a) || !std::isfinite(b)) fail(ErrorKind::argument, "family shift a, b must be finite");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::argument, "family shift needs a finite tau");
  bool any_beta = false;
  for (double v : beta) {
    if (!std::isfinite(v)) fail(ErrorKind::argument, "family shift beta must be finite");
    any_beta = any_beta || v != 0.0;
  }
  double log_h_lo = 0.0, log_h_hi = 0.0;
  if (any_beta) {
    if (!box.bounded()) fail(ErrorKind::argument, "family shift with nonzero beta needs a bounded covariate box");
    if (box.dim() != beta.size()) fail(ErrorKind::argument, "family shift beta length does not match covariate dimension");
    for (std::size_t k = 0; k < beta.size(); ++k) {
      const double x = beta[k] * box.lo()[k], y = beta[k] * box.hi()[k];
      log_h_lo += std::min(x, y);
      log_h_hi += std::max(x, y);
    }
  }
  const double g0 = b, g1 = a * tau + b;
  const double g_lo = std::min(g0, g1), g_hi = std::max(g0, g1);
  if (!(g_lo > 0.0)) {
    fail(ErrorKind::argument, "family shift (a t + b) exp(beta' l) is not positive on [0, tau] x box");
  }
  HazardShift s(FamilyShift{a, b, std::move(beta)}, tau, std::move(box));
  s.c_low_ = g_lo * std::exp(log_h_lo);
  s.c_high_ = g_hi * std::exp(log_h_hi);
  if (!std::isfinite(s.c_high_)) fail(ErrorKind::argument, "family shift is unbounded on the covariate box");
  return s;
}

HazardShift HazardShift::tabulated(std::vector<double> times, std::vector<double> values, double tau) {
  if (times.empty() || times.size() != values.size()) {
    fail(ErrorKind::argument, "tabulated shift needs matching nonempty times and values");
  }
  if (times.front() != 0.0) fail(ErrorKind::argument, "tabulated shift must start at t = 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) fail(ErrorKind::argument, "tabulated shift times must be strictly increasing");
  }
  if (!(times.back() < tau)) fail(ErrorKind::argument, "tabulated shift times must lie below tau");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::argument, "tabulated shift values must be positive");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double c_lo = *lo, c_hi = *hi;
  HazardShift s(TabulatedShift{std::move(times), std::move(values)}, tau, CovariateBox::unbounded());
  s.c_low_ = c_lo;
  s.c_high_ = c_hi;
  return s;
}

double HazardShift::constant_value() const {
  if (const auto* c = std::get_if<ConstantShift>(&spec_)) return c->theta;
  fail(ErrorKind::argument, "shift is not constant");
}

double HazardShift::time_factor(double t) const {
  return std::visit(
      [t](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantShift>) {
          return s.theta;
        } else if constexpr (std::is_same_v<S, FamilyShift>) {
          return s.a * t + s.b;
        } else {
          auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
          return s.values[static_cast<std::size_t>(it - s.times.begin()) - 1];
        }
      },
      spec_);
}

double HazardShift::covariate_factor(Covariates l) const {
  if (const auto* f = std::get_if<FamilyShift>(&spec_)) {
    if (f->beta.empty()) return 1.0;
    if (l.size() != f->beta.size()) fail(ErrorKind::domain, "family shift: covariate dimension mismatch");
    return std::exp(dot(f->beta, l));
  }
  return 1.0;
}

double HazardShift::operator()(double t, Covariates l) const {
  if (!(t >= 0.0 && t <= tau_)) fail(ErrorKind::domain, "shift evaluated at t = " + fmt(t) + " outside [0, tau]");
  box_.require(l, "shift");
  return time_factor(t) * covariate_factor(l);
}

double HazardShift::integral(double t, Covariates l) const {
  const double h = covariate_factor(l);
  return std::visit(
      [t, h](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantShift>) {
          return s.theta * t;
        } else if constexpr (std::is_same_v<S, FamilyShift>) {
          return h * (0.5 * s.a * t * t + s.b * t);
        } else {
          double acc = 0.0;
          for (std::size_t k = 0; k < s.times.size() && s.times[k] < t; ++k) {
            const double end = k + 1 < s.times.size() ? std::min(s.times[k + 1], t) : t;
            acc += s.values[k] * (end - s.times[k]);
          }
          return acc;
        }
      },
      spec_);
}

std::string HazardShift::describe() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantShift>) {
          return "constant(" + fmt(s.theta) + ")";
        } else if constexpr (std::is_same_v<S, FamilyShift>) {
          std::string out = "family(a=" + fmt(s.a) + ", b=" + fmt(s.b) + ", beta=[";
          for (std::size_t k = 0; k < s.beta.size(); ++k) out += (k ? "," : "") + fmt(s.beta[k]);
          return out + "])";
        } else {
          return "tabulated(" + std::to_string(s.times.size()) + " pieces)";
        }
      },
      spec_);
}

// ---------------------------------------------------------------------------

ThetaGrid::ThetaGrid(std::vector<double> idx, std::vector<HazardShift> sh)
    : index(std::move(idx)), shifts(std::move(sh)) {
  if (shifts.empty()) fail(ErrorKind::argument, "theta grid is empty");
  if (index.size() != shifts.size()) fail(ErrorKind::argument, "theta grid index/shift size mismatch");
  for (std::size_t g = 1; g < index.size(); ++g) {
    if (!(index[g] > index[g - 1])) fail(ErrorKind::argument, "theta grid must be strictly increasing");
  }
}

ThetaGrid ThetaGrid::constant_range(double lo, double hi, std::size_t count) {
  if (count == 0) fail(ErrorKind::argument, "theta grid is empty");
  if (!(lo > 0.0) || !(hi >= lo)) fail(ErrorKind::argument, "theta grid needs 0 < lo <= hi");
  if (count == 1 && lo != hi) fail(ErrorKind::argument, "a one-point theta grid needs lo == hi");
  std::vector<double> values(count);
  for (std::size_t g = 0; g < count; ++g) {
    values[g] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(count - 1);
  }
  return constants(std::move(values));
}

ThetaGrid ThetaGrid::constants(std::vector<double> values) {
  std::vector<HazardShift> shifts;
  shifts.reserve(values.size());
  for (double v : values) shifts.push_back(HazardShift::constant(v));
  return {std::move(values), std::move(shifts)};
}

bool ThetaGrid::contains_identity() const {
  for (const auto& s : shifts) {
    if (s.is_constant() && s.constant_value() == 1.0) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

void StepCumHazard::check_times() const {
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) fail(ErrorKind::argument, "hazard horizon tau must be positive");
  if (times_.size() != base_.size()) fail(ErrorKind::argument, "hazard jump times and increments differ in length");
  for (std::size_t j = 0; j < times_.size(); ++j) {
    if (!(times_[j] > 0.0 && times_[j] < tau_)) fail(ErrorKind::argument, "hazard jump times must lie in (0, tau)");
    if (j > 0 && !(times_[j] > times_[j - 1])) fail(ErrorKind::argument, "hazard jump times must be strictly increasing");
    if (!(base_[j] >= 0.0) || !std::isfinite(base_[j])) fail(ErrorKind::argument, "hazard increments must be finite and nonnegative");
  }
}

StepCumHazard StepCumHazard::covariate_free(double tau, std::vector<double> times,
                                            std::vector<double> increments) {
  StepCumHazard h;
  h.kind_ = Kind::covariate_free;
  h.tau_ = tau;
  h.times_ = std::move(times);
  h.base_ = std::move(increments);
  h.check_times();
  return h;
}

StepCumHazard StepCumHazard::proportional(double tau, std::vector<double> times, std::vector<double> base,
                                          Eigen::MatrixXd coef, CovariateBox box) {
  StepCumHazard h;
  h.kind_ = Kind::proportional;
  h.tau_ = tau;
  h.times_ = std::move(times);
  h.base_ = std::move(base);
  h.coef_ = std::move(coef);
  h.box_ = std::move(box);
  if (h.coef_.rows() < 1) fail(ErrorKind::argument, "proportional hazard needs at least one coefficient row");
  h.check_times();
  return h;
}

StepCumHazard StepCumHazard::custom(double tau, std::vector<double> times, std::vector<double> base,
                                    Multiplier multiplier, CovariateBox box) {
  StepCumHazard h;
  h.kind_ = Kind::custom;
  h.tau_ = tau;
  h.times_ = std::move(times);
  h.base_ = std::move(base);
  h.multiplier_ = std::move(multiplier);
  h.box_ = std::move(box);
  h.check_times();
  return h;
}

bool StepCumHazard::separable() const {
  return kind_ == Kind::covariate_free || (kind_ == Kind::proportional && coef_.rows() == 1);
}

double StepCumHazard::risk(Covariates l) const {
  if (kind_ == Kind::covariate_free) return 1.0;
  if (!separable()) fail(ErrorKind::argument, "risk(l) requested from a time-varying hazard");
  box_.require(l, "cumulative hazard");
  if (static_cast<std::size_t>(coef_.cols()) != l.size()) fail(ErrorKind::domain, "cumulative hazard: covariate dimension mismatch");
  double eta = 0.0;
  for (Eigen::Index k = 0; k < coef_.cols(); ++k) eta += coef_(0, k) * l[static_cast<std::size_t>(k)];
  return std::exp(eta);
}

std::vector<double> StepCumHazard::increments(Covariates l) const {
  std::vector<double> out(times_.size());
  switch (kind_) {
    case Kind::covariate_free:
      std::copy(base_.begin(), base_.end(), out.begin());
      break;
    case Kind::proportional: {
      box_.require(l, "cumulative hazard");
      if (static_cast<std::size_t>(coef_.cols()) != l.size()) fail(ErrorKind::domain, "cumulative hazard: covariate dimension mismatch");
      Eigen::VectorXd eta_by_power(coef_.rows());
      for (Eigen::Index d = 0; d < coef_.rows(); ++d) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < coef_.cols(); ++k) s += coef_(d, k) * l[static_cast<std::size_t>(k)];
        eta_by_power[d] = s;
      }
      if (coef_.rows() == 1) {
        const double r = std::exp(eta_by_power[0]);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = base_[j] * r;
      } else {
        for (std::size_t j = 0; j < out.size(); ++j) {
          double eta = 0.0, tp = 1.0;
          for (Eigen::Index d = 0; d < coef_.rows(); ++d) {
            eta += tp * eta_by_power[d];
            tp *= times_[j];
          }
          out[j] = base_[j] * std::exp(eta);
        }
      }
      break;
    }
    case Kind::custom:
      box_.require(l, "cumulative hazard");
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = base_[j] * multiplier_(times_[j], l);
      break;
  }
  double total = 0.0;
  for (double d : out) {
    if (!(d >= 0.0) || !std::isfinite(d)) fail(ErrorKind::numeric, "cumulative hazard increment is not finite");
    total += d;
  }
  if (total > cap_) {
    fail(ErrorKind::numeric, "Lambda(tau | l) = " + fmt(total) + " exceeds the cap " + fmt(cap_));
  }
  return out;
}

std::size_t StepCumHazard::count_upto(double t) const {
  return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
}

double StepCumHazard::cum_hazard(double t, Covariates l) const {
  if (!(t >= 0.0 && t <= tau_)) fail(ErrorKind::domain, "cumulative hazard evaluated at t = " + fmt(t) + " outside [0, tau]");
  const auto inc = increments(l);
  const std::size_t k = count_upto(t);
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += inc[j];
  return s;
}

// ---------------------------------------------------------------------------

double OutcomeModel::predict(double t, Covariates l) const {
  if (!(t >= 0.0 && t <= tau_)) fail(ErrorKind::domain, "outcome model evaluated at t = " + fmt(t) + " outside [0, tau]");
  box_.require(l, "outcome model");
  return predict_unchecked(t, l);
}

void OutcomeModel::predict_path(std::span<const double> times, Covariates l, std::span<double> out) const {
  for (double t : times) {
    if (!(t >= 0.0 && t <= tau_)) fail(ErrorKind::domain, "outcome model evaluated at t = " + fmt(t) + " outside [0, tau]");
  }
  box_.require(l, "outcome model");
  predict_path_unchecked(times, l, out);
}

void OutcomeModel::predict_path_unchecked(std::span<const double> times, Covariates l,
                                          std::span<double> out) const {
  for (std::size_t j = 0; j < times.size(); ++j) out[j] = predict_unchecked(times[j], l);
}

FunctionOutcome::FunctionOutcome(Fn fn, double tau, std::string name, CovariateBox box)
    : OutcomeModel(tau, std::move(box)), fn_(std::move(fn)), name_(std::move(name)) {}

OutcomePtr constant_outcome(double value, double tau) {
  return std::make_shared<FunctionOutcome>([value](double, Covariates) { return value; }, tau, "constant");
}

}  // namespace ihaz
