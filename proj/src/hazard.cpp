#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ihaz/nuisance.hpp"

namespace ihaz {

namespace {

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

std::vector<double> unit_weights(const Dataset& data, std::span<const double> weights) {
  if (weights.empty()) return std::vector<double>(data.size(), 1.0);
  if (weights.size() != data.size()) fail(ErrorKind::argument, "weight vector length does not match the data");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::argument, "weights must be finite and nonnegative");
  }
  return {weights.begin(), weights.end()};
}

/// Distinct event times with weighted event and at-risk totals.
struct RiskTable {
  std::vector<double> times;
  std::vector<double> events;
  std::vector<double> at_risk;
};

RiskTable risk_table(const Dataset& data, const std::vector<double>& w) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data[a].u < data[b].u; });

  RiskTable table;
  double remaining = 0.0;
  for (double x : w) remaining += x;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double t = data[order[pos]].u;
    double d = 0.0, leaving = 0.0;
    bool any_event = false;
    std::size_t end = pos;
    while (end < order.size() && data[order[end]].u == t) {
      const auto i = order[end];
      leaving += w[i];
      if (data[i].delta == 1) {
        d += w[i];
        any_event = true;
      }
      ++end;
    }
    if (any_event) {
      table.times.push_back(t);
      table.events.push_back(d);
      table.at_risk.push_back(remaining);
    }
    remaining -= leaving;
    pos = end;
  }
  return table;
}

}  // namespace

StepCumHazard fit_nelson_aalen(const Dataset& data, std::span<const double> weights) {
  if (data.empty()) fail(ErrorKind::argument, "Nelson-Aalen needs at least one unit");
  const auto w = unit_weights(data, weights);
  auto table = risk_table(data, w);
  std::vector<double> inc(table.times.size());
  for (std::size_t j = 0; j < inc.size(); ++j) {
    inc[j] = table.at_risk[j] > 0.0 ? table.events[j] / table.at_risk[j] : 0.0;
  }
  return StepCumHazard::covariate_free(data.tau(), std::move(table.times), std::move(inc));
}

StepCumHazard fit_km_log(const Dataset& data, std::span<const double> weights) {
  if (data.empty()) fail(ErrorKind::argument, "Kaplan-Meier needs at least one unit");
  const auto w = unit_weights(data, weights);
  auto table = risk_table(data, w);
  std::vector<double> inc(table.times.size());
  for (std::size_t j = 0; j < inc.size(); ++j) {
    if (!(table.at_risk[j] > 0.0)) continue;
    const double frac = table.events[j] / table.at_risk[j];
    if (frac >= 1.0) fail(ErrorKind::numeric, "Kaplan-Meier curve reaches zero before tau; -log S is infinite");
    inc[j] = -std::log1p(-frac);
  }
  return StepCumHazard::covariate_free(data.tau(), std::move(table.times), std::move(inc));
}

// ---------------------------------------------------------------------------
// Cox regression
// ---------------------------------------------------------------------------

std::vector<double> CoxFit::beta() const {
  std::vector<double> b(static_cast<std::size_t>(coef.cols()));
  for (Eigen::Index k = 0; k < coef.cols(); ++k) b[static_cast<std::size_t>(k)] = coef(0, k);
  return b;
}

namespace {

class CoxProblem {
 public:
  CoxProblem(const Dataset& data, std::vector<double> w, int degree, bool generic)
      : data_(data), w_(std::move(w)), degree_(degree), generic_(generic || degree > 0) {
    const std::size_t n = data.size(), p = data.dim();
    double wsum = 0.0;
    for (double x : w_) wsum += x;
    center_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < p; ++k) center_[static_cast<Eigen::Index>(k)] += w_[i] * data[i].l[k];
    }
    if (wsum > 0.0) center_ /= wsum;
    x_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < p; ++k) {
        x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            data[i].l[k] - center_[static_cast<Eigen::Index>(k)];
      }
    }
    for (std::size_t k = 0; k < p; ++k) {
      if (x_.col(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff() > 0.0) free_cols_.push_back(k);
    }
    q_ = free_cols_.size() * static_cast<std::size_t>(degree_ + 1);

    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return data[a].u < data[b].u; });
    // Distinct event times and the first sorted position of each risk set.
    std::size_t pos = 0;
    while (pos < n) {
      const double t = data[order_[pos]].u;
      std::size_t end = pos;
      std::vector<std::size_t> events;
      while (end < n && data[order_[end]].u == t) {
        if (data[order_[end]].delta == 1) events.push_back(order_[end]);
        ++end;
      }
      if (!events.empty()) {
        event_times_.push_back(t);
        risk_start_.push_back(pos);
        event_units_.push_back(std::move(events));
      }
      pos = end;
    }
  }

  std::size_t dimension() const { return q_; }
  bool has_events() const { return !event_times_.empty(); }

  struct Eval {
    double loglik = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd info;
    double eta_spread = 0.0;
  };

  Eval evaluate(const Eigen::VectorXd& b) const { return generic_ ? evaluate_generic(b) : evaluate_fast(b); }

  /// Features z(l - center, t) restricted to free columns, ordered by power then covariate.
  void features(std::size_t i, double t, Eigen::VectorXd& z) const {
    const std::size_t pf = free_cols_.size();
    double tp = 1.0;
    for (int d = 0; d <= degree_; ++d) {
      for (std::size_t c = 0; c < pf; ++c) {
        z[static_cast<Eigen::Index>(static_cast<std::size_t>(d) * pf + c)] =
            tp * x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(free_cols_[c]));
      }
      tp *= t;
    }
  }

  Eigen::MatrixXd full_coef(const Eigen::VectorXd& b) const {
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(degree_ + 1, static_cast<Eigen::Index>(data_.dim()));
    const std::size_t pf = free_cols_.size();
    for (int d = 0; d <= degree_; ++d) {
      for (std::size_t c = 0; c < pf; ++c) {
        coef(d, static_cast<Eigen::Index>(free_cols_[c])) = b[static_cast<Eigen::Index>(static_cast<std::size_t>(d) * pf + c)];
      }
    }
    return coef;
  }

  /// Breslow increments at l = 0 for the full coefficient matrix.
  std::vector<double> baseline(const Eigen::MatrixXd& coef) const {
    const std::size_t n = data_.size();
    std::vector<double> base(event_times_.size());
    auto eta_at = [&](std::size_t i, double t) {
      double eta = 0.0, tp = 1.0;
      for (Eigen::Index d = 0; d < coef.rows(); ++d) {
        for (Eigen::Index k = 0; k < coef.cols(); ++k) eta += tp * coef(d, k) * data_[i].l[static_cast<std::size_t>(k)];
        tp *= t;
      }
      return eta;
    };
    if (coef.rows() == 1) {
      // Suffix sums over the ascending order.
      std::vector<double> suffix(n + 1, 0.0);
      for (std::size_t s = n; s-- > 0;) {
        const auto i = order_[s];
        suffix[s] = suffix[s + 1] + w_[i] * std::exp(eta_at(i, 0.0));
      }
      for (std::size_t j = 0; j < event_times_.size(); ++j) {
        double d = 0.0;
        for (auto i : event_units_[j]) d += w_[i];
        base[j] = suffix[risk_start_[j]] > 0.0 ? d / suffix[risk_start_[j]] : 0.0;
      }
    } else {
      for (std::size_t j = 0; j < event_times_.size(); ++j) {
        double d = 0.0, s0 = 0.0;
        for (auto i : event_units_[j]) d += w_[i];
        for (std::size_t s = risk_start_[j]; s < n; ++s) {
          const auto i = order_[s];
          s0 += w_[i] * std::exp(eta_at(i, event_times_[j]));
        }
        base[j] = s0 > 0.0 ? d / s0 : 0.0;
      }
    }
    return base;
  }

  const std::vector<double>& event_times() const { return event_times_; }

 private:
  Eval evaluate_fast(const Eigen::VectorXd& b) const {
    const auto q = static_cast<Eigen::Index>(q_);
    const std::size_t n = data_.size();
    Eval ev;
    ev.grad = Eigen::VectorXd::Zero(q);
    ev.info = Eigen::MatrixXd::Zero(q, q);
    std::vector<double> eta(n);
    Eigen::VectorXd z(q);
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      features(i, 0.0, z);
      eta[i] = z.dot(b);
      lo = i == 0 ? eta[i] : std::min(lo, eta[i]);
      hi = i == 0 ? eta[i] : std::max(hi, eta[i]);
    }
    ev.eta_spread = hi - lo;
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(q, q);
    // Walk event times from the last to the first, growing the risk set.
    std::size_t added = n;
    for (std::size_t jj = event_times_.size(); jj-- > 0;) {
      const std::size_t start = risk_start_[jj];
      while (added > start) {
        --added;
        const auto i = order_[added];
        features(i, 0.0, z);
        const double r = w_[i] * std::exp(eta[i]);
        s0 += r;
        s1.noalias() += r * z;
        s2.noalias() += r * z * z.transpose();
      }
      double dw = 0.0;
      for (auto i : event_units_[jj]) {
        features(i, 0.0, z);
        ev.loglik += w_[i] * eta[i];
        ev.grad.noalias() += w_[i] * z;
        dw += w_[i];
      }
      if (dw == 0.0) continue;
      const Eigen::VectorXd mean = s1 / s0;
      ev.loglik -= dw * std::log(s0);
      ev.grad.noalias() -= dw * mean;
      ev.info.noalias() += dw * (s2 / s0 - mean * mean.transpose());
    }
    return ev;
  }

  Eval evaluate_generic(const Eigen::VectorXd& b) const {
    const auto q = static_cast<Eigen::Index>(q_);
    const std::size_t n = data_.size();
    Eval ev;
    ev.grad = Eigen::VectorXd::Zero(q);
    ev.info = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd z(q);
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t j = 0; j < event_times_.size(); ++j) {
      const double t = event_times_[j];
      double s0 = 0.0;
      Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
      Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(q, q);
      for (std::size_t s = risk_start_[j]; s < n; ++s) {
        const auto i = order_[s];
        features(i, t, z);
        const double eta = z.dot(b);
        if (first) {
          lo = hi = eta;
          first = false;
        }
        lo = std::min(lo, eta);
        hi = std::max(hi, eta);
        const double r = w_[i] * std::exp(eta);
        s0 += r;
        s1.noalias() += r * z;
        s2.noalias() += r * z * z.transpose();
      }
      double dw = 0.0;
      for (auto i : event_units_[j]) {
        features(i, t, z);
        ev.loglik += w_[i] * z.dot(b);
        ev.grad.noalias() += w_[i] * z;
        dw += w_[i];
      }
      if (dw == 0.0) continue;
      const Eigen::VectorXd mean = s1 / s0;
      ev.loglik -= dw * std::log(s0);
      ev.grad.noalias() -= dw * mean;
      ev.info.noalias() += dw * (s2 / s0 - mean * mean.transpose());
    }
    ev.eta_spread = hi - lo;
    return ev;
  }

  const Dataset& data_;
  std::vector<double> w_;
  int degree_;
  bool generic_;
  Eigen::VectorXd center_;
  Eigen::MatrixXd x_;
  std::vector<std::size_t> free_cols_;
  std::size_t q_ = 0;
  std::vector<std::size_t> order_;
  std::vector<double> event_times_;
  std::vector<std::size_t> risk_start_;
  std::vector<std::vector<std::size_t>> event_units_;
};

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(8);
  os << "[";
  for (Eigen::Index k = 0; k < v.size(); ++k) os << (k ? ", " : "") << v[k];
  os << "]";
  return os.str();
}

constexpr double kMaxEtaSpread = 60.0;

}  // namespace

CoxFit fit_cox(const Dataset& data, const CoxOptions& options, std::span<const double> weights) {
  if (data.dim() == 0) fail(ErrorKind::argument, "Cox regression needs at least one covariate");
  if (options.time_degree < 0) fail(ErrorKind::argument, "time_degree must be nonnegative");
  const auto w = unit_weights(data, weights);
  CoxProblem problem(data, w, options.time_degree, options.generic_path);
  if (!problem.has_events()) fail(ErrorKind::argument, "Cox regression needs at least one event");

  const auto q = static_cast<Eigen::Index>(problem.dimension());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
  CoxFit fit;
  auto ev = problem.evaluate(b);
  const double curvature0 = q > 0 ? min_eigenvalue(ev.info) : 0.0;
  int iter = 0;
  while (q > 0 && ev.grad.norm() > options.newton.tol) {
    if (iter >= options.newton.max_iter) {
      fail(ErrorKind::convergence, "Cox Newton-Raphson did not converge in " + std::to_string(iter) +
                                       " iterations; last iterate " + format_vector(b) +
                                       ", gradient norm " + std::to_string(ev.grad.norm()));
    }
    ++iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.info);
    const double scale = ev.info.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(scale, 1e-300)) {
      fail(ErrorKind::rank, "Cox information matrix is singular (collinear covariates?)");
    }
    Eigen::VectorXd step = ldlt.solve(ev.grad);
    Eigen::VectorXd candidate = b + step;
    auto next = problem.evaluate(candidate);
    int halvings = 0;
    while (!(next.loglik >= ev.loglik - 1e-12 * std::abs(ev.loglik)) && halvings < 40) {
      step *= 0.5;
      candidate = b + step;
      next = problem.evaluate(candidate);
      ++halvings;
    }
    b = candidate;
    ev = std::move(next);
    if (ev.eta_spread > kMaxEtaSpread || !std::isfinite(ev.loglik)) {
      fail(ErrorKind::separation, "Cox coefficients diverge (monotone likelihood); last iterate " + format_vector(b));
    }
  }
  // A gradient that vanishes only because the curvature collapsed means the optimum is at infinity.
  if (q > 0 && iter > 0 && min_eigenvalue(ev.info) < 1e-6 * curvature0) {
    fail(ErrorKind::separation, "Cox likelihood is monotone (flat information at the last iterate " + format_vector(b) + ")");
  }
  fit.coef = problem.full_coef(b);
  fit.iterations = iter;
  fit.gradient_norm = q > 0 ? ev.grad.norm() : 0.0;
  fit.loglik = ev.loglik;
  fit.information = ev.info;
  auto base = problem.baseline(fit.coef);
  fit.hazard = StepCumHazard::proportional(data.tau(), problem.event_times(), std::move(base), fit.coef,
                                           options.domain ? *options.domain : data.box());
  return fit;
}

}  // namespace ihaz
