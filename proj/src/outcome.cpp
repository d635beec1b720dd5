#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ihaz/nuisance.hpp"
#include "ihaz/numeric.hpp"
#include "ihaz/parallel.hpp"

namespace ihaz {

std::string to_string(OutcomeLearner learner) {
  switch (learner) {
    case OutcomeLearner::linear: return "linear";
    case OutcomeLearner::logistic: return "logistic";
    case OutcomeLearner::kernel: return "kernel";
  }
  return "?";
}

std::string to_string(HazardLearner learner) {
  switch (learner) {
    case HazardLearner::nelson_aalen: return "nelson-aalen";
    case HazardLearner::km_log: return "km-log";
    case HazardLearner::cox: return "cox";
    case HazardLearner::cox_flex: return "cox-flex";
  }
  return "?";
}

OutcomeLearner parse_outcome_learner(const std::string& name) {
  if (name == "linear") return OutcomeLearner::linear;
  if (name == "logistic") return OutcomeLearner::logistic;
  if (name == "kernel") return OutcomeLearner::kernel;
  fail(ErrorKind::config, "unknown outcome learner '" + name + "' (linear, logistic, kernel)");
}

HazardLearner parse_hazard_learner(const std::string& name) {
  if (name == "nelson-aalen") return HazardLearner::nelson_aalen;
  if (name == "km-log") return HazardLearner::km_log;
  if (name == "cox") return HazardLearner::cox;
  if (name == "cox-flex") return HazardLearner::cox_flex;
  fail(ErrorKind::config, "unknown hazard learner '" + name + "' (cox, nelson-aalen, km-log, cox-flex)");
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd glm_design(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(data.dim());
  Eigen::MatrixXd x(n, p + 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& unit = data[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    x(i, 1) = unit.u;
    for (Eigen::Index k = 0; k < p; ++k) x(i, k + 2) = unit.l[static_cast<std::size_t>(k)];
  }
  return x;
}

double glm_eta(const Eigen::VectorXd& coef, double t, Covariates l) {
  double eta = coef[0] + coef[1] * t;
  for (std::size_t k = 0; k < l.size(); ++k) eta += coef[static_cast<Eigen::Index>(k) + 2] * l[k];
  return eta;
}

double sigmoid(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

constexpr double kMaxLogit = 30.0;

Eigen::VectorXd fit_linear(const Dataset& data) {
  const Eigen::MatrixXd x = glm_design(data);
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = data[static_cast<std::size_t>(i)].y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    fail(ErrorKind::rank, "linear outcome design (1, u, l) is rank deficient (rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(x.cols()) + ")");
  }
  return qr.solve(y);
}

Eigen::VectorXd fit_logistic(const Dataset& data, const NewtonOptions& newton) {
  const Eigen::MatrixXd x = glm_design(data);
  const Eigen::Index n = x.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = data[static_cast<std::size_t>(i)].y;
    if (v != 0.0 && v != 1.0) fail(ErrorKind::argument, "logistic outcome needs y in {0, 1}");
    y[i] = v;
  }
  if (y.minCoeff() == y.maxCoeff()) {
    fail(ErrorKind::separation, "logistic outcome: every response is " + std::to_string(static_cast<int>(y[0])) +
                                    "; the MLE does not exist");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) fail(ErrorKind::rank, "logistic outcome design (1, u, l) is rank deficient");

  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  auto loglik = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + e^eta) computed stably
      const double soft = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
      ll += y[i] * eta[i] - soft;
    }
    return ll;
  };
  double ll = loglik(b);
  for (int iter = 0;; ++iter) {
    const Eigen::VectorXd eta = x * b;
    if (eta.cwiseAbs().maxCoeff() > kMaxLogit) {
      fail(ErrorKind::separation, "logistic outcome: fitted probabilities reach 0 or 1 (separation)");
    }
    Eigen::VectorXd p(n), wdiag(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      wdiag[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd grad = x.transpose() * (y - p);
    if (grad.norm() <= newton.tol) break;
    if (iter >= newton.max_iter) {
      fail(ErrorKind::convergence, "logistic Newton-Raphson did not converge in " + std::to_string(iter) + " iterations");
    }
    const Eigen::MatrixXd info = x.transpose() * wdiag.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) fail(ErrorKind::rank, "logistic information matrix is singular");
    Eigen::VectorXd step = ldlt.solve(grad);
    Eigen::VectorXd candidate = b + step;
    double next = loglik(candidate);
    for (int h = 0; h < 40 && !(next >= ll - 1e-12 * std::abs(ll)); ++h) {
      step *= 0.5;
      candidate = b + step;
      next = loglik(candidate);
    }
    b = candidate;
    ll = next;
  }
  return b;
}

}  // namespace

GlmOutcome::GlmOutcome(Eigen::VectorXd coef, bool logistic, double tau, CovariateBox box)
    : OutcomeModel(tau, std::move(box)), coef_(std::move(coef)), logistic_(logistic) {}

double GlmOutcome::predict_unchecked(double t, Covariates l) const {
  if (l.size() + 2 != static_cast<std::size_t>(coef_.size())) fail(ErrorKind::domain, "outcome model: covariate dimension mismatch");
  const double eta = glm_eta(coef_, t, l);
  return logistic_ ? sigmoid(eta) : eta;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::VectorXd h(points.cols());
  const double factor = 1.06 * std::pow(static_cast<double>(n), -0.2);
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    const auto col = points.col(d);
    const double range = col.maxCoeff() - col.minCoeff();
    if (range <= 0.0) {
      h[d] = 1.0;
      continue;
    }
    const double m = col.mean();
    const double sd = n > 1 ? std::sqrt((col.array() - m).square().sum() / static_cast<double>(n - 1)) : 0.0;
    h[d] = std::max(factor * sd, 1e-3 * range);
  }
  return h;
}

KernelOutcome::KernelOutcome(Eigen::MatrixXd points, Eigen::VectorXd response, Eigen::VectorXd bandwidth,
                             double tau, CovariateBox box)
    : OutcomeModel(tau, std::move(box)),
      points_(std::move(points)),
      response_(std::move(response)),
      bandwidth_(std::move(bandwidth)) {}

double KernelOutcome::predict_unchecked(double t, Covariates l) const {
  return predict_stable(t, covariate_log_weights(l));
}

std::vector<double> KernelOutcome::covariate_log_weights(Covariates l) const {
  const Eigen::Index n = points_.rows();
  if (static_cast<Eigen::Index>(l.size()) + 1 != points_.cols()) fail(ErrorKind::domain, "kernel outcome: covariate dimension mismatch");
  std::vector<double> base(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index d = 1; d < points_.cols(); ++d) {
      const double z = (l[static_cast<std::size_t>(d - 1)] - points_(i, d)) / bandwidth_[d];
      s += z * z;
    }
    base[static_cast<std::size_t>(i)] = -0.5 * s;
  }
  return base;
}

// Log-sum-exp evaluation; safe when every kernel weight underflows.
double KernelOutcome::predict_stable(double t, const std::vector<double>& base) const {
  const Eigen::Index n = points_.rows();
  std::vector<double> logw(static_cast<std::size_t>(n));
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = (t - points_(i, 0)) / bandwidth_[0];
    const double lw = base[static_cast<std::size_t>(i)] - 0.5 * z * z;
    logw[static_cast<std::size_t>(i)] = lw;
    top = std::max(top, lw);
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = std::exp(logw[static_cast<std::size_t>(i)] - top);
    num += w * response_[i];
    den += w;
  }
  return num / den;
}

std::shared_ptr<const KernelOutcome::TimeKernel> KernelOutcome::time_kernel(std::span<const double> times) const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cache_ && std::equal(times.begin(), times.end(), cache_->times.begin(), cache_->times.end())) return cache_;
  auto k = std::make_shared<TimeKernel>();
  k->times.assign(times.begin(), times.end());
  const Eigen::Index n = points_.rows();
  k->weights.resize(static_cast<Eigen::Index>(times.size()), n);
  for (std::size_t j = 0; j < times.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = (times[j] - points_(i, 0)) / bandwidth_[0];
      k->weights(static_cast<Eigen::Index>(j), i) = std::exp(-0.5 * z * z);
    }
  }
  cache_ = k;
  return cache_;
}

void KernelOutcome::predict_path_unchecked(std::span<const double> times, Covariates l,
                                           std::span<double> out) const {
  const auto base = covariate_log_weights(l);
  if (times.size() < 8) {
    for (std::size_t j = 0; j < times.size(); ++j) out[j] = predict_stable(times[j], base);
    return;
  }
  const Eigen::Index n = points_.rows();
  const double top = *std::max_element(base.begin(), base.end());
  Eigen::VectorXd cw(n), cwy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cw[i] = std::exp(base[static_cast<std::size_t>(i)] - top);
    cwy[i] = cw[i] * response_[i];
  }
  const auto kernel = time_kernel(times);
  const Eigen::VectorXd den = kernel->weights * cw;
  const Eigen::VectorXd num = kernel->weights * cwy;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out[j] = den[jj] > 1e-200 ? num[jj] / den[jj] : predict_stable(times[j], base);
  }
}

// ---------------------------------------------------------------------------

OutcomePtr fit_outcome(const Dataset& data, OutcomeLearner learner, const OutcomeOptions& options) {
  if (data.empty()) fail(ErrorKind::argument, "outcome regression needs at least one unit");
  CovariateBox box = options.domain ? *options.domain : data.box();
  switch (learner) {
    case OutcomeLearner::linear:
      return std::make_shared<GlmOutcome>(fit_linear(data), false, data.tau(), std::move(box));
    case OutcomeLearner::logistic:
      return std::make_shared<GlmOutcome>(fit_logistic(data, options.newton), true, data.tau(), std::move(box));
    case OutcomeLearner::kernel: {
      const auto n = static_cast<Eigen::Index>(data.size());
      const auto p = static_cast<Eigen::Index>(data.dim());
      Eigen::MatrixXd pts(n, p + 1);
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& unit = data[static_cast<std::size_t>(i)];
        pts(i, 0) = unit.u;
        for (Eigen::Index k = 0; k < p; ++k) pts(i, k + 1) = unit.l[static_cast<std::size_t>(k)];
        y[i] = unit.y;
      }
      if (!(options.bandwidth_scale > 0.0)) fail(ErrorKind::argument, "bandwidth scale must be positive");
      Eigen::VectorXd h = silverman_bandwidths(pts) * options.bandwidth_scale;
      return std::make_shared<KernelOutcome>(std::move(pts), std::move(y), std::move(h), data.tau(), std::move(box));
    }
  }
  fail(ErrorKind::argument, "unknown outcome learner");
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FoldPlan::members(int k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == k) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement(int k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != k) out.push_back(i);
  }
  return out;
}

FoldPlan make_folds(std::size_t n, std::size_t K, std::uint64_t seed) {
  if (K < 2) fail(ErrorKind::argument, "cross-fitting needs K >= 2");
  if (K > n) fail(ErrorKind::argument, "K = " + std::to_string(K) + " exceeds n = " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(seed, 0x666f6c64ULL);
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldPlan plan;
  plan.n = n;
  plan.K = K;
  plan.seed = seed;
  plan.fold.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) plan.fold[perm[pos]] = static_cast<int>(pos % K);
  return plan;
}

// ---------------------------------------------------------------------------

StepCumHazard fit_hazard(const Dataset& data, const LearnerConfig& config, std::span<const double> weights,
                         const std::optional<CovariateBox>& domain) {
  bool any_event = false;
  for (const auto& u : data.units()) any_event = any_event || u.delta == 1;
  if (!any_event) return StepCumHazard::covariate_free(data.tau(), {}, {});
  switch (config.hazard) {
    case HazardLearner::nelson_aalen: return fit_nelson_aalen(data, weights);
    case HazardLearner::km_log: return fit_km_log(data, weights);
    case HazardLearner::cox:
    case HazardLearner::cox_flex: {
      if (data.dim() == 0) return fit_nelson_aalen(data, weights);
      CoxOptions opt;
      opt.newton = config.newton;
      opt.time_degree = config.hazard == HazardLearner::cox_flex ? config.flex_degree : 0;
      opt.domain = domain;
      return fit_cox(data, opt, weights).hazard;
    }
  }
  fail(ErrorKind::argument, "unknown hazard learner");
}

Nuisances fit_nuisances(const Dataset& train, const LearnerConfig& config, const std::optional<CovariateBox>& domain) {
  Nuisances out;
  out.hazard = fit_hazard(train, config, {}, domain);
  OutcomeOptions opt;
  opt.newton = config.newton;
  opt.bandwidth_scale = config.bandwidth_scale;
  opt.domain = domain;
  out.outcome = fit_outcome(train, config.outcome, opt);
  return out;
}

std::vector<Nuisances> fit_cross_nuisances(const Dataset& data, const FoldPlan& plan, const LearnerConfig& config) {
  if (plan.n != data.size()) fail(ErrorKind::argument, "fold plan size does not match the data");
  std::vector<Nuisances> out(plan.K);
  const CovariateBox domain = data.box();
  parallel_for(plan.K, [&](std::size_t k) {
    const auto train_idx = plan.complement(static_cast<int>(k));
    try {
      const Dataset train = data.subset(train_idx);
      out[k] = fit_nuisances(train, config, domain);
      out[k].fold = static_cast<int>(k);
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(k + 1) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace ihaz
