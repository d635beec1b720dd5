#include "ihaz/sim.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "ihaz/inference.hpp"
#include "ihaz/numeric.hpp"
#include "ihaz/parallel.hpp"

namespace ihaz::sim {

CovariateBox covariate_box() { return CovariateBox({0.0}, {kTau}); }

Dataset draw_dataset(std::size_t n, std::uint64_t seed, Design design) {
  if (n == 0) fail(ErrorKind::argument, "draw_dataset needs n >= 1");
  auto rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<ObservedUnit> units(n);
  for (auto& unit : units) {
    const double l = 2.0 * unif(rng);
    const double u0 = 1.0 - unif(rng);  // (0, 1]
    const double rate = design == Design::no_positivity && l > 1.0 ? 0.0 : std::exp(0.2 * l);
    const double t = rate > 0.0 ? -std::log(u0) / rate : std::numeric_limits<double>::infinity();
    unit.l = {l};
    unit.u = std::min(t, kTau);
    unit.delta = t < kTau ? 1 : 0;
    const double center = design == Design::null_outcome ? 1.5 : 3.0 - 0.6 * l - (kTau - unit.u);
    unit.y = center + noise(rng);
  }
  return Dataset(std::move(units), kTau);
}

HazardShift scenario_shift(double a, double b, double beta) {
  return HazardShift::family(a, b, {beta}, kTau, covariate_box());
}

const std::vector<ScenarioSpec>& standard_scenarios() {
  static const std::vector<ScenarioSpec> table = {
      {"theta1", 0.9, 0.3, -0.7}, {"theta2", 0.9, 0.5, -0.7}, {"theta3", 0.7, 0.3, -0.5},
      {"theta4", 0.7, 0.5, -0.5}, {"theta5", 0.5, 0.1, -0.1}, {"theta6", 0.5, 0.1, -0.2},
      {"theta7", 0.3, 0.1, 0.4},  {"theta8", 0.3, 0.1, 0.6},
  };
  return table;
}

ScenarioSpec find_scenario(const std::string& label) {
  for (const auto& s : standard_scenarios()) {
    if (s.label == label) return s;
  }
  fail(ErrorKind::config, "unknown scenario '" + label + "' (theta1 ... theta8)");
}

// ---------------------------------------------------------------------------

namespace {

template <class F>
double integrate(F f, double lo, double hi) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, 1e-12, &err);
  if (!std::isfinite(v) || err > 1e-8) fail(ErrorKind::numeric, "quadrature did not reach the requested accuracy");
  return v;
}

}  // namespace

double true_psi(const HazardShift& shift) {
  if (shift.tau() < kTau) fail(ErrorKind::argument, "shift horizon is shorter than tau = 2");
  shift.box().require(std::vector<double>{0.0}, "shift");
  shift.box().require(std::vector<double>{kTau}, "shift");
  return integrate(
      [&](double l) {
        const std::vector<double> cov{l};
        const double rate = std::exp(0.2 * l);
        const double time_on_control = integrate(
            [&](double v) { return std::exp(-rate * shift.integral(v, cov)); }, 0.0, kTau);
        return 0.5 * (1.0 - 0.6 * l + time_on_control);
      },
      0.0, kTau);
}

double true_untreated_rate() {
  return integrate([](double l) { return 0.5 * std::exp(-kTau * std::exp(0.2 * l)); }, 0.0, kTau);
}

MonteCarlo monte_carlo_psi(const HazardShift& shift, std::size_t draws, std::uint64_t seed) {
  if (draws < 2) fail(ErrorKind::argument, "Monte Carlo needs at least two draws");
  auto rng = make_rng(seed, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<double> y(draws);
  std::vector<double> cov(1);
  for (auto& yi : y) {
    const double l = 2.0 * unif(rng);
    cov[0] = l;
    const double e = expo(rng);
    const double rate = std::exp(0.2 * l);
    // Solve rate * Theta(t, l) = e on [0, 2]; Theta is the shift integral.
    double t;
    if (e >= rate * shift.integral(kTau, cov)) {
      t = kTau;
    } else if (const auto* f = std::get_if<FamilyShift>(&shift.spec())) {
      const double c = rate * shift.covariate_factor(cov);
      t = (2.0 * e / c) / (f->b + std::sqrt(f->b * f->b + 2.0 * f->a * e / c));
    } else if (shift.is_constant()) {
      t = e / (rate * shift.constant_value());
    } else {
      double lo = 0.0, hi = kTau;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate * shift.integral(mid, cov) < e ? lo : hi) = mid;
      }
      t = 0.5 * (lo + hi);
    }
    yi = 3.0 - 0.6 * l - (kTau - std::min(t, kTau)) + noise(rng);
  }
  MonteCarlo out;
  out.mean = mean(y);
  out.se = sd_sample(y) / std::sqrt(static_cast<double>(draws));
  return out;
}

Nuisances oracle_nuisances(std::size_t steps) {
  if (steps == 0) fail(ErrorKind::argument, "oracle discretization needs at least one step");
  const double h = kTau / static_cast<double>(steps);
  std::vector<double> times(steps), base(steps, h);
  for (std::size_t k = 0; k < steps; ++k) times[k] = (static_cast<double>(k) + 0.5) * h;
  Eigen::MatrixXd coef(1, 1);
  coef(0, 0) = 0.2;
  Nuisances out;
  out.hazard = StepCumHazard::proportional(kTau, std::move(times), std::move(base), coef, covariate_box());
  out.outcome = std::make_shared<FunctionOutcome>([](double t, Covariates l) { return 1.0 + t - 0.6 * l[0]; }, kTau,
                                                  "oracle", covariate_box());
  return out;
}

// ---------------------------------------------------------------------------

const ReplicationRow& ReplicationReport::row(EstimatorKind kind) const {
  for (const auto& r : rows) {
    if (r.kind == kind) return r;
  }
  fail(ErrorKind::argument, "report has no row for " + to_string(kind));
}

ReplicationRow summarize_replicates(EstimatorKind kind, std::span<const double> estimates,
                                    std::span<const double> ses, double truth, double alpha) {
  if (estimates.size() != ses.size()) fail(ErrorKind::argument, "estimate/SE length mismatch");
  ReplicationRow row;
  row.kind = kind;
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<double> est, se;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    if (!std::isfinite(estimates[r]) || !std::isfinite(ses[r])) {
      ++row.failed;
      continue;
    }
    est.push_back(estimates[r]);
    se.push_back(ses[r]);
    if (std::abs(estimates[r] - truth) <= z * ses[r]) ++covered;
  }
  row.completed = est.size();
  row.estimates.assign(estimates.begin(), estimates.end());
  row.ses.assign(ses.begin(), ses.end());
  if (est.empty()) return row;
  const double m = mean(est);
  row.bias = m - truth;
  row.pct_bias = 100.0 * row.bias / truth;
  row.sd = sd_sample(est);
  row.avg_se = mean(se);
  row.cp = 100.0 * static_cast<double>(covered) / static_cast<double>(est.size());
  return row;
}

ReplicationReport replicate_study(const ScenarioSpec& spec, const ReplicationOptions& options) {
  if (spec.R < 2) fail(ErrorKind::argument, "replication study needs R >= 2");
  if (options.estimators.empty()) fail(ErrorKind::argument, "no estimators requested");
  const HazardShift shift = spec.shift();
  ReplicationReport report;
  report.spec = spec;
  report.truth = true_psi(shift);

  bool need_oracle = false;
  for (auto k : options.estimators) need_oracle = need_oracle || k == EstimatorKind::oracle;
  const Nuisances oracle = need_oracle ? oracle_nuisances(options.oracle_steps) : Nuisances{};

  const std::size_t E = options.estimators.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> psi(E * spec.R, nan), se(E * spec.R, nan);
  const ThetaGrid grid({0.0}, {shift});

  parallel_for(spec.R, [&](std::size_t r) {
    const std::uint64_t rep_seed = stream_seed(spec.seed, r);
    const Dataset data = draw_dataset(spec.n, rep_seed);
    const double root_n = std::sqrt(static_cast<double>(data.size()));
    for (std::size_t e = 0; e < E; ++e) {
      try {
        EstimateResult res;
        double s = nan;
        switch (options.estimators[e]) {
          case EstimatorKind::ipw: {
            const auto hazard = fit_hazard(data, options.parametric);
            res = estimate_ipw(data, shift, hazard);
            s = options.ipw_bootstrap > 0
                    ? bayesian_bootstrap_se(data, shift, options.parametric, options.ipw_bootstrap, mix64(rep_seed))
                    : res.se();
            break;
          }
          case EstimatorKind::aipw:
            res = estimate_aipw(data, shift, fit_nuisances(data, options.parametric));
            s = res.se();
            break;
          case EstimatorKind::aipw_cf: {
            const auto plan = make_folds(data.size(), options.K, mix64(rep_seed + 1));
            res = estimate_cf(data, grid, plan, options.cross_fit).points.front();
            s = res.se();
            break;
          }
          case EstimatorKind::oracle:
            res = estimate_aipw(data, shift, oracle);
            s = res.sigma_hat / root_n;
            break;
        }
        psi[e * spec.R + r] = res.psi_hat;
        se[e * spec.R + r] = s;
      } catch (const Error&) {
        // recorded as a failed replicate
      }
    }
  });

  for (std::size_t e = 0; e < E; ++e) {
    auto row = summarize_replicates(options.estimators[e], std::span(psi).subspan(e * spec.R, spec.R),
                                    std::span(se).subspan(e * spec.R, spec.R), report.truth, options.alpha);
    if (20 * row.failed > spec.R) {
      fail(ErrorKind::numeric, to_string(row.kind) + ": " + std::to_string(row.failed) + " of " +
                                   std::to_string(spec.R) + " replicates failed");
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ihaz::sim
