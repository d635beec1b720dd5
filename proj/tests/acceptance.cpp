// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [criterion numbers...]   (default: all of 1-9)
// Every random quantity derives from kSeed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ihaz/eif.hpp"
#include "ihaz/estimators.hpp"
#include "ihaz/inference.hpp"
#include "ihaz/io.hpp"
#include "ihaz/numeric.hpp"
#include "ihaz/nuisance.hpp"
#include "ihaz/sim.hpp"

using namespace ihaz;

namespace {

constexpr std::uint64_t kSeed = 20261016;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double ybar(const Dataset& d) { return mean_of(d.outcomes()); }

// Random step hazard on [0, 2] with one covariate in [0, 2].
StepCumHazard random_hazard(Rng& rng) {
  std::uniform_int_distribution<int> count(1, 40);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int m = count(rng);
  std::vector<double> times, base;
  for (int j = 0; j < m; ++j) times.push_back(2.0 * (j + 0.05 + 0.9 * unif(rng)) / m);
  for (int j = 0; j < m; ++j) base.push_back(2.0 * unif(rng) / m);
  Eigen::MatrixXd coef(1, 1);
  coef(0, 0) = 1.2 * unif(rng) - 0.6;
  return StepCumHazard::proportional(2.0, times, base, coef, CovariateBox({0.0}, {2.0}));
}

OutcomePtr random_outcome(Rng& rng) {
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  const double a = c(rng), b = c(rng), d = c(rng), e = c(rng);
  return std::make_shared<FunctionOutcome>(
      [=](double t, Covariates l) { return a + b * t + d * l[0] + e * std::sin(t * l[0]); }, 2.0);
}

ObservedUnit random_unit(Rng& rng, const StepCumHazard& h) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ObservedUnit x;
  x.y = 4.0 * unif(rng) - 1.0;
  x.l = {2.0 * unif(rng)};
  const double r = unif(rng);
  if (r < 0.3) {
    x.u = 2.0;
    x.delta = 0;
  } else {
    x.delta = 1;
    // Half of the events sit exactly on a jump, as they do for fitted hazards.
    x.u = r < 0.65 && h.size() > 0 ? h.times()[static_cast<std::size_t>(unif(rng) * h.size()) % h.size()]
                                    : 0.01 + 1.98 * unif(rng);
  }
  return x;
}

// -----------------------------------------------------------------------------

Outcome factual_identity() {
  const std::vector<LearnerConfig> learners = [] {
    LearnerConfig a, b = sim::flexible_learners(), c, d;
    c.hazard = HazardLearner::nelson_aalen;
    d.hazard = HazardLearner::km_log;
    d.outcome = OutcomeLearner::kernel;
    return std::vector<LearnerConfig>{a, b, c, d};
  }();
  const sim::Design designs[] = {sim::Design::standard, sim::Design::null_outcome, sim::Design::no_positivity};
  auto rng = make_rng(kSeed, 1);
  std::uniform_int_distribution<std::size_t> size(60, 600);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = sim::draw_dataset(size(rng), stream_seed(kSeed, 100 + rep), designs[rep % 3]);
    const auto& cfg = learners[rep % learners.size()];
    const auto one = ThetaGrid::constants({1.0});
    const auto nu = fit_nuisances(d, cfg);
    const double target = ybar(d);
    worst = std::max(worst, std::abs(estimate_ipw(d, one, nu.hazard).points[0].psi_hat - target));
    worst = std::max(worst, std::abs(estimate_aipw(d, one, nu).points[0].psi_hat - target));
    worst = std::max(worst, std::abs(estimate_cf(d, one, make_folds(d.size(), 5, rep), cfg).points[0].psi_hat - target));
  }
  return {worst <= 1e-12, "20 datasets x {ipw, aipw, aipw_cf}: max |psi_hat(1) - ybar| = " + fmt("%.2e", worst)};
}

Outcome dual_forms() {
  auto rng = make_rng(kSeed, 2);
  std::uniform_real_distribution<double> theta(0.1, 4.0);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto h = random_hazard(rng);
    const auto mu = random_outcome(rng);
    const auto x = random_unit(rng, h);
    const double th = theta(rng);
    worst = std::max(worst, std::abs(eif_value(x, HazardShift::constant(th), h, *mu) - eif_value_constant(x, th, h, *mu)));
  }
  return {worst <= 1e-10, "1000 tuples: max |general - corollary| = " + fmt("%.2e", worst)};
}

Outcome truth_oracle() {
  const std::vector<double> published{1.655, 1.546, 1.635, 1.505, 1.729, 1.774, 1.652, 1.553};
  const auto& scenarios = sim::standard_scenarios();
  bool ok = true;
  double worst_quad = 0.0, worst_z = 0.0;
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const auto s = scenarios[k].shift();
    const double psi = sim::true_psi(s);
    const auto mc = sim::monte_carlo_psi(s, 1'000'000, stream_seed(kSeed, 300 + k));
    const double z = std::abs(mc.mean - psi) / mc.se;
    worst_quad = std::max(worst_quad, std::abs(psi - published[k]));
    worst_z = std::max(worst_z, z);
    ok = ok && std::abs(psi - published[k]) <= 0.001 && z <= 3.0;
  }
  return {ok, "8 scenarios: max |psi - table| = " + fmt("%.5f", worst_quad) + ", max |MC - psi| / SE = " + fmt("%.2f", worst_z)};
}

Outcome replication() {
  bool ok = true;
  std::string detail;
  for (const char* label : {"theta1", "theta5"}) {
    auto spec = sim::find_scenario(label);
    spec.n = 1000;
    spec.R = 300;
    spec.seed = stream_seed(kSeed, 4);
    sim::ReplicationOptions o;  // ipw + cox (Bayesian-bootstrap SE), aipw + cox + linear, oracle
    const auto report = sim::replicate_study(spec, o);
    detail += std::string(label) + ":";
    for (auto k : o.estimators) {
      const auto& r = report.row(k);
      ok = ok && std::abs(r.bias) <= 0.01 && r.cp >= 92.0 && r.cp <= 97.0 && r.failed == 0;
      detail += " " + to_string(k) + "(bias " + fmt("%+.4f", r.bias) + ", sd " + fmt("%.4f", r.sd) + ", cp " +
                fmt("%.1f", r.cp) + ")";
    }
    const bool order = report.row(EstimatorKind::aipw).sd < report.row(EstimatorKind::ipw).sd;
    ok = ok && order;
    detail += order ? " sd_aipw<sd_ipw;" : " sd_aipw>=sd_ipw;";
  }
  return {ok, detail};
}

Outcome band_coverage() {
  const auto betas = io::parse_range("0.2:0.7:26").values();
  std::vector<HazardShift> shifts;
  std::vector<double> truth;
  for (double b : betas) {
    shifts.push_back(sim::scenario_shift(0.3, 0.1, b));
    truth.push_back(sim::true_psi(shifts.back()));
  }
  const ThetaGrid grid(betas, shifts);
  const std::size_t R = 200;
  std::size_t covered = 0, failed = 0;
  double c_sum = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const auto d = sim::draw_dataset(1000, stream_seed(kSeed, 5000 + r));
    BootstrapOptions o;
    o.B = 2000;
    o.seed = stream_seed(kSeed, 6000 + r);
    try {
      const auto band = uniform_band(d, grid, sim::flexible_learners(), 5, o);
      bool all = true;
      for (std::size_t g = 0; g < grid.size(); ++g) all = all && band.lower[g] <= truth[g] && truth[g] <= band.upper[g];
      covered += all;
      c_sum += band.c_alpha;
    } catch (const Error&) {
      ++failed;
    }
  }
  const double rate = 100.0 * covered / (R - failed);
  return {failed == 0 && rate >= 90.0 && rate <= 98.0,
          "R=200, n=1000, G=26, B=2000: uniform coverage " + fmt("%.1f%%", rate) + ", mean c_alpha " +
              fmt("%.3f", c_sum / (R - failed)) + ", failed fits " + std::to_string(failed)};
}

double rejection_rate(sim::Design design, std::size_t n, std::size_t R, std::uint64_t stream, std::size_t& failed) {
  const auto grid = ThetaGrid::constant_range(0.5, 2.0, 16);
  std::size_t reject = 0;
  failed = 0;
  for (std::size_t r = 0; r < R; ++r) {
    const auto d = sim::draw_dataset(n, stream_seed(stream, r), design);
    BootstrapOptions o;
    o.B = 1000;
    o.seed = stream_seed(stream, 100000 + r);
    try {
      reject += uniform_band(d, grid, {}, 5, o).p_value <= 0.05;
    } catch (const Error&) {
      ++failed;
    }
  }
  return 100.0 * reject / (R - failed);
}

Outcome global_null() {
  std::size_t f0 = 0, f1 = 0;
  const double size = rejection_rate(sim::Design::null_outcome, 1000, 200, stream_seed(kSeed, 61), f0);
  const double power = rejection_rate(sim::Design::standard, 5000, 100, stream_seed(kSeed, 62), f1);
  const bool ok = f0 == 0 && f1 == 0 && size >= 2.0 && size <= 9.0 && power >= 95.0;
  return {ok, "theta in [0.5, 2] (16 points): size " + fmt("%.1f%%", size) + " (R=200, n=1000, target [2, 9]), power " +
                  fmt("%.1f%%", power) + " (R=100, n=5000, target >= 95)"};
}

Outcome orthogonality() {
  const auto d = sim::draw_dataset(100000, stream_seed(kSeed, 7));
  const auto truth = sim::oracle_nuisances(2000);
  const auto shift = sim::find_scenario("theta1").shift();
  const std::vector<double> eps{-0.05, -0.025, 0.025, 0.05};
  const double ss = std::inner_product(eps.begin(), eps.end(), eps.begin(), 0.0);
  const auto times = std::vector<double>(truth.hazard.times().begin(), truth.hazard.times().end());
  const auto base = std::vector<double>(truth.hazard.base().begin(), truth.hazard.base().end());

  struct Direction {
    const char* name;
    std::function<double(double, Covariates)> g;  // hazard: dLambda -> dLambda (1 + eps g)
    std::function<double(double, Covariates)> h;  // outcome: mu -> mu + eps h
  };
  const std::vector<Direction> dirs{
      {"scale", [](double, Covariates) { return 1.0; }, [](double, Covariates) { return 0.5; }},
      {"wave", [](double t, Covariates l) { return std::sin(1.5 * t) * (l[0] - 1.0); },
       [](double t, Covariates l) { return std::cos(t + l[0]); }}};

  bool ok = true;
  std::string detail;
  for (const auto& dir : dirs) {
    std::vector<double> slope_eif(d.size(), 0.0), slope_ipw(d.size(), 0.0);
    for (double e : eps) {
      const auto hazard = StepCumHazard::custom(
          2.0, times, base, [&, e](double t, Covariates l) { return std::exp(0.2 * l[0]) * (1.0 + e * dir.g(t, l)); },
          sim::covariate_box());
      const auto* mu0 = truth.outcome.get();
      const FunctionOutcome mu([&, e](double t, Covariates l) { return mu0->predict(t, l) + e * dir.h(t, l); }, 2.0);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& x = d.units()[i];
        slope_eif[i] += e * eif_value(x, shift, hazard, mu) / ss;
        slope_ipw[i] += e * ipw_weight(x, shift, hazard) * x.y / ss;
      }
    }
    auto tstat = [](const std::vector<double>& s) {
      const double m = mean_of(s);
      return m / (sd_sample(s) / std::sqrt(static_cast<double>(s.size())));
    };
    const double te = tstat(slope_eif), ti = tstat(slope_ipw);
    ok = ok && std::abs(te) < 3.0 && std::abs(ti) > 3.0;
    detail += std::string(dir.name) + ": t_eif " + fmt("%+.2f", te) + ", t_ipw " + fmt("%+.1f", ti) + "; ";
  }
  return {ok, "n=1e5, eps in {+-0.05, +-0.025}: " + detail};
}

Outcome cox_recovery() {
  const auto d = sim::draw_dataset(5000, stream_seed(kSeed, 8));
  const double beta = fit_cox(d).beta()[0];

  // Nelson-Aalen on covariate-free data against hand risk-set counts.
  auto rng = make_rng(kSeed, 81);
  std::uniform_int_distribution<int> grid(1, 30);
  std::bernoulli_distribution event(0.7);
  std::vector<ObservedUnit> units;
  for (int i = 0; i < 500; ++i) {
    ObservedUnit x;
    x.y = 0.0;
    const bool e = event(rng);
    x.delta = e;
    x.u = e ? grid(rng) / 16.0 : 2.0;
    units.push_back(x);
  }
  const auto na = fit_nelson_aalen(Dataset(units, 2.0));
  const auto inc = na.increments({});
  bool exact = true;
  for (std::size_t j = 0; j < na.size(); ++j) {
    int dj = 0, rj = 0;
    for (const auto& x : units) {
      rj += x.u >= na.times()[j];
      dj += x.u == na.times()[j] && x.delta == 1;
    }
    exact = exact && inc[j] == static_cast<double>(dj) / rj;
  }
  // The two hand-worked toys.
  const auto toy1 = fit_nelson_aalen(Dataset({{0, 1, 1, {}}, {0, 2, 0, {}}, {0, 2, 0, {}}}, 2.0));
  const auto toy2 = fit_nelson_aalen(Dataset({{0, 0.5, 1, {}}, {0, 1.5, 1, {}}, {0, 2, 0, {}}}, 2.0));
  exact = exact && toy1.increments({}) == std::vector<double>{1.0 / 3.0} &&
          toy2.increments({}) == std::vector<double>{1.0 / 3.0, 1.0 / 2.0};
  return {std::abs(beta - 0.2) <= 0.03 && exact, "n=5000: beta_hat = " + fmt("%.4f", beta) + "; Nelson-Aalen d/r " +
                                                     (exact ? "exact" : "MISMATCH") + " on " + std::to_string(na.size()) +
                                                     " jumps and both toys"};
}

Outcome no_positivity() {
  const auto d = sim::draw_dataset(2000, stream_seed(kSeed, 9), sim::Design::no_positivity);
  std::vector<double> index{0.5, 1.0, 2.0, 0.0};
  std::vector<HazardShift> shifts{HazardShift::constant(0.5), HazardShift::constant(1.0), HazardShift::constant(2.0),
                                  sim::find_scenario("theta1").shift()};
  index.back() = 3.0;
  const ThetaGrid grid(index, shifts);
  const double target = ybar(d);
  bool finite = true;
  double worst = 0.0;
  std::size_t checked = 0;
  auto check = [&](const GridEstimate& e) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      finite = finite && std::isfinite(e.points[g].psi_hat) && std::isfinite(e.points[g].sigma_hat);
      ++checked;
    }
    worst = std::max(worst, std::abs(e.points[1].psi_hat - target));
  };
  for (const auto& cfg : {LearnerConfig{}, sim::flexible_learners()}) {
    const auto nu = fit_nuisances(d, cfg);
    check(estimate_ipw(d, grid, nu.hazard));
    check(estimate_aipw(d, grid, nu));
    check(estimate_cf(d, grid, make_folds(d.size(), 5, kSeed), cfg));
  }
  return {finite && worst <= 1e-12, std::to_string(checked) + " estimates all " + (finite ? "finite" : "NOT finite") +
                                        "; max |psi_hat(1) - ybar| = " + fmt("%.2e", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"factual identity", factual_identity},     {"dual EIF forms", dual_forms},
      {"truth oracle vs table", truth_oracle},    {"reduced-scale replication", replication},
      {"uniform band coverage", band_coverage},   {"global-null size and power", global_null},
      {"Neyman orthogonality", orthogonality},    {"Cox recovery", cox_recovery},
      {"no-positivity robustness", no_positivity}};
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!chosen.empty() && !chosen.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.0fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(), sec);
    std::fflush(stdout);
  }
  std::printf("%d criterion(s) failed\n", failures);
  return 0;
}
