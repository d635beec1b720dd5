#include "support.hpp"

#include <algorithm>
#include <map>

#include "ihaz/nuisance.hpp"
#include "ihaz/sim.hpp"

using namespace ihaz;
using fixture::error_kind;
using fixture::unit;

namespace {

std::vector<double> as_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("Nelson-Aalen by hand") {
  SUBCASE("no events") {
    const Dataset d({unit(1, 2, 0), unit(2, 2, 0)}, 2.0);
    const auto h = fit_nelson_aalen(d);
    CHECK(h.size() == 0);
    CHECK(h.cum_hazard(2.0, {}) == 0.0);
  }
  SUBCASE("single jump") {
    const Dataset d({unit(0, 1, 1), unit(0, 2, 0), unit(0, 2, 0)}, 2.0);
    const auto h = fit_nelson_aalen(d);
    CHECK(as_vec(h.times()) == std::vector<double>{1.0});
    CHECK(h.increments({})[0] == 1.0 / 3.0);
  }
  SUBCASE("two jumps") {
    const Dataset d({unit(0, 0.5, 1), unit(0, 1.5, 1), unit(0, 2, 0)}, 2.0);
    const auto h = fit_nelson_aalen(d);
    CHECK(as_vec(h.times()) == std::vector<double>{0.5, 1.5});
    const auto inc = h.increments({});
    CHECK(inc[0] == 1.0 / 3.0);
    CHECK(inc[1] == 1.0 / 2.0);
  }
  SUBCASE("ties and censoring in the risk set") {
    const Dataset d({unit(0, 0.3, 1), unit(0, 0.3, 1), unit(0, 0.9, 1), unit(0, 2, 0), unit(0, 2, 0)}, 2.0);
    const auto inc = fit_nelson_aalen(d).increments({});
    CHECK(inc[0] == 2.0 / 5.0);
    CHECK(inc[1] == 1.0 / 3.0);
  }
}

TEST_CASE("Nelson-Aalen increments equal d/r on random data") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> grid(1, 20);
  std::bernoulli_distribution event(0.6);
  std::vector<ObservedUnit> units;
  for (int i = 0; i < 200; ++i) {
    const bool e = event(rng);
    units.push_back(unit(0.0, e ? grid(rng) * 0.1 - 0.05 : 2.0, e ? 1 : 0));
  }
  const Dataset d(units, 2.0);
  const auto h = fit_nelson_aalen(d);
  const auto inc = h.increments({});
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double t = h.times()[j];
    int dj = 0, rj = 0;
    for (const auto& x : units) {
      rj += x.u >= t;
      dj += x.u == t && x.delta == 1;
    }
    CHECK(inc[j] == static_cast<double>(dj) / rj);
  }
}

TEST_CASE("Cox with all-zero covariates reduces to Nelson-Aalen") {
  const Dataset d({unit(0, 0.5, 1, {0}), unit(0, 1.5, 1, {0}), unit(0, 2, 0, {0}), unit(0, 1.0, 1, {0})}, 2.0);
  const auto fit = fit_cox(d);
  CHECK(fit.beta()[0] == doctest::Approx(0.0).epsilon(1e-12));
  const auto na = fit_nelson_aalen(d).increments({});
  const std::vector<double> l0{0.0};
  const auto cox = fit.hazard.increments(l0);
  REQUIRE(cox.size() == na.size());
  for (std::size_t j = 0; j < na.size(); ++j) CHECK(cox[j] == doctest::Approx(na[j]).epsilon(1e-14));
}

TEST_CASE("Cox matches a grid-search maximiser of the partial likelihood") {
  // Events at 0.5 (l=1), 1.0 (l=0), 1.5 (l=1); the binary covariate keeps the maximiser interior.
  const std::vector<ObservedUnit> units{unit(0, 0.5, 1, {1}), unit(0, 1.0, 1, {0}), unit(0, 1.5, 1, {1}),
                                        unit(0, 2, 0, {0}), unit(0, 2, 0, {1}), unit(0, 2, 0, {0})};
  const Dataset d(units, 2.0);
  auto loglik = [&](double b) {
    double ll = 0.0;
    for (const auto& e : units) {
      if (e.delta != 1) continue;
      double risk = 0.0;
      for (const auto& r : units) {
        if (r.u >= e.u) risk += std::exp(b * r.l[0]);
      }
      ll += b * e.l[0] - std::log(risk);
    }
    return ll;
  };
  double best = -10.0;
  for (double b = -10.0; b <= 10.0; b += 1e-5) {
    if (loglik(b) > loglik(best)) best = b;
  }
  const auto fit = fit_cox(d);
  CHECK(fit.beta()[0] == doctest::Approx(best).epsilon(2e-5));
  CHECK(fit.gradient_norm <= 1e-8);
}

TEST_CASE("Cox two-unit toy diverges and reports separation") {
  // Only the l = 1 unit is at risk with the l = 0 unit at the one event; the likelihood is monotone.
  const Dataset d({unit(0, 1, 1, {0}), unit(0, 2, 0, {1})}, 2.0);
  CHECK(error_kind([&] { fit_cox(d); }) == ErrorKind::separation);
}

TEST_CASE("Cox convergence failure") {
  const auto d = sim::draw_dataset(300, 2);
  CoxOptions o;
  o.newton.max_iter = 1;
  o.newton.tol = 1e-14;
  CHECK(error_kind([&] { fit_cox(d, o); }) == ErrorKind::convergence);
}

TEST_CASE("Cox recovers the design coefficient") {
  const auto d = sim::draw_dataset(5000, 20260101);
  const auto fit = fit_cox(d);
  CHECK(std::abs(fit.beta()[0] - 0.2) <= 0.03);
  CHECK(fit.gradient_norm <= 1e-8);
}

TEST_CASE("time-varying Cox generic path agrees with the fast path") {
  const auto d = sim::draw_dataset(400, 9);
  CoxOptions fast, slow;
  slow.generic_path = true;
  const auto a = fit_cox(d, fast), b = fit_cox(d, slow);
  CHECK(a.beta()[0] == doctest::Approx(b.beta()[0]).epsilon(1e-9));
  CoxOptions flex;
  flex.time_degree = 2;
  const auto c = fit_cox(d, flex);
  CHECK(c.coef.rows() == 3);
  CHECK(c.gradient_norm <= 1e-8);
}

TEST_CASE("outcome learners on constant response") {
  std::vector<ObservedUnit> units;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 40; ++i) units.push_back(fixture::random_unit(rng));
  for (auto& x : units) x.y = 2.5;
  const Dataset d(units, 2.0);
  const std::vector<double> l{0.7};
  CHECK(fit_outcome(d, OutcomeLearner::linear)->predict(1.1, l) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit_outcome(d, OutcomeLearner::kernel)->predict(1.1, l) == doctest::Approx(2.5).epsilon(1e-12));
  for (auto& x : units) x.y = 1.0;
  CHECK(error_kind([&] { fit_outcome(Dataset(units, 2.0), OutcomeLearner::logistic); }) == ErrorKind::separation);
}

TEST_CASE("linear outcome reproduces noiseless coefficients") {
  std::vector<ObservedUnit> units;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 60; ++i) {
    auto x = fixture::random_unit(rng);
    x.y = 3.0 - 0.6 * x.l[0] - (2.0 - x.u);
    units.push_back(x);
  }
  const auto m = fit_outcome(Dataset(units, 2.0), OutcomeLearner::linear);
  const auto& glm = dynamic_cast<const GlmOutcome&>(*m);
  CHECK(glm.coef()(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(glm.coef()(1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(glm.coef()(2) == doctest::Approx(-0.6).epsilon(1e-10));
}

TEST_CASE("linear outcome rank error") {
  std::vector<ObservedUnit> units;
  for (int i = 0; i < 5; ++i) units.push_back(unit(i, 1.0, 1, {0.5}));
  CHECK(error_kind([&] { fit_outcome(Dataset(units, 2.0), OutcomeLearner::linear); }) == ErrorKind::rank);
}

TEST_CASE("kernel learner interpolates as the bandwidth shrinks") {
  std::vector<ObservedUnit> units;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) units.push_back(fixture::random_unit(rng));
  OutcomeOptions o;
  o.bandwidth_scale = 1e-4;
  const auto m = fit_outcome(Dataset(units, 2.0), OutcomeLearner::kernel, o);
  for (int i = 0; i < 30; ++i) CHECK(m->predict(units[i].u, units[i].l) == doctest::Approx(units[i].y).epsilon(1e-9));
}

TEST_CASE("logistic outcome") {
  std::vector<ObservedUnit> units;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    auto x = fixture::random_unit(rng);
    x.y = unif(rng) < 1.0 / (1.0 + std::exp(-(-1.0 + 0.5 * x.u + 0.4 * x.l[0]))) ? 1.0 : 0.0;
    units.push_back(x);
  }
  const auto m = fit_outcome(Dataset(units, 2.0), OutcomeLearner::logistic);
  for (double t : {0.0, 1.0, 2.0}) {
    for (double l : {0.5, 1.5}) {
      const std::vector<double> lv{l};
      const double p = m->predict(t, lv);
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
  units[0].y = 0.5;
  CHECK(error_kind([&] { fit_outcome(Dataset(units, 2.0), OutcomeLearner::logistic); }) == ErrorKind::argument);
  // Perfectly separated by u.
  std::vector<ObservedUnit> sep;
  for (int i = 0; i < 20; ++i) sep.push_back(unit(i < 10 ? 0.0 : 1.0, 0.05 + 0.09 * i, 1, {0.3 * (i % 3)}));
  CHECK(error_kind([&] { fit_outcome(Dataset(sep, 2.0), OutcomeLearner::logistic); }) == ErrorKind::separation);
}

TEST_CASE("fold plans") {
  auto sizes = [](const FoldPlan& p) {
    std::map<int, int> s;
    for (int f : p.fold) ++s[f];
    std::vector<int> out;
    for (auto [_, c] : s) out.push_back(c);
    std::sort(out.rbegin(), out.rend());
    return out;
  };
  CHECK(sizes(make_folds(4, 2, 1)) == std::vector<int>{2, 2});
  CHECK(sizes(make_folds(5, 2, 1)) == std::vector<int>{3, 2});
  CHECK(make_folds(100, 5, 9).fold == make_folds(100, 5, 9).fold);
  CHECK(make_folds(100, 5, 9).fold != make_folds(100, 5, 10).fold);
  CHECK(error_kind([] { make_folds(3, 4, 1); }) == ErrorKind::argument);
  CHECK(error_kind([] { make_folds(3, 1, 1); }) == ErrorKind::argument);
  const auto p = make_folds(10, 3, 2);
  for (int k = 0; k < 3; ++k) CHECK(p.members(k).size() + p.complement(k).size() == 10);
}

TEST_CASE("cross-fit nuisances depend only on out-of-fold units") {
  const auto d = sim::draw_dataset(200, 8);
  const auto plan = make_folds(d.size(), 2, 3);
  LearnerConfig cfg;
  const auto base = fit_cross_nuisances(d, plan, cfg);

  // Permute the responses and times inside fold 0: the fold-0 nuisances (trained on fold 1) must not move.
  auto units = d.units();
  const auto members = plan.members(0);
  std::vector<ObservedUnit> shuffled;
  for (auto i : members) shuffled.push_back(units[i]);
  std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
  for (std::size_t k = 0; k < members.size(); ++k) units[members[k]] = shuffled[k];
  const auto moved = fit_cross_nuisances(Dataset(units, d.tau()), plan, cfg);

  const std::vector<double> l{0.9};
  CHECK(base[0].outcome->predict(1.2, l) == moved[0].outcome->predict(1.2, l));
  CHECK(base[0].hazard.cum_hazard(1.7, l) == moved[0].hazard.cum_hazard(1.7, l));
  CHECK(base[1].outcome->predict(1.2, l) != moved[1].outcome->predict(1.2, l));
}

TEST_CASE("learner names round-trip") {
  for (auto h : {HazardLearner::nelson_aalen, HazardLearner::km_log, HazardLearner::cox, HazardLearner::cox_flex}) {
    CHECK(parse_hazard_learner(to_string(h)) == h);
  }
  for (auto o : {OutcomeLearner::linear, OutcomeLearner::logistic, OutcomeLearner::kernel}) {
    CHECK(parse_outcome_learner(to_string(o)) == o);
  }
  CHECK(error_kind([] { parse_hazard_learner("forest"); }) == ErrorKind::config);
}

TEST_CASE("kernel path prediction matches pointwise prediction") {
  const auto d = sim::draw_dataset(300, 12);
  const auto m = fit_outcome(d, OutcomeLearner::kernel);
  std::vector<double> times;
  for (int j = 0; j < 50; ++j) times.push_back(0.04 * j);
  for (double l : {0.1, 1.0, 1.9}) {
    const std::vector<double> lv{l};
    std::vector<double> path(times.size());
    m->predict_path(times, lv, path);
    m->predict_path(times, lv, path);  // second call reuses the cached time factors
    for (std::size_t j = 0; j < times.size(); ++j) CHECK(path[j] == doctest::Approx(m->predict(times[j], lv)).epsilon(1e-12));
  }
}
