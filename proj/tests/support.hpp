#pragma once

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ihaz/core.hpp"
#include "ihaz/error.hpp"

namespace fixture {

inline ihaz::ObservedUnit unit(double y, double u, int delta, std::vector<double> l = {}) {
  ihaz::ObservedUnit x;
  x.y = y;
  x.u = u;
  x.delta = delta;
  x.l = std::move(l);
  return x;
}

// Two covariate-free jumps used throughout: 0.5 at t = 0.4 and 0.3 at t = 0.8.
inline ihaz::StepCumHazard two_jumps(double tau = 2.0) {
  return ihaz::StepCumHazard::covariate_free(tau, {0.4, 0.8}, {0.5, 0.3});
}

// Random proportional hazard on [0, tau] with one covariate in [0, 2].
inline ihaz::StepCumHazard random_hazard(std::mt19937_64& rng, double tau = 2.0) {
  std::uniform_int_distribution<int> count(1, 12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int m = count(rng);
  std::vector<double> times, base;
  for (int j = 0; j < m; ++j) times.push_back(tau * (j + 0.2 + 0.6 * unif(rng)) / m);
  for (int j = 0; j < m; ++j) base.push_back(0.6 * unif(rng) / m + 1e-3);
  Eigen::MatrixXd coef(1, 1);
  coef(0, 0) = unif(rng) - 0.5;
  return ihaz::StepCumHazard::proportional(tau, times, base, coef, ihaz::CovariateBox({0.0}, {2.0}));
}

inline ihaz::ObservedUnit random_unit(std::mt19937_64& rng, double tau = 2.0) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const bool event = unif(rng) < 0.7;
  return unit(3.0 * unif(rng) - 1.0, event ? tau * (0.02 + 0.96 * unif(rng)) : tau, event ? 1 : 0, {2.0 * unif(rng)});
}

template <class F>
ihaz::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const ihaz::Error& e) {
    return e.kind();
  }
  FAIL("expected an ihaz::Error");
  return ihaz::ErrorKind::numeric;
}

}  // namespace fixture
