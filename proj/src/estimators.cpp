#include "ihaz/estimators.hpp"

#include <cmath>

#include "ihaz/numeric.hpp"

namespace ihaz {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::ipw: return "ipw";
    case EstimatorKind::aipw: return "aipw";
    case EstimatorKind::aipw_cf: return "aipw_cf";
    case EstimatorKind::oracle: return "oracle";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "ipw") return EstimatorKind::ipw;
  if (name == "aipw") return EstimatorKind::aipw;
  if (name == "aipw_cf" || name == "cf") return EstimatorKind::aipw_cf;
  if (name == "oracle") return EstimatorKind::oracle;
  fail(ErrorKind::config, "unknown estimator '" + name + "' (ipw, aipw, aipw_cf, oracle)");
}

double EstimateResult::se() const { return n == 0 ? 0.0 : sigma_hat / std::sqrt(static_cast<double>(n)); }

std::vector<double> GridEstimate::psi() const {
  std::vector<double> out;
  for (const auto& p : points) out.push_back(p.psi_hat);
  return out;
}

std::vector<double> GridEstimate::sigma() const {
  std::vector<double> out;
  for (const auto& p : points) out.push_back(p.sigma_hat);
  return out;
}

std::vector<EstimateResult> summarize_columns(const Eigen::MatrixXd& phi, const ThetaGrid& grid, EstimatorKind kind) {
  if (phi.rows() == 0) fail(ErrorKind::argument, "no units to average");
  std::vector<EstimateResult> out;
  std::vector<double> col(static_cast<std::size_t>(phi.rows()));
  for (Eigen::Index g = 0; g < phi.cols(); ++g) {
    for (Eigen::Index i = 0; i < phi.rows(); ++i) col[static_cast<std::size_t>(i)] = phi(i, g);
    EstimateResult r;
    r.kind = kind;
    r.theta = grid.index[static_cast<std::size_t>(g)];
    r.shift = grid.shifts[static_cast<std::size_t>(g)].describe();
    r.psi_hat = mean(col);
    r.sigma_hat = sd_population(col, r.psi_hat);
    r.n = col.size();
    if (!std::isfinite(r.psi_hat) || !std::isfinite(r.sigma_hat)) {
      fail(ErrorKind::numeric, "estimate at grid point " + std::to_string(g + 1) + " is not finite");
    }
    out.push_back(std::move(r));
  }
  return out;
}

GridEstimate estimate_ipw(const Dataset& data, const ThetaGrid& grid, const StepCumHazard& hazard) {
  GridEstimate est;
  est.kind = EstimatorKind::ipw;
  est.grid = grid;
  est.phi = ipw_matrix(data, grid, hazard);
  est.points = summarize_columns(est.phi, grid, est.kind);
  return est;
}

GridEstimate estimate_aipw(const Dataset& data, const ThetaGrid& grid, const Nuisances& nuisances,
                           const TermsSink& sink) {
  GridEstimate est;
  est.kind = EstimatorKind::aipw;
  est.grid = grid;
  const std::vector<int> which(data.size(), 0);
  est.phi = eif_matrix(data, grid, std::span<const Nuisances>(&nuisances, 1), which, sink).phi;
  est.points = summarize_columns(est.phi, grid, est.kind);
  return est;
}

GridEstimate estimate_cf_with(const Dataset& data, const ThetaGrid& grid, const FoldPlan& plan,
                              std::span<const Nuisances> fold_nuisances, const TermsSink& sink) {
  if (plan.n != data.size()) fail(ErrorKind::argument, "fold plan size does not match the data");
  if (fold_nuisances.size() != plan.K) fail(ErrorKind::argument, "need one nuisance pair per fold");
  GridEstimate est;
  est.kind = EstimatorKind::aipw_cf;
  est.grid = grid;
  est.plan = plan;
  est.phi = eif_matrix(data, grid, fold_nuisances, plan.fold, sink).phi;
  est.points = summarize_columns(est.phi, grid, est.kind);
  for (auto& p : est.points) {
    p.K = plan.K;
    p.seed = plan.seed;
  }
  return est;
}

GridEstimate estimate_cf(const Dataset& data, const ThetaGrid& grid, const FoldPlan& plan,
                         const LearnerConfig& config, const TermsSink& sink) {
  const auto nuisances = fit_cross_nuisances(data, plan, config);
  return estimate_cf_with(data, grid, plan, nuisances, sink);
}

GridEstimate estimate_oracle(const Dataset& data, const ThetaGrid& grid, const Nuisances& truth) {
  GridEstimate est = estimate_aipw(data, grid, truth);
  est.kind = EstimatorKind::oracle;
  for (auto& p : est.points) p.kind = EstimatorKind::oracle;
  return est;
}

namespace {
ThetaGrid single(const HazardShift& shift) { return {{shift.is_constant() ? shift.constant_value() : 0.0}, {shift}}; }
}  // namespace

EstimateResult estimate_ipw(const Dataset& data, const HazardShift& shift, const StepCumHazard& hazard) {
  return estimate_ipw(data, single(shift), hazard).points.front();
}

EstimateResult estimate_aipw(const Dataset& data, const HazardShift& shift, const Nuisances& nuisances) {
  return estimate_aipw(data, single(shift), nuisances).points.front();
}

Interval wald_ci(const EstimateResult& result, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::argument, "alpha must lie in (0, 1)");
  const double half = normal_quantile(1.0 - alpha / 2.0) * result.se();
  return {result.psi_hat - half, result.psi_hat + half};
}

}  // namespace ihaz
