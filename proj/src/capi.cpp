#include "ihaz/ihaz.h"

#include <exception>
#include <new>
#include <string>

#include "ihaz/app.hpp"
#include "ihaz/estimators.hpp"
#include "ihaz/io.hpp"
#include "ihaz/parallel.hpp"
#include "ihaz/sim.hpp"

struct ih_dataset {
  ihaz::Dataset data;
};

struct ih_report {
  std::string json, csv, summary;
};

namespace {

thread_local std::string g_error;

ih_status status_of(ihaz::ErrorKind kind) {
  switch (ihaz::app::exit_code(kind)) {
    case 2: return IH_ERR_INPUT;
    case 4: return IH_ERR_CONFIG;
    default: return IH_ERR_NUMERIC;
  }
}

template <class F>
ih_status guarded(F&& f) {
  g_error.clear();
  try {
    f();
    return IH_OK;
  } catch (const ihaz::Error& e) {
    g_error = std::string(ihaz::to_string(e.kind())) + ": " + e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_error = std::string("config error: ") + e.what();
    return IH_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return IH_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return IH_ERR_INTERNAL;
  }
}

ih_status null_arg(const char* what) {
  g_error = std::string("null argument: ") + what;
  return IH_ERR_NULL;
}

}  // namespace

extern "C" {

const char* ih_last_error(void) { return g_error.c_str(); }

const char* ih_version(void) { return "1.0.0"; }

void ih_set_threads(unsigned threads) { ihaz::set_max_threads(threads); }

ih_status ih_dataset_read_csv(const char* path, double tau, ih_dataset** out) {
  if (path == nullptr) return null_arg("path");
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new ih_dataset{ihaz::io::read_csv_file(path, tau)}; });
}

ih_status ih_dataset_from_arrays(size_t n, size_t p, const double* y, const double* u, const int* delta,
                                 const double* l, double tau, ih_dataset** out) {
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  if (n > 0 && (y == nullptr || u == nullptr || delta == nullptr)) return null_arg("y/u/delta");
  if (n > 0 && p > 0 && l == nullptr) return null_arg("l");
  return guarded([&] {
    std::vector<ihaz::ObservedUnit> units(n);
    for (size_t i = 0; i < n; ++i) {
      units[i].y = y[i];
      units[i].u = u[i];
      units[i].delta = delta[i];
      units[i].l.assign(l + i * p, l + i * p + p);
    }
    if (n == 0) ihaz::fail(ihaz::ErrorKind::input, "dataset has no units");
    if (!(tau > 0.0)) ihaz::fail(ihaz::ErrorKind::config, "tau must be positive");
    *out = new ih_dataset{ihaz::Dataset(std::move(units), tau)};
  });
}

size_t ih_dataset_size(const ih_dataset* data) { return data ? data->data.size() : 0; }

size_t ih_dataset_dim(const ih_dataset* data) { return data ? data->data.dim() : 0; }

void ih_dataset_free(ih_dataset* data) { delete data; }

ih_status ih_run(const char* config_json, const ih_dataset* data, ih_report** out) {
  if (config_json == nullptr) return null_arg("config_json");
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      ihaz::fail(ihaz::ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    const auto config = ihaz::app::parse_config(doc);
    auto result = ihaz::app::run(config, data ? &data->data : nullptr);
    *out = new ih_report{result.document.dump(2), std::move(result.csv), std::move(result.summary)};
  });
}

const char* ih_report_json(const ih_report* report) { return report ? report->json.c_str() : ""; }

const char* ih_report_csv(const ih_report* report) { return report ? report->csv.c_str() : ""; }

const char* ih_report_summary(const ih_report* report) { return report ? report->summary.c_str() : ""; }

void ih_report_free(ih_report* report) { delete report; }

ih_status ih_true_psi(const char* shift_json, double* out) {
  if (shift_json == nullptr) return null_arg("shift_json");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(shift_json);
    } catch (const nlohmann::json::parse_error& e) {
      ihaz::fail(ihaz::ErrorKind::config, std::string("shift is not valid JSON: ") + e.what());
    }
    *out = ihaz::sim::true_psi(ihaz::io::parse_shift(doc, ihaz::sim::kTau, ihaz::sim::covariate_box()));
  });
}

ih_status ih_estimate_constant(const ih_dataset* data, double theta, const char* hazard_learner,
                               const char* outcome_learner, size_t K, unsigned long long seed, double* psi_hat,
                               double* se) {
  if (data == nullptr) return null_arg("data");
  if (psi_hat == nullptr || se == nullptr) return null_arg("psi_hat/se");
  return guarded([&] {
    ihaz::LearnerConfig config;
    if (hazard_learner) config.hazard = ihaz::parse_hazard_learner(hazard_learner);
    if (outcome_learner) config.outcome = ihaz::parse_outcome_learner(outcome_learner);
    const auto plan = ihaz::make_folds(data->data.size(), K, seed);
    const auto est = ihaz::estimate_cf(data->data, ihaz::ThetaGrid::constants({theta}), plan, config);
    *psi_hat = est.points.front().psi_hat;
    *se = est.points.front().se();
  });
}

}  // extern "C"
