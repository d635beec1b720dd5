#include "ihaz/app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ihaz/estimators.hpp"
#include "ihaz/inference.hpp"
#include "ihaz/io.hpp"
#include "ihaz/numeric.hpp"
#include "ihaz/parallel.hpp"
#include "ihaz/sim.hpp"

namespace ihaz::app {

namespace {

const std::set<std::string> kCommands = {"estimate", "band", "simulate", "truth", "test-null"};

[[noreturn]] void bad(const std::string& what) { fail(ErrorKind::config, what); }

template <class T>
T get_as(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    bad("config key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) bad("config key '" + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

std::vector<std::string> get_strings(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) bad("config key '" + key + "' must be a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) bad("config key '" + key + "' must be a string or an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

std::string fmt(double v, int prec = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

/// Rethrows library argument errors raised while building user-specified objects as config errors.
template <class F>
auto as_config(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::argument) bad(e.what());
    throw;
  }
}

ThetaGrid build_grid(const RunConfig& c, double tau, const CovariateBox& box, bool required) {
  const int given = c.theta.has_value() + c.theta_grid.has_value() + c.shift.has_value() + c.family_grid.has_value();
  if (given > 1) bad("give only one of theta, theta_grid, shift, family_grid");
  if (given == 0) {
    if (required) bad("no intervention given: set theta, theta_grid, shift or family_grid");
    return {};
  }
  return as_config([&]() -> ThetaGrid {
    if (c.theta) {
      if (c.theta->is_number()) return ThetaGrid::constants({c.theta->get<double>()});
      if (!c.theta->is_array()) bad("theta must be a number or an array of numbers");
      std::vector<double> values;
      for (const auto& v : *c.theta) {
        if (!v.is_number()) bad("theta must be a number or an array of numbers");
        values.push_back(v.get<double>());
      }
      return ThetaGrid::constants(values);
    }
    if (c.theta_grid) {
      const auto r = io::parse_range(*c.theta_grid);
      if (!(r.lo > 0.0)) bad("theta_grid needs lo > 0");
      return ThetaGrid::constant_range(r.lo, r.hi, r.count);
    }
    if (c.shift) {
      std::vector<json> specs;
      if (c.shift->is_array()) {
        for (const auto& s : *c.shift) specs.push_back(s);
      } else {
        specs.push_back(*c.shift);
      }
      std::vector<HazardShift> shifts;
      std::vector<double> index;
      bool all_constant = true;
      for (const auto& s : specs) {
        shifts.push_back(io::parse_shift(s, tau, box));
        all_constant = all_constant && shifts.back().is_constant();
      }
      for (std::size_t g = 0; g < shifts.size(); ++g) {
        index.push_back(all_constant ? shifts[g].constant_value() : static_cast<double>(g));
      }
      return {index, shifts};
    }
    const auto& f = *c.family_grid;
    if (!f.is_object()) bad("family_grid must be an object");
    for (const auto& [k, _] : f.items()) {
      if (k != "a" && k != "b" && k != "beta") bad("unknown key '" + k + "' in family_grid");
    }
    if (!f.contains("a") || !f.contains("b") || !f.contains("beta")) bad("family_grid needs a, b and beta");
    const double a = get_as<double>(f, "a"), b = get_as<double>(f, "b");
    const auto r = io::parse_range(get_as<std::string>(f, "beta"));
    if (box.dim() != 1) bad("family_grid needs exactly one covariate");
    std::vector<HazardShift> shifts;
    for (double beta : r.values()) shifts.push_back(HazardShift::family(a, b, {beta}, tau, box));
    return {r.values(), shifts};
  });
}

Dataset load(const RunConfig& c, const Dataset* data) {
  if (data != nullptr) {
    if (c.tau && *c.tau != data->tau()) bad("config tau differs from the dataset's tau");
    return *data;
  }
  if (c.input.empty()) bad("command '" + c.command + "' needs an input file");
  if (!c.tau) bad("command '" + c.command + "' needs tau");
  return io::read_csv_file(c.input, *c.tau);
}

std::string estimate_table(const std::vector<EstimateResult>& rows, double alpha) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-9s %10s %11s %11s %11s %11s\n", "estimator", "theta", "psi_hat", "se",
                "ci_low", "ci_high");
  os << line;
  for (const auto& r : rows) {
    const auto ci = wald_ci(r, alpha);
    std::snprintf(line, sizeof line, "%-9s %10.4g %11.6f %11.6f %11.6f %11.6f\n", to_string(r.kind).c_str(), r.theta,
                  r.psi_hat, r.se(), ci.lower, ci.upper);
    os << line;
  }
  return os.str();
}

std::string band_table(const BandResult& band) {
  std::ostringstream os;
  os << "c_alpha = " << fmt(band.c_alpha, 4) << "  (alpha " << band.alpha << ", B " << band.B << ", seed " << band.seed
     << ")\n";
  char line[200];
  std::snprintf(line, sizeof line, "%10s %11s %11s %11s\n", "theta", "psi_hat", "lower", "upper");
  os << line;
  for (std::size_t g = 0; g < band.psi_hat.size(); ++g) {
    std::snprintf(line, sizeof line, "%10.4g %11.6f %11.6f %11.6f\n", band.grid.index[g], band.psi_hat[g],
                  band.lower[g], band.upper[g]);
    os << line;
  }
  return os.str();
}

BootstrapOptions bootstrap_options(const RunConfig& c) {
  BootstrapOptions o;
  o.alpha = c.alpha;
  o.B = c.B;
  o.seed = c.seed;
  o.multipliers = c.multipliers == "gaussian" ? MultiplierKind::gaussian : MultiplierKind::rademacher;
  return o;
}

RunOutput run_estimate(const RunConfig& c, const Dataset& data) {
  const ThetaGrid grid = build_grid(c, data.tau(), data.box(), true);
  std::vector<std::string> names = c.estimators.empty() ? std::vector<std::string>{"ipw", "aipw", "aipw_cf"} : c.estimators;
  std::vector<EstimatorKind> kinds;
  for (const auto& name : names) {
    const auto k = parse_estimator(name);
    if (k == EstimatorKind::oracle) bad("the oracle estimator needs known nuisances and is only available in 'simulate'");
    kinds.push_back(k);
  }

  std::ostringstream dump;
  TermsSink sink;
  EstimatorKind dump_kind = EstimatorKind::aipw_cf;
  bool has_cf = false;
  for (auto k : kinds) has_cf = has_cf || k == EstimatorKind::aipw_cf;
  if (!c.dump_terms.empty()) {
    dump_kind = has_cf ? EstimatorKind::aipw_cf : EstimatorKind::aipw;
    dump << "i,theta,term1,term2,term3,phi\n";
    sink = [&](std::size_t i, std::size_t g, const EifTerms& t) {
      dump << i + 1 << ',' << io::format_number(grid.index[g]) << ',' << io::format_number(t.term1) << ','
           << io::format_number(t.term2) << ',' << io::format_number(t.term3) << ',' << io::format_number(t.phi)
           << '\n';
    };
  }

  std::vector<EstimateResult> rows;
  for (auto k : kinds) {
    GridEstimate est;
    switch (k) {
      case EstimatorKind::ipw: {
        const auto hazard = fit_hazard(data, c.learners);
        est = estimate_ipw(data, grid, hazard);
        if (c.ipw_bootstrap > 0) {
          const auto se = bayesian_bootstrap_se(data, grid, c.learners, c.ipw_bootstrap, c.seed);
          const double root_n = std::sqrt(static_cast<double>(data.size()));
          for (std::size_t g = 0; g < se.size(); ++g) est.points[g].sigma_hat = se[g] * root_n;
        }
        break;
      }
      case EstimatorKind::aipw:
        est = estimate_aipw(data, grid, fit_nuisances(data, c.learners), dump_kind == k ? sink : TermsSink{});
        break;
      case EstimatorKind::aipw_cf:
        est = estimate_cf(data, grid, as_config([&] { return make_folds(data.size(), c.K, c.seed); }), c.learners,
                          dump_kind == k ? sink : TermsSink{});
        break;
      case EstimatorKind::oracle:
        break;
    }
    for (auto& p : est.points) {
      p.seed = c.seed;
      rows.push_back(p);
    }
  }
  if (!c.dump_terms.empty()) {
    std::ofstream f(c.dump_terms);
    if (!f) fail(ErrorKind::input, "cannot write terms dump '" + c.dump_terms + "'");
    f << dump.str();
  }

  RunOutput out;
  out.csv = io::estimates_csv(rows, c.alpha);
  out.summary = estimate_table(rows, c.alpha);
  json results = json::array();
  for (const auto& r : rows) results.push_back(io::to_json(r, c.alpha));
  out.document = {{"command", c.command}, {"results", results}};
  return out;
}

BandResult compute_band(const RunConfig& c, const Dataset& data, const ThetaGrid& grid) {
  const auto plan = as_config([&] { return make_folds(data.size(), c.K, c.seed); });
  const auto est = estimate_cf(data, grid, plan, c.learners);
  return as_config([&] { return band_from_estimate(est, bootstrap_options(c)); });
}

RunOutput run_band(const RunConfig& c, const Dataset& data) {
  const ThetaGrid grid = build_grid(c, data.tau(), data.box(), true);
  const auto band = compute_band(c, data, grid);
  RunOutput out;
  out.csv = io::band_csv(band);
  out.summary = band_table(band);
  out.document = {{"command", c.command}, {"band", io::to_json(band)}};
  return out;
}

RunOutput run_test_null(const RunConfig& c, const Dataset& data) {
  const ThetaGrid grid = build_grid(c, data.tau(), data.box(), true);
  if (!grid.contains_identity() && !c.allow_without_identity) {
    bad("the global null test assumes theta = 1 lies in the grid; add it or set allow_without_identity");
  }
  const auto band = compute_band(c, data, grid);
  const bool reject = band.p_value <= c.alpha;
  RunOutput out;
  std::ostringstream csv;
  csv << "p_value,q_star,c_alpha,alpha,B,seed,reject\n"
      << io::format_number(band.p_value) << ',' << io::format_number(band.q_star) << ','
      << io::format_number(band.c_alpha) << ',' << io::format_number(c.alpha) << ',' << c.B << ',' << c.seed << ','
      << (reject ? 1 : 0) << '\n';
  out.csv = csv.str();
  out.summary = "global null of no incremental effect: p = " + fmt(band.p_value, 4) + " (q* = " +
                fmt(band.q_star, 4) + ", c_alpha = " + fmt(band.c_alpha, 4) + ") -> " +
                (reject ? "reject" : "do not reject") + " at alpha = " + io::format_number(c.alpha) + "\n";
  out.document = {{"command", c.command},    {"p_value", band.p_value}, {"q_star", band.q_star},
                  {"reject", reject},         {"band", io::to_json(band)}};
  return out;
}

void require_sim_tau(const RunConfig& c) {
  if (c.tau && *c.tau != sim::kTau) bad("the simulation design fixes tau = 2");
}

RunOutput run_truth(const RunConfig& c) {
  require_sim_tau(c);
  struct Item {
    std::string label;
    HazardShift shift;
  };
  std::vector<Item> items;
  const ThetaGrid grid = build_grid(c, sim::kTau, sim::covariate_box(), false);
  if (grid.size() > 0) {
    if (!c.scenarios.empty()) bad("give either scenarios or an intervention, not both");
    for (std::size_t g = 0; g < grid.size(); ++g) items.push_back({io::format_number(grid.index[g]), grid.shifts[g]});
  } else {
    std::vector<std::string> labels = c.scenarios;
    if (labels.empty()) {
      for (const auto& s : sim::standard_scenarios()) labels.push_back(s.label);
    }
    for (const auto& label : labels) items.push_back({label, sim::find_scenario(label).shift()});
  }
  RunOutput out;
  std::ostringstream csv, table;
  csv << "label,shift,psi" << (c.mc_draws ? ",mc_mean,mc_se" : "") << '\n';
  json rows = json::array();
  for (std::size_t k = 0; k < items.size(); ++k) {
    const double psi = sim::true_psi(items[k].shift);
    json row = {{"label", items[k].label}, {"shift", io::shift_to_json(items[k].shift)}, {"psi", psi}};
    csv << items[k].label << ",\"" << items[k].shift.describe() << "\"," << io::format_number(psi);
    table << items[k].label << "  psi = " << fmt(psi, 6);
    if (c.mc_draws) {
      const auto mc = sim::monte_carlo_psi(items[k].shift, c.mc_draws, stream_seed(c.seed, k));
      row["mc_mean"] = mc.mean;
      row["mc_se"] = mc.se;
      csv << ',' << io::format_number(mc.mean) << ',' << io::format_number(mc.se);
      table << "  (Monte Carlo " << fmt(mc.mean, 6) << " +/- " << fmt(mc.se, 6) << ")";
    }
    csv << '\n';
    table << '\n';
    rows.push_back(row);
  }
  out.csv = csv.str();
  out.summary = table.str();
  out.document = {{"command", c.command}, {"truth", rows}};
  return out;
}

RunOutput run_simulate(const RunConfig& c) {
  require_sim_tau(c);
  std::vector<sim::ScenarioSpec> specs;
  const ThetaGrid grid = build_grid(c, sim::kTau, sim::covariate_box(), false);
  if (grid.size() > 0) bad("simulate takes scenarios, not an intervention grid");
  std::vector<std::string> labels = c.scenarios.empty() ? std::vector<std::string>{"theta1"} : c.scenarios;
  for (const auto& label : labels) {
    auto s = sim::find_scenario(label);
    s.n = c.n;
    s.R = c.R;
    s.seed = c.seed;
    specs.push_back(s);
  }
  sim::ReplicationOptions opt;
  opt.estimators.clear();
  const auto names = c.estimators.empty() ? std::vector<std::string>{"ipw", "aipw", "oracle"} : c.estimators;
  for (const auto& name : names) opt.estimators.push_back(parse_estimator(name));
  opt.parametric = c.learners;
  opt.cross_fit = c.learners;
  opt.K = c.K;
  opt.ipw_bootstrap = c.ipw_bootstrap;
  opt.oracle_steps = c.oracle_steps;
  opt.alpha = c.alpha;

  std::vector<sim::ReplicationReport> reports;
  json docs = json::array();
  std::ostringstream table;
  for (const auto& s : specs) {
    reports.push_back(as_config([&] { return sim::replicate_study(s, opt); }));
    docs.push_back(io::to_json(reports.back()));
    const auto& rep = reports.back();
    table << rep.spec.label << "  psi = " << fmt(rep.truth, 4) << "  n = " << rep.spec.n << "  R = " << rep.spec.R << '\n';
    char line[200];
    std::snprintf(line, sizeof line, "  %-8s %9s %8s %9s %9s %6s\n", "", "bias", "%bias", "sd", "se", "cp");
    table << line;
    for (const auto& r : rep.rows) {
      std::snprintf(line, sizeof line, "  %-8s %9.5f %8.3f %9.5f %9.5f %6.1f\n", to_string(r.kind).c_str(), r.bias,
                    r.pct_bias, r.sd, r.avg_se, r.cp);
      table << line;
    }
  }
  RunOutput out;
  out.csv = io::report_csv(reports);
  out.summary = table.str();
  out.document = {{"command", c.command}, {"reports", docs}};
  return out;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) bad("config must be a JSON object");
  static const std::set<std::string> known = {
      "command", "input", "tau", "theta", "theta_grid", "shift", "family_grid", "hazard", "outcome", "flex_degree",
      "bandwidth_scale", "estimators", "K", "alpha", "B", "seed", "multipliers", "ipw_bootstrap", "dump_terms",
      "allow_without_identity", "scenarios", "n", "R", "oracle_steps", "mc_draws", "out", "format", "threads"};
  for (const auto& [k, _] : doc.items()) {
    if (!known.count(k)) bad("unknown config key '" + k + "'");
  }
  RunConfig c;
  if (!doc.contains("command")) bad("config needs a 'command'");
  c.command = get_as<std::string>(doc, "command");
  if (!kCommands.count(c.command)) bad("unknown command '" + c.command + "' (estimate, band, simulate, truth, test-null)");
  if (doc.contains("input")) c.input = get_as<std::string>(doc, "input");
  if (doc.contains("tau")) {
    c.tau = get_as<double>(doc, "tau");
    if (!(*c.tau > 0.0) || !std::isfinite(*c.tau)) bad("tau must be positive and finite");
  }
  if (doc.contains("theta")) c.theta = doc["theta"];
  if (doc.contains("theta_grid")) c.theta_grid = get_as<std::string>(doc, "theta_grid");
  if (doc.contains("shift")) c.shift = doc["shift"];
  if (doc.contains("family_grid")) c.family_grid = doc["family_grid"];
  if (doc.contains("hazard")) c.learners.hazard = parse_hazard_learner(get_as<std::string>(doc, "hazard"));
  if (doc.contains("outcome")) c.learners.outcome = parse_outcome_learner(get_as<std::string>(doc, "outcome"));
  if (doc.contains("flex_degree")) {
    const auto d = get_count(doc, "flex_degree");
    if (d < 1 || d > 5) bad("flex_degree must lie in 1..5");
    c.learners.flex_degree = static_cast<int>(d);
  }
  if (doc.contains("bandwidth_scale")) {
    c.learners.bandwidth_scale = get_as<double>(doc, "bandwidth_scale");
    if (!(c.learners.bandwidth_scale > 0.0)) bad("bandwidth_scale must be positive");
  }
  if (doc.contains("estimators")) {
    c.estimators = get_strings(doc, "estimators");
    for (const auto& e : c.estimators) parse_estimator(e);
  }
  if (doc.contains("K")) {
    c.K = get_count(doc, "K");
    if (c.K < 2) bad("K must be at least 2");
  }
  if (doc.contains("alpha")) {
    c.alpha = get_as<double>(doc, "alpha");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) bad("alpha must lie in (0, 1)");
  }
  if (doc.contains("B")) c.B = get_count(doc, "B");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0)) {
      bad("seed must be a nonnegative integer");
    }
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("multipliers")) {
    c.multipliers = get_as<std::string>(doc, "multipliers");
    if (c.multipliers != "rademacher" && c.multipliers != "gaussian") bad("multipliers must be rademacher or gaussian");
  }
  if (doc.contains("ipw_bootstrap")) c.ipw_bootstrap = get_count(doc, "ipw_bootstrap");
  if (doc.contains("dump_terms")) c.dump_terms = get_as<std::string>(doc, "dump_terms");
  if (doc.contains("allow_without_identity")) c.allow_without_identity = get_as<bool>(doc, "allow_without_identity");
  if (doc.contains("scenarios")) c.scenarios = get_strings(doc, "scenarios");
  if (doc.contains("n")) c.n = get_count(doc, "n");
  if (doc.contains("R")) c.R = get_count(doc, "R");
  if (doc.contains("oracle_steps")) c.oracle_steps = get_count(doc, "oracle_steps");
  if (doc.contains("mc_draws")) c.mc_draws = get_count(doc, "mc_draws");
  if (doc.contains("out")) c.out = get_as<std::string>(doc, "out");
  if (doc.contains("format")) {
    c.format = get_as<std::string>(doc, "format");
    if (c.format != "csv" && c.format != "json") bad("format must be csv or json");
  }
  if (doc.contains("threads")) c.threads = static_cast<unsigned>(get_count(doc, "threads"));
  if (c.ipw_bootstrap > 0 && c.ipw_bootstrap < 50) bad("ipw_bootstrap must be 0 or at least 50");
  if ((c.command == "band" || c.command == "test-null") && c.B < 100) bad("B must be at least 100");
  return c;
}

json to_json(const RunConfig& c) {
  json j = {{"command", c.command},
            {"hazard", to_string(c.learners.hazard)},
            {"outcome", to_string(c.learners.outcome)},
            {"flex_degree", c.learners.flex_degree},
            {"bandwidth_scale", c.learners.bandwidth_scale},
            {"K", c.K},
            {"alpha", c.alpha},
            {"B", c.B},
            {"seed", c.seed},
            {"multipliers", c.multipliers},
            {"ipw_bootstrap", c.ipw_bootstrap},
            {"format", c.format},
            {"threads", c.threads}};
  if (!c.input.empty()) j["input"] = c.input;
  if (c.tau) j["tau"] = *c.tau;
  if (c.theta) j["theta"] = *c.theta;
  if (c.theta_grid) j["theta_grid"] = *c.theta_grid;
  if (c.shift) j["shift"] = *c.shift;
  if (c.family_grid) j["family_grid"] = *c.family_grid;
  if (!c.estimators.empty()) j["estimators"] = c.estimators;
  if (!c.dump_terms.empty()) j["dump_terms"] = c.dump_terms;
  if (c.allow_without_identity) j["allow_without_identity"] = true;
  if (c.command == "simulate" || c.command == "truth") {
    if (!c.scenarios.empty()) j["scenarios"] = c.scenarios;
    if (c.command == "simulate") {
      j["n"] = c.n;
      j["R"] = c.R;
      j["oracle_steps"] = c.oracle_steps;
    } else {
      j["mc_draws"] = c.mc_draws;
    }
  }
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

RunOutput run(const RunConfig& config, const Dataset* data) {
  set_max_threads(config.threads);
  RunOutput out;
  if (config.command == "estimate") {
    out = run_estimate(config, load(config, data));
  } else if (config.command == "band") {
    out = run_band(config, load(config, data));
  } else if (config.command == "test-null") {
    out = run_test_null(config, load(config, data));
  } else if (config.command == "truth") {
    out = run_truth(config);
  } else if (config.command == "simulate") {
    out = run_simulate(config);
  } else {
    bad("unknown command '" + config.command + "'");
  }
  out.document["config"] = to_json(config);
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return 2;
    case ErrorKind::config:
    case ErrorKind::argument: return 4;
    default: return 3;
  }
}

}  // namespace ihaz::app
