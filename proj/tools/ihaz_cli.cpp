// Command-line front end over the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "ihaz/ihaz.h"

using nlohmann::json;

namespace {

struct Flags {
  std::string config, input, theta, theta_grid, shift_file, family_grid, hazard, outcome, out, format;
  std::string multipliers, dump_terms, estimators, scenarios;
  std::optional<double> tau, alpha;
  std::optional<std::size_t> K, B, n, R, ipw_bootstrap, mc_draws, oracle_steps, threads;
  std::optional<unsigned long long> seed;
  bool allow_without_identity = false;
};

int config_error(const std::string& what) {
  std::cerr << "config error: " << what << '\n';
  return IH_ERR_CONFIG;
}

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) return std::nullopt;
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

json split_list(const std::string& text) {
  json out = json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration; flags override its keys");
  cmd->add_option("--alpha", f.alpha, "Significance level");
  cmd->add_option("--seed", f.seed, "Master seed (falls back to IH_SEED)");
  cmd->add_option("--out", f.out, "Output path (CSV plus a .json sidecar, or JSON)");
  cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", f.threads, "Worker thread cap (0 = all cores)");
}

void add_data(CLI::App* cmd, Flags& f) {
  cmd->add_option("--input", f.input, "CSV with columns y,u,delta,l1..lp");
  cmd->add_option("--tau", f.tau, "Follow-up horizon");
  cmd->add_option("--hazard", f.hazard, "cox | cox-flex | nelson-aalen | km-log");
  cmd->add_option("--outcome", f.outcome, "linear | logistic | kernel");
  cmd->add_option("--K", f.K, "Cross-fitting folds");
}

void add_grid(CLI::App* cmd, Flags& f) {
  cmd->add_option("--theta", f.theta, "Constant theta, or a comma-separated list");
  cmd->add_option("--theta-grid", f.theta_grid, "Constant theta grid lo:hi:count");
  cmd->add_option("--shift-file", f.shift_file, "JSON shift object or array of shift objects");
  cmd->add_option("--family-grid", f.family_grid, "a,b,lo:hi:count for (a t + b) exp(beta l) over a beta grid");
}

int build(const std::string& command, const Flags& f, json& cfg) {
  if (!f.config.empty()) {
    const auto text = slurp(f.config);
    if (!text) return config_error("cannot read config file '" + f.config + "'");
    try {
      cfg = json::parse(*text);
    } catch (const json::parse_error& e) {
      return config_error(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) return config_error("config file must hold a JSON object");
    if (cfg.contains("command") && cfg["command"] != command) {
      return config_error("config file is for '" + cfg["command"].get<std::string>() + "', not '" + command + "'");
    }
  }
  cfg["command"] = command;
  if (!f.input.empty()) cfg["input"] = f.input;
  if (f.tau) cfg["tau"] = *f.tau;
  if (!f.hazard.empty()) cfg["hazard"] = f.hazard;
  if (!f.outcome.empty()) cfg["outcome"] = f.outcome;
  if (f.K) cfg["K"] = *f.K;
  if (f.alpha) cfg["alpha"] = *f.alpha;
  if (f.B) cfg["B"] = *f.B;
  if (f.n) cfg["n"] = *f.n;
  if (f.R) cfg["R"] = *f.R;
  if (f.ipw_bootstrap) cfg["ipw_bootstrap"] = *f.ipw_bootstrap;
  if (f.mc_draws) cfg["mc_draws"] = *f.mc_draws;
  if (f.oracle_steps) cfg["oracle_steps"] = *f.oracle_steps;
  if (f.threads) cfg["threads"] = *f.threads;
  if (!f.out.empty()) cfg["out"] = f.out;
  if (!f.format.empty()) cfg["format"] = f.format;
  if (!f.multipliers.empty()) cfg["multipliers"] = f.multipliers;
  if (!f.dump_terms.empty()) cfg["dump_terms"] = f.dump_terms;
  if (!f.estimators.empty()) cfg["estimators"] = split_list(f.estimators);
  if (!f.scenarios.empty()) cfg["scenarios"] = split_list(f.scenarios);
  if (f.allow_without_identity) cfg["allow_without_identity"] = true;

  const int grids = !f.theta.empty() + !f.theta_grid.empty() + !f.shift_file.empty() + !f.family_grid.empty();
  if (grids > 1) return config_error("give only one of --theta, --theta-grid, --shift-file, --family-grid");
  if (grids == 1) {
    for (const char* k : {"theta", "theta_grid", "shift", "family_grid"}) cfg.erase(k);
  }
  if (!f.theta.empty()) {
    json values = json::array();
    for (const auto& item : split_list(f.theta)) {
      try {
        std::size_t used = 0;
        const std::string s = item.get<std::string>();
        values.push_back(std::stod(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        return config_error("--theta must be a number or a comma-separated list of numbers");
      }
    }
    cfg["theta"] = values.size() == 1 ? values[0] : values;
  }
  if (!f.theta_grid.empty()) cfg["theta_grid"] = f.theta_grid;
  if (!f.shift_file.empty()) {
    const auto text = slurp(f.shift_file);
    if (!text) return config_error("cannot read shift file '" + f.shift_file + "'");
    try {
      cfg["shift"] = json::parse(*text);
    } catch (const json::parse_error& e) {
      return config_error(std::string("shift file is not valid JSON: ") + e.what());
    }
  }
  if (!f.family_grid.empty()) {
    const auto parts = split_list(f.family_grid);
    if (parts.size() != 3) return config_error("--family-grid must look like a,b,lo:hi:count");
    try {
      cfg["family_grid"] = {{"a", std::stod(parts[0].get<std::string>())},
                            {"b", std::stod(parts[1].get<std::string>())},
                            {"beta", parts[2]}};
    } catch (const std::exception&) {
      return config_error("--family-grid must look like a,b,lo:hi:count");
    }
  }
  if (f.seed) {
    cfg["seed"] = *f.seed;
  } else if (!cfg.contains("seed")) {
    if (const char* env = std::getenv("IH_SEED")) {
      try {
        std::size_t used = 0;
        const unsigned long long s = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
        cfg["seed"] = s;
      } catch (const std::exception&) {
        return config_error("IH_SEED must be a nonnegative integer");
      }
    }
  }
  return 0;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) return false;
  f << text;
  return static_cast<bool>(f);
}

int execute(const json& cfg) {
  ih_report* report = nullptr;
  const ih_status st = ih_run(cfg.dump().c_str(), nullptr, &report);
  if (st != IH_OK) {
    std::cerr << ih_last_error() << '\n';
    return static_cast<int>(st);
  }
  const std::string out = cfg.value("out", "");
  const std::string format = cfg.value("format", "csv");
  int rc = 0;
  if (out.empty()) {
    std::cout << (format == "json" ? std::string(ih_report_json(report)) + "\n" : ih_report_csv(report));
  } else {
    const bool ok = format == "json" ? write_file(out, std::string(ih_report_json(report)) + "\n")
                                     : write_file(out, ih_report_csv(report)) &&
                                           write_file(out + ".json", std::string(ih_report_json(report)) + "\n");
    if (!ok) {
      std::cerr << "input error: cannot write '" << out << "'\n";
      rc = IH_ERR_INPUT;
    } else {
      std::cout << ih_report_summary(report);
    }
  }
  ih_report_free(report);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental hazard-shift effects: estimation, uniform bands, simulation"};
  app.require_subcommand(1);
  Flags f;

  auto* estimate = app.add_subcommand("estimate", "Point estimates and Wald intervals over a theta grid");
  add_common(estimate, f);
  add_data(estimate, f);
  add_grid(estimate, f);
  estimate->add_option("--estimators", f.estimators, "Comma-separated subset of ipw,aipw,aipw_cf");
  estimate->add_option("--ipw-bootstrap", f.ipw_bootstrap, "Bayesian-bootstrap draws for the IPW SE (0 = plug-in)");
  estimate->add_option("--dump-terms", f.dump_terms, "Write per-unit EIF terms to this CSV");

  auto* band = app.add_subcommand("band", "Cross-fitted uniform confidence band");
  add_common(band, f);
  add_data(band, f);
  add_grid(band, f);
  band->add_option("--B", f.B, "Multiplier bootstrap draws");
  band->add_option("--multipliers", f.multipliers, "rademacher or gaussian")
      ->check(CLI::IsMember({"rademacher", "gaussian"}));

  auto* null = app.add_subcommand("test-null", "Test of no incremental effect over the grid");
  add_common(null, f);
  add_data(null, f);
  add_grid(null, f);
  null->add_option("--B", f.B, "Multiplier bootstrap draws");
  null->add_option("--multipliers", f.multipliers, "rademacher or gaussian")
      ->check(CLI::IsMember({"rademacher", "gaussian"}));
  null->add_flag("--allow-without-identity", f.allow_without_identity, "Run even if theta = 1 is not in the grid");

  auto* truth = app.add_subcommand("truth", "True psi under the simulation design");
  add_common(truth, f);
  add_grid(truth, f);
  truth->add_option("--tau", f.tau, "Must be 2 if given");
  truth->add_option("--scenarios", f.scenarios, "Comma-separated labels theta1..theta8 (default: all)");
  truth->add_option("--mc-draws", f.mc_draws, "Also report a Monte Carlo check with this many draws");

  auto* simulate = app.add_subcommand("simulate", "Replication study under the simulation design");
  add_common(simulate, f);
  simulate->add_option("--tau", f.tau, "Must be 2 if given");
  simulate->add_option("--hazard", f.hazard, "Hazard learner");
  simulate->add_option("--outcome", f.outcome, "Outcome learner");
  simulate->add_option("--K", f.K, "Cross-fitting folds");
  simulate->add_option("--scenarios", f.scenarios, "Comma-separated labels theta1..theta8");
  simulate->add_option("--n", f.n, "Sample size per replicate");
  simulate->add_option("--R", f.R, "Replicates");
  simulate->add_option("--estimators", f.estimators, "Comma-separated subset of ipw,aipw,aipw_cf,oracle");
  simulate->add_option("--ipw-bootstrap", f.ipw_bootstrap, "Bayesian-bootstrap draws for the IPW SE (0 = plug-in)");
  simulate->add_option("--oracle-steps", f.oracle_steps, "Time steps of the discretized true hazard");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return IH_ERR_CONFIG;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  json cfg = json::object();
  if (const int rc = build(command, f, cfg); rc != 0) return rc;
  return execute(cfg);
}
