#pragma once

// Config-driven runs shared by the C API and the command-line tool.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ihaz/core.hpp"
#include "ihaz/nuisance.hpp"

namespace ihaz::app {

using nlohmann::json;

struct RunConfig {
  std::string command;  // estimate | band | simulate | truth | test-null
  std::string input;
  std::optional<double> tau;

  // Grid: at most one of these.
  std::optional<json> theta;              // number or array of numbers
  std::optional<std::string> theta_grid;  // lo:hi:count
  std::optional<json> shift;              // shift object or array of shift objects
  std::optional<json> family_grid;        // {"a":..,"b":..,"beta":"lo:hi:count"}

  LearnerConfig learners;
  std::vector<std::string> estimators;
  std::size_t K = 5;
  double alpha = 0.05;
  std::size_t B = 2000;
  std::uint64_t seed = 1;
  std::string multipliers = "rademacher";
  std::size_t ipw_bootstrap = 200;
  std::string dump_terms;
  bool allow_without_identity = false;

  std::vector<std::string> scenarios;
  std::size_t n = 1000;
  std::size_t R = 300;
  std::size_t oracle_steps = 2000;
  std::size_t mc_draws = 0;

  std::string out;
  std::string format = "csv";
  unsigned threads = 0;
};

/// Rejects unknown keys and ill-typed values with ErrorKind::config.
RunConfig parse_config(const json& doc);
json to_json(const RunConfig& config);

struct RunOutput {
  json document;        // results plus the full config
  std::string csv;      // tabular artifact
  std::string summary;  // human-readable table
};

/// Runs one command. `data` overrides the config's input file when given.
RunOutput run(const RunConfig& config, const Dataset* data = nullptr);

/// Process exit code for an error kind: 2 input, 3 numeric / fit, 4 config.
int exit_code(ErrorKind kind);

}  // namespace ihaz::app
