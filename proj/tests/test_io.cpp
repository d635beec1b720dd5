#include "support.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "ihaz/app.hpp"
#include "ihaz/ihaz.h"
#include "ihaz/io.hpp"
#include "ihaz/sim.hpp"

using namespace ihaz;
using fixture::error_kind;
using nlohmann::json;

namespace {

Dataset csv(const std::string& text, double tau = 2.0) {
  std::istringstream in(text);
  return io::read_csv(in, tau);
}

std::string message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("csv reading") {
  const auto d = csv("y,u,delta,l1,l2\n1.5,0.3,1,0.1,0.2\n2,2,0,0.5,1\n");
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.units()[1].l[1] == 1.0);
  CHECK(csv("y,u,delta\n1,2,0\n").dim() == 0);
  CHECK(csv("y,u,delta\r\n1,2,0\r\n").size() == 1);
}

TEST_CASE("csv errors name the row") {
  CHECK(error_kind([] { csv("u,y,delta\n1,2,0\n"); }) == ErrorKind::input);
  CHECK(error_kind([] { csv("y,u,delta\n"); }) == ErrorKind::input);
  CHECK(error_kind([] { csv(""); }) == ErrorKind::input);
  CHECK(message([] { csv("y,u,delta,l1\n1,1,1,0\n1,2.5,1,0\n"); }).find("row 2") != std::string::npos);
  CHECK(message([] { csv("y,u,delta,l1\n1,1,1,0\n1,1,1\n"); }).find("row 2") != std::string::npos);
  CHECK(message([] { csv("y,u,delta,l1\n1,1,1,abc\n"); }).find("l1") != std::string::npos);
  CHECK(error_kind([] { io::read_csv_file("/nonexistent/file.csv", 2.0); }) == ErrorKind::input);
}

TEST_CASE("shift parsing") {
  const CovariateBox box({0.0}, {2.0});
  const std::vector<double> l{1.0};
  CHECK(io::parse_shift(json{{"kind", "constant"}, {"theta", 2.0}}, 2.0, box)(0.5, l) == 2.0);
  const auto f = io::parse_shift(json{{"kind", "family"}, {"a", 0.5}, {"b", 0.1}, {"beta", {-0.1}}}, 2.0, box);
  CHECK(f(1.0, l) == doctest::Approx(0.5429024508215757).epsilon(1e-14));
  const auto t = io::parse_shift(json{{"kind", "tabulated"}, {"times", {0.0, 1.0}}, {"values", {2.0, 0.5}}}, 2.0, box);
  CHECK(t(1.5, l) == 0.5);
  CHECK(io::parse_shift(io::shift_to_json(f), 2.0, box)(0.3, l) == f(0.3, l));

  CHECK(error_kind([&] { io::parse_shift(json{{"kind", "constant"}, {"theta", 2.0}, {"x", 1}}, 2.0, box); }) ==
        ErrorKind::config);
  CHECK(error_kind([&] { io::parse_shift(json{{"kind", "weird"}}, 2.0, box); }) == ErrorKind::config);
  CHECK(error_kind([&] { io::parse_shift(json{{"kind", "constant"}, {"theta", -1.0}}, 2.0, box); }) == ErrorKind::config);
  CHECK(error_kind([&] { io::parse_shift(json{{"kind", "constant"}, {"theta", "two"}}, 2.0, box); }) == ErrorKind::config);
}

TEST_CASE("ranges") {
  const auto r = io::parse_range("0.2:0.7:26");
  CHECK(r.count == 26);
  CHECK(r.values().front() == 0.2);
  CHECK(r.values().back() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(r.values()[1] == doctest::Approx(0.22));
  CHECK(io::parse_range("1:1:1").values() == std::vector<double>{1.0});
  for (const char* bad : {"1:2", "a:b:3", "2:1:3", "1:2:0", "1:2:3:4"}) {
    CHECK(error_kind([&] { io::parse_range(bad); }) == ErrorKind::config);
  }
}

TEST_CASE("config parsing") {
  const auto c = app::parse_config(json{{"command", "band"}, {"theta_grid", "0.5:2:4"}, {"B", 500}, {"seed", 9}});
  CHECK(c.B == 500);
  CHECK(c.seed == 9);
  CHECK(c.K == 5);
  CHECK(error_kind([] { app::parse_config(json{{"command", "band"}, {"bogus", 1}}); }) == ErrorKind::config);
  CHECK(error_kind([] { app::parse_config(json{{"command", "fly"}}); }) == ErrorKind::config);
  CHECK(error_kind([] { app::parse_config(json{{"command", "band"}, {"B", "many"}}); }) == ErrorKind::config);
  CHECK(error_kind([] { app::parse_config(json{{"command", "band"}, {"K", -2}}); }) == ErrorKind::config);
  CHECK(error_kind([] { app::parse_config(json{{"command", "band"}, {"hazard", "forest"}}); }) == ErrorKind::config);
  CHECK(error_kind([] { app::parse_config(json{{"command", "band"}, {"alpha", 1.5}}); }) == ErrorKind::config);
  const auto back = app::parse_config(app::to_json(c));
  CHECK(back.B == c.B);
  CHECK(back.theta_grid == c.theta_grid);
}

TEST_CASE("runs embed their config and are reproducible") {
  const auto d = sim::draw_dataset(300, 3);
  const json cfg{{"command", "estimate"}, {"theta", {0.5, 1.0}}, {"seed", 4}, {"ipw_bootstrap", 50}};
  const auto a = app::run(app::parse_config(cfg), &d);
  const auto b = app::run(app::parse_config(a.document["config"]), &d);
  CHECK(a.csv == b.csv);
  CHECK(a.document["config"]["seed"] == 4);

  const auto y = d.outcomes();
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  for (const auto& r : a.document["results"]) {
    if (r["theta"] == 1.0) CHECK(std::abs(r["psi_hat"].get<double>() - ybar) <= 1e-12);
  }
}

TEST_CASE("run errors map to exit codes") {
  const auto d = sim::draw_dataset(100, 3);
  CHECK(error_kind([&] { app::run(app::parse_config(json{{"command", "estimate"}}), &d); }) == ErrorKind::config);
  CHECK(error_kind([&] {
    app::run(app::parse_config(json{{"command", "estimate"}, {"theta", 1.0}, {"estimators", {"oracle"}}}), &d);
  }) == ErrorKind::config);
  CHECK(error_kind([&] {
    app::run(app::parse_config(json{{"command", "test-null"}, {"theta", {0.5, 2.0}}}), &d);
  }) == ErrorKind::config);
  CHECK(app::exit_code(ErrorKind::input) == 2);
  CHECK(app::exit_code(ErrorKind::config) == 4);
  CHECK(app::exit_code(ErrorKind::argument) == 4);
  for (auto k : {ErrorKind::domain, ErrorKind::convergence, ErrorKind::separation, ErrorKind::rank, ErrorKind::numeric,
                 ErrorKind::degenerate_variance}) {
    CHECK(app::exit_code(k) == 3);
  }
}

TEST_CASE("C interface") {
  const double y[] = {1.0, 2.0, 3.0, 4.0}, u[] = {0.5, 2.0, 1.0, 2.0}, l[] = {0.1, 0.5, 1.0, 1.5};
  const int delta[] = {1, 0, 1, 0};
  ih_dataset* data = nullptr;
  REQUIRE(ih_dataset_from_arrays(4, 1, y, u, delta, l, 2.0, &data) == IH_OK);
  CHECK(ih_dataset_size(data) == 4);
  CHECK(ih_dataset_dim(data) == 1);

  ih_report* rep = nullptr;
  REQUIRE(ih_run(R"({"command":"estimate","theta":1,"estimators":["ipw","aipw"],"outcome":"linear","hazard":"nelson-aalen","ipw_bootstrap":0})",
                 data, &rep) == IH_OK);
  const auto doc = json::parse(ih_report_json(rep));
  CHECK(doc["results"][0]["psi_hat"].get<double>() == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(std::string(ih_report_csv(rep)).rfind("estimator,theta", 0) == 0);
  ih_report_free(rep);

  CHECK(ih_run("{not json", data, &rep) == IH_ERR_CONFIG);
  CHECK(std::string(ih_last_error()).find("config") != std::string::npos);
  CHECK(ih_run(R"({"command":"estimate"})", data, &rep) == IH_ERR_CONFIG);
  CHECK(rep == nullptr);
  CHECK(ih_run(nullptr, data, &rep) == IH_ERR_NULL);
  CHECK(ih_run("{}", data, nullptr) == IH_ERR_NULL);

  const double bad_u[] = {0.5, 3.0, 1.0, 2.0};
  ih_dataset* bad = nullptr;
  CHECK(ih_dataset_from_arrays(4, 1, y, bad_u, delta, l, 2.0, &bad) == IH_ERR_INPUT);
  CHECK(bad == nullptr);
  CHECK(ih_dataset_read_csv("/nonexistent.csv", 2.0, &bad) == IH_ERR_INPUT);

  double psi = 0.0;
  REQUIRE(ih_true_psi(R"({"kind":"family","a":0.9,"b":0.3,"beta":[-0.7]})", &psi) == IH_OK);
  CHECK(std::abs(psi - 1.655) <= 0.001);
  CHECK(ih_true_psi(R"({"kind":"constant","theta":0})", &psi) == IH_ERR_CONFIG);
  ih_dataset_free(data);
  ih_dataset_free(nullptr);
  ih_report_free(nullptr);
  CHECK(std::string(ih_version()) == "1.0.0");
}

TEST_CASE("C interface cross-fit helper") {
  const auto d = sim::draw_dataset(300, 4);
  std::vector<double> y, u, l;
  std::vector<int> delta;
  for (const auto& x : d.units()) {
    y.push_back(x.y);
    u.push_back(x.u);
    delta.push_back(x.delta);
    l.push_back(x.l[0]);
  }
  ih_dataset* data = nullptr;
  REQUIRE(ih_dataset_from_arrays(y.size(), 1, y.data(), u.data(), delta.data(), l.data(), 2.0, &data) == IH_OK);
  double psi = 0, se = 0;
  REQUIRE(ih_estimate_constant(data, 1.0, "cox", "linear", 5, 1, &psi, &se) == IH_OK);
  CHECK(std::abs(psi - std::accumulate(y.begin(), y.end(), 0.0) / y.size()) <= 1e-12);
  CHECK(ih_estimate_constant(data, 1.0, "cox", "linear", 1, 1, &psi, &se) == IH_ERR_CONFIG);
  CHECK(ih_estimate_constant(nullptr, 1.0, "cox", "linear", 5, 1, &psi, &se) == IH_ERR_NULL);
  ih_dataset_free(data);
}
