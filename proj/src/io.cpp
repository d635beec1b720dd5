#include "ihaz/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ihaz::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_field(const std::string& text, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    fail(ErrorKind::input, "row " + std::to_string(row) + ", column '" + column + "': cannot parse '" + text +
                               "' as a number");
  }
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Dataset read_csv(std::istream& in, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::config, "tau must be positive and finite");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) fail(ErrorKind::input, "input has no header line");
  const char* required[] = {"y", "u", "delta"};
  for (std::size_t c = 0; c < 3; ++c) {
    if (header.size() <= c || header[c] != required[c]) {
      fail(ErrorKind::input, std::string("header: column ") + std::to_string(c + 1) + " must be '" + required[c] +
                                 "'" + (header.size() > c ? ", found '" + header[c] + "'" : ""));
    }
  }
  const std::size_t p = header.size() - 3;
  for (std::size_t k = 0; k < p; ++k) {
    const std::string want = "l" + std::to_string(k + 1);
    if (header[3 + k] != want) {
      fail(ErrorKind::input, "header: column " + std::to_string(k + 4) + " must be '" + want + "', found '" +
                                 header[3 + k] + "'");
    }
  }
  std::vector<ObservedUnit> units;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      fail(ErrorKind::input, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                 " fields, found " + std::to_string(fields.size()));
    }
    ObservedUnit unit;
    unit.y = parse_field(fields[0], row, "y");
    unit.u = parse_field(fields[1], row, "u");
    const double d = parse_field(fields[2], row, "delta");
    if (d != 0.0 && d != 1.0) fail(ErrorKind::input, "row " + std::to_string(row) + ", column 'delta': must be 0 or 1");
    unit.delta = static_cast<int>(d);
    unit.l.resize(p);
    for (std::size_t k = 0; k < p; ++k) unit.l[k] = parse_field(fields[3 + k], row, header[3 + k]);
    validate_unit(unit, tau, p, row);
    units.push_back(std::move(unit));
  }
  if (units.empty()) fail(ErrorKind::input, "input has a header but no data rows");
  return Dataset(std::move(units), tau);
}

Dataset read_csv_file(const std::string& path, double tau) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open input file '" + path + "'");
  return read_csv(in, tau);
}

// ---------------------------------------------------------------------------

HazardShift parse_shift(const json& spec, double tau, const CovariateBox& box) {
  if (!spec.is_object() || !spec.contains("kind") || !spec["kind"].is_string()) {
    fail(ErrorKind::config, "shift must be an object with a string 'kind'");
  }
  const std::string kind = spec["kind"];
  auto number = [&](const char* key) -> double {
    if (!spec.contains(key) || !spec[key].is_number()) fail(ErrorKind::config, std::string("shift needs a numeric '") + key + "'");
    return spec[key].get<double>();
  };
  auto numbers = [&](const char* key) -> std::vector<double> {
    if (!spec.contains(key)) fail(ErrorKind::config, std::string("shift needs '") + key + "'");
    const auto& v = spec[key];
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) fail(ErrorKind::config, std::string("shift '") + key + "' must be a number array");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(ErrorKind::config, std::string("shift '") + key + "' must be a number array");
      out.push_back(x.get<double>());
    }
    return out;
  };
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, _] : spec.items()) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) fail(ErrorKind::config, "unknown key '" + k + "' in " + kind + " shift");
    }
  };
  try {
    if (kind == "constant") {
      allow({"kind", "theta"});
      return HazardShift::constant(number("theta"));
    }
    if (kind == "family") {
      allow({"kind", "a", "b", "beta"});
      return HazardShift::family(number("a"), number("b"), numbers("beta"), tau, box);
    }
    if (kind == "tabulated") {
      allow({"kind", "times", "values"});
      return HazardShift::tabulated(numbers("times"), numbers("values"), tau);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail(ErrorKind::config, std::string("invalid shift: ") + e.what());
  }
  fail(ErrorKind::config, "unknown shift kind '" + kind + "' (constant, family, tabulated)");
}

json shift_to_json(const HazardShift& shift) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantShift>) {
          return {{"kind", "constant"}, {"theta", s.theta}};
        } else if constexpr (std::is_same_v<S, FamilyShift>) {
          return {{"kind", "family"}, {"a", s.a}, {"b", s.b}, {"beta", s.beta}};
        } else {
          return {{"kind", "tabulated"}, {"times", s.times}, {"values", s.values}};
        }
      },
      shift.spec());
}

std::vector<double> Range::values() const {
  std::vector<double> out(count);
  for (std::size_t g = 0; g < count; ++g) {
    out[g] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(count - 1);
  }
  return out;
}

Range parse_range(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) fail(ErrorKind::config, "grid '" + text + "' must look like lo:hi:count");
  Range r;
  try {
    std::size_t used = 0;
    r.lo = std::stod(text.substr(0, a));
    r.hi = std::stod(text.substr(a + 1, b - a - 1));
    const std::string c = text.substr(b + 1);
    const long long count = std::stoll(c, &used);
    if (used != c.size() || count < 1) throw std::invalid_argument("count");
    r.count = static_cast<std::size_t>(count);
  } catch (const std::exception&) {
    fail(ErrorKind::config, "grid '" + text + "' must look like lo:hi:count");
  }
  if (!(r.hi >= r.lo)) fail(ErrorKind::config, "grid '" + text + "' needs lo <= hi");
  if (r.count == 1 && r.lo != r.hi) fail(ErrorKind::config, "grid '" + text + "': a single point needs lo == hi");
  if (r.count > 1 && r.lo == r.hi) fail(ErrorKind::config, "grid '" + text + "': repeated points");
  return r;
}

// ---------------------------------------------------------------------------

json to_json(const EstimateResult& r, double alpha) {
  const auto ci = wald_ci(r, alpha);
  return {{"estimator", to_string(r.kind)},
          {"theta", r.theta},
          {"shift", r.shift},
          {"psi_hat", r.psi_hat},
          {"se", r.se()},
          {"ci_low", ci.lower},
          {"ci_high", ci.upper},
          {"n", r.n},
          {"K", r.K},
          {"seed", r.seed}};
}

std::string estimates_csv(const std::vector<EstimateResult>& rows, double alpha) {
  std::ostringstream os;
  os << "estimator,theta,shift,psi_hat,se,ci_low,ci_high,n,K,seed\n";
  for (const auto& r : rows) {
    const auto ci = wald_ci(r, alpha);
    os << to_string(r.kind) << ',' << format_number(r.theta) << ',' << quote(r.shift) << ','
       << format_number(r.psi_hat) << ',' << format_number(r.se()) << ',' << format_number(ci.lower) << ','
       << format_number(ci.upper) << ',' << r.n << ',' << r.K << ',' << r.seed << '\n';
  }
  return os.str();
}

json to_json(const BandResult& band) {
  json points = json::array();
  const double root_n = std::sqrt(static_cast<double>(band.n));
  for (std::size_t g = 0; g < band.psi_hat.size(); ++g) {
    points.push_back({{"theta", band.grid.index[g]},
                      {"shift", band.grid.shifts[g].describe()},
                      {"psi_hat", band.psi_hat[g]},
                      {"se", band.sigma_hat[g] / root_n},
                      {"lower", band.lower[g]},
                      {"upper", band.upper[g]}});
  }
  return {{"estimator", to_string(band.kind)},
          {"n", band.n},
          {"K", band.K},
          {"alpha", band.alpha},
          {"B", band.B},
          {"seed", band.seed},
          {"c_alpha", band.c_alpha},
          {"q_star", band.q_star},
          {"p_value", band.p_value},
          {"points", points}};
}

std::string band_csv(const BandResult& band) {
  std::ostringstream os;
  os << "theta,psi_hat,se,lower,upper\n";
  const double root_n = std::sqrt(static_cast<double>(band.n));
  for (std::size_t g = 0; g < band.psi_hat.size(); ++g) {
    os << format_number(band.grid.index[g]) << ',' << format_number(band.psi_hat[g]) << ','
       << format_number(band.sigma_hat[g] / root_n) << ',' << format_number(band.lower[g]) << ','
       << format_number(band.upper[g]) << '\n';
  }
  return os.str();
}

json to_json(const sim::ReplicationReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"estimator", to_string(r.kind)},
                    {"bias", r.bias},
                    {"pct_bias", r.pct_bias},
                    {"sd", r.sd},
                    {"se", r.avg_se},
                    {"cp", r.cp},
                    {"completed", r.completed},
                    {"failed", r.failed}});
  }
  const auto& s = report.spec;
  return {{"scenario", s.label}, {"a", s.a},         {"b", s.b},   {"beta", s.beta}, {"n", s.n},
          {"R", s.R},            {"seed", s.seed},   {"psi", report.truth}, {"rows", rows}};
}

std::string report_csv(const std::vector<sim::ReplicationReport>& reports) {
  std::ostringstream os;
  os << "scenario,estimator,n,R,psi,bias,pct_bias,sd,se,cp,completed,failed\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      os << rep.spec.label << ',' << to_string(r.kind) << ',' << rep.spec.n << ',' << rep.spec.R << ','
         << format_number(rep.truth) << ',' << format_number(r.bias) << ',' << format_number(r.pct_bias) << ','
         << format_number(r.sd) << ',' << format_number(r.avg_se) << ',' << format_number(r.cp) << ','
         << r.completed << ',' << r.failed << '\n';
    }
  }
  return os.str();
}

}  // namespace ihaz::io
