#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ihaz/core.hpp"
#include "ihaz/inference.hpp"
#include "ihaz/sim.hpp"

namespace ihaz::io {

using nlohmann::json;

/// Header `y,u,delta,l1,...,lp`. Row numbers in errors count data rows from 1.
Dataset read_csv(std::istream& in, double tau);
Dataset read_csv_file(const std::string& path, double tau);

/// {"kind":"constant","theta":0.8}
/// {"kind":"family","a":0.3,"b":0.1,"beta":[0.6]}
/// {"kind":"tabulated","times":[0,1],"values":[0.8,1.2]}
/// Family shifts are checked against `box` on [0, tau].
HazardShift parse_shift(const json& spec, double tau, const CovariateBox& box);
json shift_to_json(const HazardShift& shift);

/// "lo:hi:count"
struct Range {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  std::vector<double> values() const;
};
Range parse_range(const std::string& text);

std::string format_number(double v);

json to_json(const EstimateResult& r, double alpha);
std::string estimates_csv(const std::vector<EstimateResult>& rows, double alpha);

json to_json(const BandResult& band);
std::string band_csv(const BandResult& band);

json to_json(const sim::ReplicationReport& report);
std::string report_csv(const std::vector<sim::ReplicationReport>& reports);

}  // namespace ihaz::io
