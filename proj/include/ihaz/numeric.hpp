#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ihaz {

/// Pairwise (cascade) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> x);
double mean(std::span<const double> x);
/// sqrt(sum (x - m)^2 / n)
double sd_population(std::span<const double> x, double m);
/// sqrt(sum (x - mean)^2 / (n - 1))
double sd_sample(std::span<const double> x);

double normal_cdf(double z);
/// Inverse standard normal CDF, relative error below 1e-12 on (0, 1).
double normal_quantile(double p);

/// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
/// Seed for sub-stream `index` of a master seed. Streams are addressed by
/// index, never by the order in which they are consumed.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

using Rng = std::mt19937_64;
inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
  return Rng(stream_seed(master, index));
}

/// Empirical quantile: the ceil(p * B)-th order statistic (1-based).
double empirical_quantile(std::vector<double> values, double p);

}  // namespace ihaz
