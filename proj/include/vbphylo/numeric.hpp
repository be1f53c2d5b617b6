#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace vbphylo {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(x[i])), stable under large magnitudes; empty input -> -inf.
double log_sum_exp(std::span<const double> x);

inline double log_mean_exp(std::span<const double> x) {
  if (x.empty()) return kNegInf;
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

// softmax with max subtraction, written into out (same length as x).
void softmax(std::span<const double> x, std::span<double> out);

// Normalized weights w[i] = exp(x[i]) / sum_j exp(x[j]).
std::vector<double> normalized_exp(std::span<const double> x);

inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log((2n-3)!!), the number of rooted topologies on n >= 2 leaves.
double log_double_factorial_rooted(int n_taxa);

// log((2n-5)!!), the number of unrooted topologies on n >= 3 leaves.
double log_double_factorial_unrooted(int n_taxa);

}  // namespace vbphylo
