#include "vbphylo/numeric.hpp"

#include <algorithm>
#include <cassert>

namespace vbphylo {

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return kNegInf;
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;  // all -inf, or a +inf/nan dominates
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

void softmax(std::span<const double> x, std::span<double> out) {
  assert(x.size() == out.size());
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    acc += out[i];
  }
  for (size_t i = 0; i < x.size(); ++i) out[i] /= acc;
}

std::vector<double> normalized_exp(std::span<const double> x) {
  std::vector<double> out(x.size());
  softmax(x, out);
  return out;
}

double log_double_factorial_rooted(int n_taxa) {
  double acc = 0.0;
  for (int k = 2; k <= n_taxa; ++k) acc += std::log(static_cast<double>(2 * k - 3));
  return acc;
}

double log_double_factorial_unrooted(int n_taxa) {
  double acc = 0.0;
  for (int k = 4; k <= n_taxa; ++k) acc += std::log(static_cast<double>(2 * k - 5));
  return acc;
}

}  // namespace vbphylo
