#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vbphylo/alignment.hpp"
#include "vbphylo/sbn.hpp"
#include "vbphylo/substitution.hpp"
#include "vbphylo/support_build.hpp"
#include "vbphylo/tree.hpp"

namespace vbphylo::testing {

// Brute-force Eq.-style likelihood: sum over every assignment of states to
// internal nodes. Exponential in the internal node count; oracle only.
double brute_force_log_likelihood(const RootedTopology& tree,
                                  const std::vector<double>& lengths,
                                  const Alignment& alignment, const SubstModel& model);

// Central finite difference of a scalar function.
inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Random positive branch lengths for a rooted tree (by child node id).
std::vector<double> random_rooted_lengths(const RootedTopology& tree, Rng& rng,
                                          double lo = 0.02, double hi = 0.6);

// Support over every rooted (or every unrooted) topology on the taxa.
SubsplitSupport full_rooted_support(const TaxonSet& taxa);
SubsplitSupport full_unrooted_support(const TaxonSet& taxa);

// Uniform(-2, 2) parameter draw for an SBN.
std::vector<double> random_phi(const SubsplitSupport& support, Rng& rng, double scale = 2.0);

// Gauss-Legendre nodes and weights on (0, 1).
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
  explicit GaussLegendre(int n);
};

// Gauss-Hermite rule rescaled for standard-normal expectations:
// E[g(eps)] ~= sum_i weights[i] * g(nodes[i]).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
  explicit GaussHermite(int n);
};

}  // namespace vbphylo::testing
