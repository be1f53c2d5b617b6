#pragma once

#include <array>
#include <memory>
#include <vector>

#include "vbphylo/alignment.hpp"
#include "vbphylo/random.hpp"
#include "vbphylo/tree.hpp"

namespace vbphylo {

using Matrix4 = std::array<std::array<double, 4>, 4>;

// Time-reversible nucleotide substitution model: stationary distribution and
// transition matrices P(t) with d/dt available for branch gradients.
class SubstModel {
 public:
  virtual ~SubstModel() = default;
  virtual std::array<double, 4> stationary() const = 0;
  virtual void transition(double t, Matrix4& p) const = 0;
  virtual void transition_derivative(double t, Matrix4& dp) const = 0;
  virtual bool reversible() const { return true; }
};

class Jc69Model final : public SubstModel {
 public:
  std::array<double, 4> stationary() const override { return {0.25, 0.25, 0.25, 0.25}; }
  // diagonal 1/4 + (3/4)e^{-4t/3}, off-diagonal 1/4 - (1/4)e^{-4t/3}
  void transition(double t, Matrix4& p) const override;
  void transition_derivative(double t, Matrix4& dp) const override;
};

// Rooted evaluation order for the pruning algorithm. Rooted topologies map
// directly (edge key = child node id); unrooted topologies are rooted at the
// internal node adjacent to taxon 0, whose three neighbors all become
// children (edge key = unrooted edge id).
struct PruningView {
  struct VNode {
    int taxon = -1;  // >= 0 for leaves
    std::vector<int> children;          // indices into nodes
    std::vector<double> child_lengths;  // parallel
    std::vector<int> child_edge_keys;   // parallel; caller's edge identifiers
  };
  std::vector<VNode> nodes;  // postorder: children precede parents
  int root = -1;
  int n_edge_keys = 0;
};

PruningView pruning_view(const RootedTopology& tree, const std::vector<double>& lengths);
PruningView pruning_view(const UnrootedTopology& tree, const std::vector<double>& lengths);

// Felsenstein pruning with per-node partial rescaling (scalers accumulate in
// log space, so any site count is safe).
double log_likelihood(const PruningView& view, const PatternTable& patterns,
                      const SubstModel& model);

struct LikelihoodGradient {
  double log_likelihood = 0.0;
  std::vector<double> d_log_likelihood;  // indexed by edge key
};

// One postorder and one preorder sweep give the likelihood together with
// analytic d log L / d q_e for every edge.
LikelihoodGradient log_likelihood_gradient(const PruningView& view,
                                           const PatternTable& patterns,
                                           const SubstModel& model);

// Convenience wrappers over the topology types.
double log_likelihood(const RootedTopology& tree, const std::vector<double>& lengths,
                      const PatternTable& patterns, const SubstModel& model);
double log_likelihood(const UnrootedTopology& tree, const std::vector<double>& lengths,
                      const PatternTable& patterns, const SubstModel& model);
LikelihoodGradient log_likelihood_gradient(const UnrootedTopology& tree,
                                           const std::vector<double>& lengths,
                                           const PatternTable& patterns,
                                           const SubstModel& model);

// Draw the root state from the stationary distribution and walk transitions
// down the tree, i.i.d. across sites.
Alignment simulate_alignment(const RootedTopology& tree, const std::vector<double>& lengths,
                             const SubstModel& model, int n_sites, Rng& rng);
Alignment simulate_alignment(const UnrootedTopology& tree, const std::vector<double>& lengths,
                             const SubstModel& model, int n_sites, Rng& rng);

}  // namespace vbphylo
