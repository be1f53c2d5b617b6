#pragma once

#include <vector>

#include "vbphylo/random.hpp"
#include "vbphylo/sbn.hpp"
#include "vbphylo/tree.hpp"

namespace vbphylo {

// Amortized lognormal branch-length distribution over unrooted topologies.
// Each edge's (mu, log sigma) is the split parameter plus, in PSP mode, the
// parameters of the edge's primary subsplit pairs; sigma is exponentiated
// after summation so it stays positive under unconstrained updates. PSPs
// absent from the support contribute zero, which keeps evaluation total.
class BranchModel {
 public:
  BranchModel(const SubsplitSupport* support, bool psp);

  const SubsplitSupport& support() const { return *support_; }
  bool psp() const { return psp_; }

  // Parameter blocks, all aligned to the support ordering.
  std::vector<double> mu_split, log_sigma_split;  // one per root subsplit
  std::vector<double> mu_psp, log_sigma_psp;      // one per PCSP (flat pair index)

  // Pairing of an edge with its parameter keys, resolved once per topology.
  struct EdgeKeys {
    int split = -1;                 // index into S_r; required
    std::vector<int> pair_indices;  // flat PCSP indices present in support
  };
  struct TreeKeys {
    std::vector<EdgeKeys> edges;  // by edge id
  };
  TreeKeys resolve(const UnrootedTopology& tree) const;
  TreeKeys resolve(const UnrootedTopology& tree, const EdgeCladeTable& table) const;

  // (mu_e, sigma_e) for one edge.
  std::pair<double, double> edge_params(const EdgeKeys& keys) const;
  std::pair<double, double> edge_params(const UnrootedTopology& tree, int edge) const;

  struct Sample {
    std::vector<double> lengths;  // q_e = exp(mu + sigma * eps)
    std::vector<double> eps;      // standard-normal draws, kept for reparameterization
    double log_density = 0.0;
  };
  Sample sample(const TreeKeys& keys, Rng& rng) const;

  // Sum of lognormal log-densities at fixed q; throws on nonpositive lengths.
  double log_density(const TreeKeys& keys, const std::vector<double>& lengths) const;

  // d log_density / d(parameters) at fixed q, scattered into dense blocks of
  // the same shapes as the parameter vectors.
  struct Gradient {
    std::vector<double> mu_split, log_sigma_split, mu_psp, log_sigma_psp;
  };
  Gradient zero_gradient() const;
  void add_log_density_gradient(const TreeKeys& keys, const std::vector<double>& lengths,
                                double coeff, Gradient& out) const;

  // Pathwise gradient hook: given dF/dq_e for a reparameterized sample
  // (q = exp(mu + sigma*eps)) and the explicit d(-log Q)/d(mu, sigma) terms,
  // accumulate coeff * dF/d(parameters). `d_logjoint_dq` excludes -log Q; the
  // entropy part is handled here analytically.
  void add_pathwise_gradient(const TreeKeys& keys, const Sample& sample,
                             const std::vector<double>& d_logjoint_dq, double coeff,
                             Gradient& out) const;

  int n_params() const;

 private:
  const SubsplitSupport* support_;
  bool psp_;
};

// Independent Exp(rate) prior over branch lengths.
double exp_branch_log_prior(const std::vector<double>& lengths, double rate);
// d log prior / d q_e is just -rate for every edge.

}  // namespace vbphylo
