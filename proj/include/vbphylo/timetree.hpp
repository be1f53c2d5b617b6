#pragma once

#include <span>
#include <string>
#include <vector>

#include "vbphylo/random.hpp"
#include "vbphylo/sbn.hpp"
#include "vbphylo/tree.hpp"

namespace vbphylo {

// Per-taxon sampling times, backwards from the most recent sample at 0.
struct SamplingTimes {
  std::vector<double> times;  // by taxon index

  static SamplingTimes zeros(int n_taxa) { return {std::vector<double>(n_taxa, 0.0)}; }
  // CSV "taxon,time"; taxa missing from the file default to 0.
  static SamplingTimes read_csv(const std::string& path, const TaxonSet& taxa);
  void validate() const;  // min must be 0, all nonnegative
};

// Postorder max-propagation of tip times: the smallest height each internal
// node can take.
std::vector<double> height_lower_bounds(const RootedTopology& tree, const SamplingTimes& times);

struct HeightTransformResult {
  std::vector<double> heights;  // by node id; leaf slots are the tip times
  std::vector<double> theta;    // by node id; internal non-root nodes only
  double root_gap = 0.0;        // T = exp(alpha_root)
  double log_jacobian = 0.0;    // log |d(heights)/d(alpha)|
};

// Preorder construction: root height = bound + exp(alpha_root); every other
// internal node interpolates between its parent and its own bound through a
// logistic theta. Total on finite alpha and always strictly monotone.
HeightTransformResult heights_from_alpha(const RootedTopology& tree,
                                         const std::vector<double>& bounds,
                                         const std::vector<double>& alpha_by_node);

// Inverse map for round-trip checks; throws when heights are infeasible.
std::vector<double> alpha_from_heights(const RootedTopology& tree,
                                       const std::vector<double>& bounds,
                                       const std::vector<double>& heights);

// Reverse sweep through the transform: given dF/dheights accumulated by node
// id (internal nodes; F may include the likelihood, coalescent, ...), return
// dF/dalpha by node id. When with_log_jacobian is set, the log-Jacobian's own
// dependence on heights and alpha is folded in.
std::vector<double> backprop_heights_to_alpha(const RootedTopology& tree,
                                              const std::vector<double>& bounds,
                                              const HeightTransformResult& transform,
                                              std::vector<double> d_heights,
                                              bool with_log_jacobian);

// --- Coalescent ---

enum class CoalescentKind { kConstant, kSkyride };

struct CoalescentConfig {
  CoalescentKind kind = CoalescentKind::kConstant;
  double constant_mu0 = 0.0;     // prior N(mu0, sigma0^2) on gamma_e
  double constant_sigma0 = 10.0;
  double skyride_a = 0.001;      // gamma hyperprior on the GMRF precision
  double skyride_b = 0.001;
  std::vector<double> skyride_delta;  // smoothing; defaults to all ones

  int n_gamma(int n_taxa) const {
    return kind == CoalescentKind::kConstant ? 1 : n_taxa - 1;
  }
};

// Heterochronous piecewise-constant coalescent density (the isochronous form
// is the all-tips-at-zero special case). For the skyride, gamma[0] is the
// oldest segment (ending at the root) and gamma.back() the most recent, with
// the newest segment extended down to time 0. Throws on non-monotone heights.
double coalescent_log_density(const RootedTopology& tree, const std::vector<double>& heights,
                              std::span<const double> gamma, CoalescentKind kind);

struct CoalescentGradient {
  std::vector<double> d_heights;  // by node id; internal nodes only
  std::vector<double> d_gamma;
};
CoalescentGradient coalescent_log_density_gradient(const RootedTopology& tree,
                                                   const std::vector<double>& heights,
                                                   std::span<const double> gamma,
                                                   CoalescentKind kind);

// Marginalized GMRF prior on gamma, up to an additive constant.
double skyride_log_prior(std::span<const double> gamma, double a, double b,
                         std::span<const double> delta);
void add_skyride_log_prior_gradient(std::span<const double> gamma, double a, double b,
                                    std::span<const double> delta, double coeff,
                                    std::span<double> out);

double constant_gamma_log_prior(double gamma_e, double mu0, double sigma0);

// --- Clock ---

// Strict clock: q_(i->j) = r * (t_i - t_j), indexed by child node id.
std::vector<double> clock_branch_lengths(const RootedTopology& tree,
                                         const std::vector<double>& heights, double rate);

// --- Variational height model ---

// Diagonal-normal distribution over the height transform's alpha, amortized
// over rooted topologies: the root entry is keyed by the root subsplit and
// every other internal node by its clade. PSP mode adds pair terms (the
// node's own pair with its parent plus the pairs of its internal children),
// summed into mu and log sigma like the branch case.
class HeightModel {
 public:
  HeightModel(const SubsplitSupport* support, bool psp);

  std::vector<double> mu_root, log_sigma_root;    // per root subsplit
  std::vector<double> mu_clade, log_sigma_clade;  // per clade
  std::vector<double> mu_psp, log_sigma_psp;      // per flat PCSP index

  bool psp() const { return psp_; }

  struct NodeKeys {
    bool is_root = false;
    int base = -1;                  // root-subsplit or clade index
    std::vector<int> pair_indices;  // flat PCSP indices
  };
  struct TreeKeys {
    std::vector<NodeKeys> by_node;  // by node id; leaves unused
    std::vector<int> internal_preorder;
  };
  TreeKeys resolve(const RootedTopology& tree) const;

  std::pair<double, double> node_params(const NodeKeys& keys) const;  // (mu, sigma)

  struct Sample {
    std::vector<double> alpha;  // by node id
    std::vector<double> eps;    // by node id
    double log_density = 0.0;   // N(alpha; mu, sigma) over internal nodes
  };
  Sample sample(const TreeKeys& keys, Rng& rng) const;

  struct Gradient {
    std::vector<double> mu_root, log_sigma_root, mu_clade, log_sigma_clade, mu_psp,
        log_sigma_psp;
  };
  Gradient zero_gradient() const;

  // Pathwise gradient: d_alpha is dF/dalpha for F excluding -log Q(alpha);
  // the explicit entropy terms are added here.
  void add_pathwise_gradient(const TreeKeys& keys, const Sample& sample,
                             const std::vector<double>& d_alpha, double coeff,
                             Gradient& out) const;

 private:
  const SubsplitSupport* support_;
  bool psp_;
};

}  // namespace vbphylo
