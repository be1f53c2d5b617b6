#pragma once

#include <string>
#include <vector>

#include "vbphylo/support_build.hpp"
#include "vbphylo/trainer.hpp"

namespace vbphylo {

struct MarginalLikelihoodEstimate {
  double log_estimate = 0.0;
  double std_error = 0.0;  // delta-method standard error on the log scale
  int n_samples = 0;
};

// Importance sampling of p(Y|tau) = E_Q[ p(Y|tau,q) p(q) / Q(q|tau) ] with the
// trained branch distribution as the importance distribution; log-sum-exp
// stabilized. The tree must be covered by the support.
MarginalLikelihoodEstimate tree_marginal_likelihood(const UnrootedModel& model,
                                                    const UnrootedTopology& tree,
                                                    const PatternTable& patterns,
                                                    const SubstModel& subst, int n_samples,
                                                    Rng& rng);

struct EvidenceEstimate {
  double mean = 0.0;
  double std_dev = 0.0;  // over repeats
  std::vector<double> repeats;
};

// One draw of the K-sample stochastic lower bound (a lower-bound proxy for
// log p(Y) that tightens in K), repeated `repeats` times.
EvidenceEstimate evidence_estimate(const UnrootedModel& model, const PatternTable& patterns,
                                   const SubstModel& subst, int k, int repeats, Rng& rng,
                                   int threads = 1);
EvidenceEstimate evidence_estimate(const TimeTreeModel& model, const PatternTable& patterns,
                                   const SubstModel& subst, int k, int repeats, Rng& rng,
                                   int threads = 1);

struct KlResult {
  double kl = 0.0;  // +inf when any reference tree has zero SBN probability
  std::vector<std::string> uncovered;  // offending newicks
};

// KL(reference || SBN) over the reference support: the reference-weighted
// direction, which stays finite whenever the SBN covers the reference trees.
KlResult kl_topology(const SbnModel& sbn, const ReferenceDistribution& reference);

}  // namespace vbphylo
