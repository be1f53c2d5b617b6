#pragma once

#include <string>
#include <vector>

#include "vbphylo/sbn.hpp"
#include "vbphylo/tree.hpp"

namespace vbphylo {

// Candidate topologies read from ".trees" files (one Newick per line, '#'
// comments). All trees must share one taxon set; rooted or unrooted is
// uniform per run.
struct CandidateTrees {
  bool rooted = false;
  TaxonSet taxa;
  std::vector<RootedTopology> rooted_trees;
  std::vector<UnrootedTopology> unrooted_trees;

  size_t size() const { return rooted ? rooted_trees.size() : unrooted_trees.size(); }
};

// first_k <= 0 keeps every tree of each file.
CandidateTrees read_candidate_trees(const std::vector<std::string>& paths, bool rooted,
                                    int first_k = 0);
CandidateTrees candidate_trees_from_newicks(const std::vector<std::string>& newicks,
                                            bool rooted);

// Unrooted mode collects, per tree, the root subsplit of every edge plus
// every parent-child pair orientation reachable by some rooting (everything
// the two-pass sweep touches). Rooted mode collects decomposition root
// subsplits, PCSPs, and all internal-node clades for time-tree height keys.
SubsplitSupport build_support(const CandidateTrees& trees);

// Add a single tree's elements to an unfinalized support.
void add_tree_to_support(SubsplitSupport& support, const UnrootedTopology& tree);
void add_tree_to_support(SubsplitSupport& support, const RootedTopology& tree);

// Reference distribution over topologies, e.g. from a golden MCMC run.
// CSV lines "newick,probability".
struct ReferenceDistribution {
  bool rooted = false;
  TaxonSet taxa;
  std::vector<RootedTopology> rooted_trees;
  std::vector<UnrootedTopology> unrooted_trees;
  std::vector<double> probs;
};

ReferenceDistribution read_reference_csv(const std::string& path, bool rooted);
ReferenceDistribution reference_from_pairs(
    const std::vector<std::pair<std::string, double>>& rows, bool rooted);

struct CoverageReport {
  double covered_posterior = 0.0;     // reference mass on trees the SBN covers
  double root_coverage = 0.0;         // |estimated ∩ truth| / |truth|
  double pcsp_coverage = 0.0;
  double root_efficiency = 0.0;       // |estimated ∩ truth| / |estimated|
  double pcsp_efficiency = 0.0;
};

CoverageReport coverage_report(const SubsplitSupport& estimated,
                               const ReferenceDistribution& reference,
                               const SubsplitSupport& truth);

}  // namespace vbphylo
