#pragma once

#include <unordered_map>
#include <utility>
#include <vector>

#include "vbphylo/random.hpp"
#include "vbphylo/subsplit.hpp"
#include "vbphylo/tree.hpp"

namespace vbphylo {

// Enumerated support of an SBN: the root subsplits, the per-(parent, side)
// child subsplit sets, and (for rooted/time-tree use) the observed clades.
// Every trainable parameter is indexed through this structure. Conditioning
// sets of size one carry no parameter; their probability is fixed at 1.
class SubsplitSupport {
 public:
  struct ChildSet {
    Subsplit parent;
    int side = 0;  // 0 = y, 1 = z
    std::vector<Subsplit> children;   // sorted by encoding
    int param_offset = -1;            // -1 when |children| == 1
  };

  SubsplitSupport() = default;
  explicit SubsplitSupport(TaxonSet taxa) : taxa_(std::move(taxa)) {}

  const TaxonSet& taxa() const { return taxa_; }

  void add_root_subsplit(const Subsplit& s);
  void add_pcsp(const Pcsp& pcsp);
  void add_clade(const Clade& c);

  // Sorts everything and assigns parameter offsets; call after the last add.
  void finalize();
  bool finalized() const { return finalized_; }

  int n_root_subsplits() const { return static_cast<int>(root_subsplits_.size()); }
  int n_pcsps() const;
  int n_clades() const { return static_cast<int>(clades_.size()); }
  int n_child_sets() const { return static_cast<int>(child_sets_.size()); }
  int param_count() const { return param_count_; }
  int root_param_offset() const { return root_param_offset_; }

  const std::vector<Subsplit>& root_subsplits() const { return root_subsplits_; }
  const std::vector<ChildSet>& child_sets() const { return child_sets_; }
  const std::vector<Clade>& clades() const { return clades_; }

  // -1 when absent.
  int root_index(const Subsplit& s) const;
  int clade_index(const Clade& c) const;
  int child_set_index(const Subsplit& parent, int side) const;
  // (child set index, position within set); (-1, -1) when absent.
  std::pair<int, int> pcsp_location(const Pcsp& pcsp) const;
  // Flat parameter index of a PCSP, or -1 when absent or unparameterized.
  int pcsp_param_index(const Pcsp& pcsp) const;
  // Flat index over all PCSPs (counting every child set member, including
  // singleton sets); -1 when absent. Keys the PSP branch/height parameters.
  int pcsp_flat_index(const Pcsp& pcsp) const;
  int child_set_flat_offset(int set_index) const { return child_set_flat_offset_[set_index]; }

 private:
  struct ParentSideKey {
    Subsplit parent;
    int side;
    bool operator==(const ParentSideKey& o) const {
      return side == o.side && parent == o.parent;
    }
  };
  struct ParentSideHash {
    size_t operator()(const ParentSideKey& k) const {
      return k.parent.hash() * 31 + static_cast<size_t>(k.side);
    }
  };

  TaxonSet taxa_;
  std::vector<Subsplit> root_subsplits_;
  std::vector<ChildSet> child_sets_;
  std::vector<Clade> clades_;
  std::unordered_map<Subsplit, int, SubsplitHash> root_index_;
  std::unordered_map<ParentSideKey, int, ParentSideHash> child_set_index_;
  std::unordered_map<Pcsp, std::pair<int, int>, PcspHash> pcsp_index_;
  std::unordered_map<Clade, int, BitsetHash> clade_index_;
  std::vector<int> child_set_flat_offset_;
  int root_param_offset_ = -1;
  int param_count_ = 0;
  bool finalized_ = false;
};

// Sparse SBN gradient: (flat parameter index, value) pairs, at most one entry
// per parameter.
using SbnGradient = std::vector<std::pair<int, double>>;

struct UnrootedProbResult {
  double prob = 0.0;
  std::vector<double> edge_probs;  // rooted probability per rooting edge
};

// Softmax-parameterized SBN over the support. Parameters live in one flat
// vector; CPDs are rebuilt eagerly on every parameter change so evaluation
// methods are const and safe to share across threads.
class SbnModel {
 public:
  explicit SbnModel(const SubsplitSupport* support);

  const SubsplitSupport& support() const { return *support_; }
  const std::vector<double>& params() const { return phi_; }
  void set_params(std::vector<double> phi);
  // phi += step (e.g. an optimizer update), then refresh CPDs.
  void update_params(const std::vector<double>& step);

  // CPD over the root conditioning set.
  std::vector<double> cpd_root() const;
  // CPD over a child conditioning set; throws when (parent, side) is absent.
  std::vector<double> cpd_children(const Subsplit& parent, int side) const;

  // Probability of a rooted topology; 0 / -inf when out of support.
  double log_rooted_prob(const RootedTopology& tree) const;
  double rooted_prob(const RootedTopology& tree) const;

  // Two-pass linear-time unrooted probability with per-edge rooted
  // probabilities as a by-product. Out-of-support rootings contribute 0.
  UnrootedProbResult unrooted_prob(const UnrootedTopology& tree) const;
  UnrootedProbResult unrooted_prob(const UnrootedTopology& tree,
                                   const EdgeCladeTable& table) const;
  // Quadratic-time oracle: sum of rooted probabilities over all rootings.
  double unrooted_prob_naive(const UnrootedTopology& tree) const;
  double log_unrooted_prob(const UnrootedTopology& tree) const;

  RootedTopology sample_rooted(Rng& rng) const;
  UnrootedTopology sample_unrooted(Rng& rng) const;

  // d log p / d phi for an in-support rooted tree; throws otherwise.
  SbnGradient grad_log_rooted(const RootedTopology& tree) const;
  // Linear-time unrooted gradient via per-PCSP coefficients accumulated from
  // edge rooting probabilities and their cumulative sums.
  SbnGradient grad_log_unrooted(const UnrootedTopology& tree) const;
  // Quadratic oracle: sum_e w_e * grad_log_rooted(root_at_edge(e)).
  SbnGradient grad_log_unrooted_naive(const UnrootedTopology& tree) const;

 private:
  double log_cpd_at(int set_offset, int set_size, int pos) const;
  // Linear CPD value of entry pos within a conditioning set.
  double cpd_at(int set_offset, int set_size, int pos) const;
  void refresh_cpds();
  // CPD for the PCSP at a message step; 0 when out of support, 1 when the
  // relevant parent side is a singleton or the child is fake.
  double pcsp_prob(const Subsplit& parent, int side, const Subsplit& child) const;

  // Adds coeff * (indicator(pos) - cpd) over one conditioning set.
  void add_set_gradient(int set_index, int pos, double coeff,
                        std::vector<double>& dense) const;
  void add_root_gradient(int pos, double coeff, std::vector<double>& dense) const;

  const SubsplitSupport* support_;
  std::vector<double> phi_;
  std::vector<double> cpd_;      // linear CPDs, same layout as phi_
  std::vector<double> log_cpd_;  // exact log CPDs (phi - logsumexp)
};

// Gradient helpers shared with the trainer.
SbnGradient sparsify(const std::vector<double>& dense);

}  // namespace vbphylo
