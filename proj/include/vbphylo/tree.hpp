#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vbphylo/random.hpp"
#include "vbphylo/subsplit.hpp"
#include "vbphylo/taxon_set.hpp"

namespace vbphylo {

// Binary rooted topology. Leaves occupy node ids [0, n_leaves) and coincide
// with taxon indices; the root has degree 2. Children are ordered by smallest
// descendant taxon index, which makes traversals and Newick output
// deterministic. The parent edge of node v is identified by v itself, so
// branch lengths live in vectors indexed by child node id (root slot unused).
struct RootedTopology {
  struct Node {
    int parent = -1;
    int left = -1;
    int right = -1;
    bool is_leaf() const { return left < 0; }
  };

  TaxonSet taxa;
  std::vector<Node> nodes;
  std::vector<Clade> clades;  // per node, cached at construction
  int root = -1;

  int n_leaves() const { return taxa.size(); }
  int n_nodes() const { return static_cast<int>(nodes.size()); }

  // Internal node ids in postorder (children before parents, root last).
  std::vector<int> postorder_internals() const;

  // Subsplit at an internal node: (clade(left), clade(right)) normalized.
  Subsplit node_subsplit(int node) const;

  // Root subsplit plus one PCSP per non-root internal node (paired with its
  // natural parent). Fake subsplits are omitted.
  std::pair<Subsplit, std::vector<Pcsp>> subsplit_decomposition() const;

  // Canonical topology string (Newick without lengths); equal iff isomorphic.
  std::string topology_key() const;
};

// Unrooted topology: leaves of degree 1 at node ids [0, n_leaves), internal
// nodes of degree 3 after. Edges have dense ids; |edges| = 2N-3.
struct UnrootedTopology {
  struct Edge {
    int a = -1;
    int b = -1;
  };

  TaxonSet taxa;
  std::vector<std::array<int, 3>> neighbors;   // -1 padded for leaves
  std::vector<std::array<int, 3>> edge_ids;    // parallel to neighbors
  std::vector<int> degree;
  std::vector<Edge> edges;

  int n_leaves() const { return taxa.size(); }
  int n_nodes() const { return static_cast<int>(neighbors.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  int other_end(int edge, int node) const {
    return edges[edge].a == node ? edges[edge].b : edges[edge].a;
  }
  // Edge id between adjacent nodes u, v.
  int edge_between(int u, int v) const;

  std::string topology_key() const;
};

// Clades of the two subtrees obtained by cutting each edge. side(e, v) is the
// clade of the component containing v. Built in one pass from a fixed
// traversal root (the internal node adjacent to taxon 0).
class EdgeCladeTable {
 public:
  explicit EdgeCladeTable(const UnrootedTopology& tree);

  const Clade& side(int edge, int node) const {
    const auto& e = tree_->edges[edge];
    return e.a == node ? clades_[2 * edge] : clades_[2 * edge + 1];
  }
  const Clade& away_from(int edge, int node) const {
    const auto& e = tree_->edges[edge];
    return e.a == node ? clades_[2 * edge + 1] : clades_[2 * edge];
  }

  // Subsplit seen at internal node `node` looking away from neighbor `away`:
  // the normalized pair of clades toward the two remaining neighbors.
  Subsplit subsplit_at(int node, int away) const;

  // Bipartition induced by deleting the edge, as a normalized subsplit.
  Subsplit edge_split(int edge) const;

  // The internal node adjacent to the lexicographically first taxon; used as
  // the deterministic virtual root for two-pass sweeps.
  int traversal_root() const { return traversal_root_; }

 private:
  const UnrootedTopology* tree_;
  std::vector<Clade> clades_;  // 2 per edge: [a-side, b-side]
  int traversal_root_;
};

// --- Newick ---

struct NewickParse {
  bool rooted = false;
  std::optional<RootedTopology> rooted_tree;
  std::optional<UnrootedTopology> unrooted_tree;
  // Rooted: indexed by child node id; unrooted: by edge id.
  std::vector<double> lengths;
  bool has_lengths = false;
};

// Grammar subset: labels [A-Za-z0-9_.-]+, optional ":<decimal>" lengths, one
// statement ending in ';'. A degree-2 root gives a rooted tree, degree-3 an
// unrooted one; other polytomies are rejected. If taxa is given, labels must
// be drawn from it and indices follow it.
NewickParse parse_newick(std::string_view text, const TaxonSet* taxa = nullptr);
RootedTopology parse_rooted_newick(std::string_view text, const TaxonSet* taxa = nullptr);
UnrootedTopology parse_unrooted_newick(std::string_view text, const TaxonSet* taxa = nullptr);

std::string write_newick(const RootedTopology& tree, const std::vector<double>* lengths = nullptr);
std::string write_newick(const UnrootedTopology& tree, const std::vector<double>* lengths = nullptr);

// --- Rooting / unrooting ---

// Remove the degree-2 root, merging its two edges (lengths sum). N >= 3.
UnrootedTopology unroot(const RootedTopology& tree);
std::pair<UnrootedTopology, std::vector<double>> unroot_with_lengths(
    const RootedTopology& tree, const std::vector<double>& lengths);

// Insert a degree-2 root on the given edge.
RootedTopology root_at_edge(const UnrootedTopology& tree, int edge);

// Primary subsplit pairs of an edge: one PCSP per non-singleton side of the
// edge's split (pendant edges have one, internal edges two).
std::vector<Pcsp> primary_subsplit_pairs(const UnrootedTopology& tree,
                                         const EdgeCladeTable& table, int edge);

// --- Construction, enumeration, random generation ---

RootedTopology make_rooted_topology(const TaxonSet& taxa,
                                    const std::vector<std::pair<int, int>>& children_of_internal);

std::vector<RootedTopology> enumerate_rooted_topologies(const TaxonSet& taxa);
std::vector<UnrootedTopology> enumerate_unrooted_topologies(const TaxonSet& taxa);

RootedTopology random_rooted_topology(const TaxonSet& taxa, Rng& rng);
UnrootedTopology random_unrooted_topology(const TaxonSet& taxa, Rng& rng);

// All unrooted topologies one nearest-neighbor interchange away.
std::vector<UnrootedTopology> nni_neighbors(const UnrootedTopology& tree);

// Convenience taxon sets named A, B, ... or t01, t02, ... past 26.
TaxonSet default_taxa(int n);

}  // namespace vbphylo
