#include "vbphylo/tree.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <stdexcept>

namespace vbphylo {

namespace {

bool is_label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
}

// Orders children by smallest descendant taxon and fills the clade cache.
void finalize_rooted(RootedTopology& tree) {
  const int n = tree.n_nodes();
  tree.clades.assign(n, Clade(tree.taxa.size()));
  for (int v : tree.postorder_internals()) {
    auto& node = tree.nodes[v];
    const auto leaf_clade = [&](int u) {
      if (tree.nodes[u].is_leaf()) {
        Clade c(tree.taxa.size());
        c.set(u);
        return c;
      }
      return tree.clades[u];
    };
    Clade cl = leaf_clade(node.left);
    Clade cr = leaf_clade(node.right);
    if (cr.first_set() < cl.first_set()) {
      std::swap(node.left, node.right);
      std::swap(cl, cr);
    }
    tree.clades[node.left] = cl;
    tree.clades[node.right] = cr;
    tree.clades[v] = cl | cr;
  }
}

}  // namespace

std::vector<int> RootedTopology::postorder_internals() const {
  std::vector<int> order;
  order.reserve(nodes.size());
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    if (!nodes[v].is_leaf()) {
      stack.push_back(nodes[v].left);
      stack.push_back(nodes[v].right);
    }
  }
  std::vector<int> internals;
  internals.reserve(nodes.size() / 2);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!nodes[*it].is_leaf()) internals.push_back(*it);
  }
  return internals;
}

Subsplit RootedTopology::node_subsplit(int node) const {
  const auto& nd = nodes[node];
  return Subsplit::normalized(clades[nd.left], clades[nd.right]);
}

std::pair<Subsplit, std::vector<Pcsp>> RootedTopology::subsplit_decomposition() const {
  std::vector<Pcsp> pcsps;
  Subsplit root_subsplit = node_subsplit(root);
  for (int v : postorder_internals()) {
    if (v == root) continue;
    const int parent = nodes[v].parent;
    pcsps.push_back({node_subsplit(parent), node_subsplit(v)});
  }
  return {root_subsplit, std::move(pcsps)};
}

std::string RootedTopology::topology_key() const { return write_newick(*this); }

int UnrootedTopology::edge_between(int u, int v) const {
  for (int k = 0; k < degree[u]; ++k) {
    if (neighbors[u][k] == v) return edge_ids[u][k];
  }
  throw std::invalid_argument("nodes are not adjacent");
}

std::string UnrootedTopology::topology_key() const { return write_newick(*this); }

EdgeCladeTable::EdgeCladeTable(const UnrootedTopology& tree) : tree_(&tree) {
  const int width = tree.taxa.size();
  clades_.assign(2 * tree.n_edges(), Clade(width));
  traversal_root_ = tree.neighbors[0][0];

  // Postorder from the traversal root fills the rootward-facing side of each
  // edge; the opposite side is the complement.
  struct Frame {
    int node;
    int parent_edge;
    int next_child = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({traversal_root_, -1});
  while (!stack.empty()) {
    Frame& f = stack.back();
    const int v = f.node;
    if (v < tree.n_leaves()) {
      Clade c(width);
      c.set(v);
      const int side = tree.edges[f.parent_edge].a == v ? 0 : 1;
      clades_[2 * f.parent_edge + side] = std::move(c);
      stack.pop_back();
      continue;
    }
    if (f.next_child < tree.degree[v]) {
      const int k = f.next_child++;
      const int e = tree.edge_ids[v][k];
      if (e == f.parent_edge) continue;
      stack.push_back({tree.neighbors[v][k], e});
      continue;
    }
    if (f.parent_edge >= 0) {
      Clade c(width);
      for (int k = 0; k < tree.degree[v]; ++k) {
        const int e = tree.edge_ids[v][k];
        if (e == f.parent_edge) continue;
        c |= away_from(e, v);
      }
      const int side = tree.edges[f.parent_edge].a == v ? 0 : 1;
      clades_[2 * f.parent_edge + side] = std::move(c);
    }
    stack.pop_back();
  }
  for (int e = 0; e < tree.n_edges(); ++e) {
    if (clades_[2 * e].none()) {
      clades_[2 * e] = clades_[2 * e + 1].complement();
    } else {
      clades_[2 * e + 1] = clades_[2 * e].complement();
    }
  }
}

Subsplit EdgeCladeTable::subsplit_at(int node, int away) const {
  const Clade* sides[2];
  int found = 0;
  for (int k = 0; k < tree_->degree[node]; ++k) {
    const int u = tree_->neighbors[node][k];
    if (u == away) continue;
    sides[found++] = &away_from(tree_->edge_ids[node][k], node);
  }
  if (found != 2) throw std::invalid_argument("subsplit_at requires an internal node");
  return Subsplit::normalized(*sides[0], *sides[1]);
}

Subsplit EdgeCladeTable::edge_split(int edge) const {
  return Subsplit::normalized(clades_[2 * edge], clades_[2 * edge + 1]);
}

// --- Newick parsing ---

namespace {

struct ParseNode {
  std::vector<int> children;
  std::string label;
  double length = 0.0;
  bool has_length = false;
};

class NewickReader {
 public:
  explicit NewickReader(std::string_view text) : text_(text) {}

  // Returns the root parse-node index.
  int run(std::vector<ParseNode>& nodes) {
    skip_space();
    const int root = parse_subtree(nodes);
    if (nodes[root].has_length) fail("branch length on the root");
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != ';') fail("missing ';'");
    ++pos_;
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    return root;
  }

 private:
  int parse_subtree(std::vector<ParseNode>& nodes) {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (text_[pos_] == '(') {
      ++pos_;
      // the recursive call may reallocate `nodes`; never hold nodes[id] across it
      const int first_child = parse_subtree(nodes);
      nodes[id].children.push_back(first_child);
      skip_space();
      while (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        const int child = parse_subtree(nodes);
        nodes[id].children.push_back(child);
        skip_space();
      }
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      skip_space();
      if (pos_ < text_.size() && is_label_char(text_[pos_])) {
        fail("internal node labels are not supported");
      }
    } else {
      const size_t start = pos_;
      while (pos_ < text_.size() && is_label_char(text_[pos_])) ++pos_;
      if (pos_ == start) fail("expected a taxon label");
      nodes[id].label = std::string(text_.substr(start, pos_ - start));
    }
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ':') {
      ++pos_;
      nodes[id].length = parse_number();
      nodes[id].has_length = true;
    }
    return id;
  }

  double parse_number() {
    skip_space();
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a branch length");
    pos_ += static_cast<size_t>(end - begin);
    return v;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("newick parse error at position " + std::to_string(pos_) +
                                ": " + why);
  }

  std::string_view text_;
  size_t pos_ = 0;
};

TaxonSet resolve_taxa(const std::vector<ParseNode>& nodes, const TaxonSet* taxa) {
  std::vector<std::string> labels;
  for (const auto& n : nodes) {
    if (n.children.empty()) labels.push_back(n.label);
  }
  {
    auto sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("duplicate taxon label in newick");
    }
  }
  if (taxa == nullptr) return TaxonSet(labels);
  for (const auto& l : labels) {
    if (!taxa->contains(l)) throw std::invalid_argument("label not in taxon set: " + l);
  }
  if (static_cast<int>(labels.size()) != taxa->size()) {
    throw std::invalid_argument("tree does not cover the taxon set");
  }
  return *taxa;
}

}  // namespace

NewickParse parse_newick(std::string_view text, const TaxonSet* taxa) {
  std::vector<ParseNode> pnodes;
  const int proot = NewickReader(text).run(pnodes);
  if (pnodes[proot].children.empty()) throw std::invalid_argument("single-leaf newick");
  for (size_t i = 0; i < pnodes.size(); ++i) {
    const auto& n = pnodes[i];
    if (n.children.empty()) {
      if (n.label.empty()) throw std::invalid_argument("leaf without a label");
    } else if (static_cast<int>(i) != proot && n.children.size() != 2) {
      throw std::invalid_argument("polytomy at an internal node");
    }
  }
  const size_t root_degree = pnodes[proot].children.size();
  if (root_degree != 2 && root_degree != 3) {
    throw std::invalid_argument("root must have degree 2 (rooted) or 3 (unrooted)");
  }

  const TaxonSet resolved = resolve_taxa(pnodes, taxa);
  const int n = resolved.size();

  // All-or-nothing branch lengths.
  int with_len = 0;
  int total_edges = 0;
  for (size_t i = 0; i < pnodes.size(); ++i) {
    if (static_cast<int>(i) == proot) continue;
    ++total_edges;
    if (pnodes[i].has_length) ++with_len;
  }
  if (with_len != 0 && with_len != total_edges) {
    throw std::invalid_argument("branch lengths must be present on all edges or none");
  }

  NewickParse out;
  out.has_lengths = with_len > 0;
  out.rooted = root_degree == 2;

  // Map parse nodes to final ids: leaves take taxon indices, internals are
  // numbered in parse order starting at n.
  std::vector<int> final_id(pnodes.size(), -1);
  int next_internal = n;
  for (size_t i = 0; i < pnodes.size(); ++i) {
    final_id[i] = pnodes[i].children.empty() ? resolved.index_of(pnodes[i].label)
                                             : next_internal++;
  }

  if (out.rooted) {
    RootedTopology tree;
    tree.taxa = resolved;
    tree.nodes.resize(pnodes.size());
    tree.root = final_id[proot];
    out.lengths.assign(pnodes.size(), 0.0);
    for (size_t i = 0; i < pnodes.size(); ++i) {
      const int v = final_id[i];
      out.lengths[v] = pnodes[i].length;
      if (!pnodes[i].children.empty()) {
        tree.nodes[v].left = final_id[pnodes[i].children[0]];
        tree.nodes[v].right = final_id[pnodes[i].children[1]];
        for (int c : pnodes[i].children) tree.nodes[final_id[c]].parent = v;
      }
    }
    finalize_rooted(tree);
    out.rooted_tree = std::move(tree);
  } else {
    if (n < 3) throw std::invalid_argument("unrooted tree needs at least 3 taxa");
    UnrootedTopology tree;
    tree.taxa = resolved;
    tree.neighbors.assign(pnodes.size(), {-1, -1, -1});
    tree.edge_ids.assign(pnodes.size(), {-1, -1, -1});
    tree.degree.assign(pnodes.size(), 0);
    const auto link = [&tree](int u, int v, int e) {
      tree.neighbors[u][tree.degree[u]] = v;
      tree.edge_ids[u][tree.degree[u]] = e;
      ++tree.degree[u];
    };
    for (size_t i = 0; i < pnodes.size(); ++i) {
      for (int c : pnodes[i].children) {
        const int e = tree.n_edges();
        tree.edges.push_back({final_id[i], final_id[c]});
        out.lengths.push_back(pnodes[c].length);
        link(final_id[i], final_id[c], e);
        link(final_id[c], final_id[i], e);
      }
    }
    out.unrooted_tree = std::move(tree);
  }
  return out;
}

RootedTopology parse_rooted_newick(std::string_view text, const TaxonSet* taxa) {
  auto parsed = parse_newick(text, taxa);
  if (!parsed.rooted) throw std::invalid_argument("expected a rooted newick");
  return std::move(*parsed.rooted_tree);
}

UnrootedTopology parse_unrooted_newick(std::string_view text, const TaxonSet* taxa) {
  auto parsed = parse_newick(text, taxa);
  if (parsed.rooted) throw std::invalid_argument("expected an unrooted newick");
  return std::move(*parsed.unrooted_tree);
}

// --- Newick writing ---

namespace {

void format_length(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  out += ':';
  out += buf;
}

void write_rooted_subtree(const RootedTopology& tree, int v, const std::vector<double>* lengths,
                          std::string& out) {
  const auto& node = tree.nodes[v];
  if (node.is_leaf()) {
    out += tree.taxa.name(v);
  } else {
    out += '(';
    write_rooted_subtree(tree, node.left, lengths, out);
    out += ',';
    write_rooted_subtree(tree, node.right, lengths, out);
    out += ')';
  }
  if (lengths != nullptr && v != tree.root) format_length(out, (*lengths)[v]);
}

void write_unrooted_subtree(const UnrootedTopology& tree, const EdgeCladeTable& table, int v,
                            int parent_edge, const std::vector<double>* lengths,
                            std::string& out) {
  if (v < tree.n_leaves()) {
    out += tree.taxa.name(v);
  } else {
    // order child subtrees by their smallest taxon index
    std::vector<std::pair<int, int>> kids;  // (min taxon, neighbor slot)
    for (int k = 0; k < tree.degree[v]; ++k) {
      const int e = tree.edge_ids[v][k];
      if (e == parent_edge) continue;
      kids.emplace_back(table.away_from(e, v).first_set(), k);
    }
    std::sort(kids.begin(), kids.end());
    out += '(';
    for (size_t i = 0; i < kids.size(); ++i) {
      if (i > 0) out += ',';
      const int k = kids[i].second;
      write_unrooted_subtree(tree, table, tree.neighbors[v][k], tree.edge_ids[v][k], lengths,
                             out);
    }
    out += ')';
  }
  if (lengths != nullptr && parent_edge >= 0) format_length(out, (*lengths)[parent_edge]);
}

}  // namespace

std::string write_newick(const RootedTopology& tree, const std::vector<double>* lengths) {
  std::string out;
  write_rooted_subtree(tree, tree.root, lengths, out);
  out += ';';
  return out;
}

std::string write_newick(const UnrootedTopology& tree, const std::vector<double>* lengths) {
  EdgeCladeTable table(tree);
  std::string out;
  write_unrooted_subtree(tree, table, table.traversal_root(), -1, lengths, out);
  out += ';';
  return out;
}

// --- Rooting / unrooting ---

namespace {

UnrootedTopology unrooted_from_edges(const TaxonSet& taxa,
                                     const std::vector<std::pair<int, int>>& edge_list,
                                     int n_nodes) {
  UnrootedTopology tree;
  tree.taxa = taxa;
  tree.neighbors.assign(n_nodes, {-1, -1, -1});
  tree.edge_ids.assign(n_nodes, {-1, -1, -1});
  tree.degree.assign(n_nodes, 0);
  for (const auto& [a, b] : edge_list) {
    const int e = tree.n_edges();
    tree.edges.push_back({a, b});
    tree.neighbors[a][tree.degree[a]] = b;
    tree.edge_ids[a][tree.degree[a]] = e;
    ++tree.degree[a];
    tree.neighbors[b][tree.degree[b]] = a;
    tree.edge_ids[b][tree.degree[b]] = e;
    ++tree.degree[b];
  }
  return tree;
}

}  // namespace

UnrootedTopology unroot(const RootedTopology& tree) {
  return unroot_with_lengths(tree, std::vector<double>(tree.n_nodes(), 0.0)).first;
}

std::pair<UnrootedTopology, std::vector<double>> unroot_with_lengths(
    const RootedTopology& tree, const std::vector<double>& lengths) {
  const int n = tree.n_leaves();
  if (n < 3) throw std::invalid_argument("cannot unroot a tree with fewer than 3 taxa");
  // Old internal ids (excluding the root) map to n, n+1, ... in id order.
  std::vector<int> remap(tree.n_nodes(), -1);
  int next = n;
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v < n) {
      remap[v] = v;
    } else if (v != tree.root) {
      remap[v] = next++;
    }
  }
  std::vector<std::pair<int, int>> edge_list;
  std::vector<double> edge_lengths;
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v == tree.root || tree.nodes[v].parent == tree.root) continue;
    edge_list.emplace_back(remap[v], remap[tree.nodes[v].parent]);
    edge_lengths.push_back(lengths[v]);
  }
  const int c1 = tree.nodes[tree.root].left;
  const int c2 = tree.nodes[tree.root].right;
  edge_list.emplace_back(remap[c1], remap[c2]);
  edge_lengths.push_back(lengths[c1] + lengths[c2]);
  return {unrooted_from_edges(tree.taxa, edge_list, 2 * n - 2), std::move(edge_lengths)};
}

RootedTopology root_at_edge(const UnrootedTopology& tree, int edge) {
  const int n = tree.n_leaves();
  RootedTopology out;
  out.taxa = tree.taxa;
  out.nodes.resize(tree.n_nodes() + 1);
  out.root = tree.n_nodes();
  const int a = tree.edges[edge].a;
  const int b = tree.edges[edge].b;
  out.nodes[out.root].left = a;
  out.nodes[out.root].right = b;
  out.nodes[a].parent = out.root;
  out.nodes[b].parent = out.root;
  // orient everything else away from the root edge
  std::vector<std::pair<int, int>> stack{{a, b}, {b, a}};
  while (!stack.empty()) {
    const auto [v, from] = stack.back();
    stack.pop_back();
    if (v < n) continue;
    int kids[2];
    int found = 0;
    for (int k = 0; k < tree.degree[v]; ++k) {
      const int u = tree.neighbors[v][k];
      if (u == from) continue;
      kids[found++] = u;
      out.nodes[u].parent = v;
      stack.emplace_back(u, v);
    }
    out.nodes[v].left = kids[0];
    out.nodes[v].right = kids[1];
  }
  finalize_rooted(out);
  return out;
}

std::vector<Pcsp> primary_subsplit_pairs(const UnrootedTopology& tree,
                                         const EdgeCladeTable& table, int edge) {
  const Subsplit root_subsplit = table.edge_split(edge);
  std::vector<Pcsp> pairs;
  for (int v : {tree.edges[edge].a, tree.edges[edge].b}) {
    if (v < tree.n_leaves()) continue;
    pairs.push_back({root_subsplit, table.subsplit_at(v, tree.other_end(edge, v))});
  }
  return pairs;
}

// --- Construction and enumeration ---

RootedTopology make_rooted_topology(const TaxonSet& taxa,
                                    const std::vector<std::pair<int, int>>& children_of_internal) {
  const int n = taxa.size();
  RootedTopology tree;
  tree.taxa = taxa;
  tree.nodes.resize(n + children_of_internal.size());
  for (size_t i = 0; i < children_of_internal.size(); ++i) {
    const int v = n + static_cast<int>(i);
    tree.nodes[v].left = children_of_internal[i].first;
    tree.nodes[v].right = children_of_internal[i].second;
    tree.nodes[children_of_internal[i].first].parent = v;
    tree.nodes[children_of_internal[i].second].parent = v;
  }
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (tree.nodes[v].parent < 0 && !tree.nodes[v].is_leaf()) tree.root = v;
  }
  if (tree.root < 0) {
    if (tree.n_nodes() != 1) throw std::invalid_argument("no root found");
    tree.root = 0;
  }
  finalize_rooted(tree);
  return tree;
}

namespace {

constexpr int kMaxEnumerationTaxa = 8;

// Mutable scaffold for stepwise leaf insertion: parent/child arrays over
// preallocated node ids; leaf k is attached via new internal node n + k - 1.
struct RootedScaffold {
  std::vector<int> parent, left, right;
  int root = 0;
  int n = 0;

  explicit RootedScaffold(int n_taxa)
      : parent(2 * n_taxa - 1, -1), left(2 * n_taxa - 1, -1), right(2 * n_taxa - 1, -1),
        n(n_taxa) {}

  // Attach leaf together with a fresh internal node above `at` (or a new root
  // above the old root when at == root).
  void attach(int leaf, int at, int fresh) {
    const int p = parent[at];
    parent[fresh] = p;
    left[fresh] = at;
    right[fresh] = leaf;
    parent[at] = fresh;
    parent[leaf] = fresh;
    if (p < 0) {
      root = fresh;
    } else if (left[p] == at) {
      left[p] = fresh;
    } else {
      right[p] = fresh;
    }
  }

  void detach(int leaf, int at, int fresh) {
    const int p = parent[fresh];
    parent[at] = p;
    parent[leaf] = -1;
    parent[fresh] = -1;
    left[fresh] = right[fresh] = -1;
    if (p < 0) {
      root = at;
    } else if (left[p] == fresh) {
      left[p] = at;
    } else {
      right[p] = at;
    }
  }

  RootedTopology materialize(const TaxonSet& taxa) const {
    std::vector<std::pair<int, int>> kids;
    kids.reserve(n - 1);
    for (int v = n; v < 2 * n - 1; ++v) kids.emplace_back(left[v], right[v]);
    return make_rooted_topology(taxa, kids);
  }

  // Nodes currently in the tree, as insertion points.
  void collect_nodes(int v, std::vector<int>& out) const {
    out.push_back(v);
    if (left[v] >= 0) {
      collect_nodes(left[v], out);
      collect_nodes(right[v], out);
    }
  }
};

void enumerate_rooted_rec(RootedScaffold& scaffold, int next_leaf, const TaxonSet& taxa,
                          std::vector<RootedTopology>& out) {
  if (next_leaf == scaffold.n) {
    out.push_back(scaffold.materialize(taxa));
    return;
  }
  std::vector<int> spots;
  scaffold.collect_nodes(scaffold.root, spots);
  const int fresh = scaffold.n + next_leaf - 1;
  for (int at : spots) {
    scaffold.attach(next_leaf, at, fresh);
    enumerate_rooted_rec(scaffold, next_leaf + 1, taxa, out);
    scaffold.detach(next_leaf, at, fresh);
  }
}

void enumerate_unrooted_rec(std::vector<std::pair<int, int>>& edge_list, int next_leaf, int n,
                            const TaxonSet& taxa, std::vector<UnrootedTopology>& out) {
  if (next_leaf == n) {
    out.push_back(unrooted_from_edges(taxa, edge_list, 2 * n - 2));
    return;
  }
  const int fresh = n + next_leaf - 3 + 1;  // internals start at n; 3-leaf star has one
  const size_t n_edges = edge_list.size();
  for (size_t e = 0; e < n_edges; ++e) {
    const auto [a, b] = edge_list[e];
    edge_list[e] = {a, fresh};
    edge_list.emplace_back(fresh, b);
    edge_list.emplace_back(fresh, next_leaf);
    enumerate_unrooted_rec(edge_list, next_leaf + 1, n, taxa, out);
    edge_list.pop_back();
    edge_list.pop_back();
    edge_list[e] = {a, b};
  }
}

}  // namespace

std::vector<RootedTopology> enumerate_rooted_topologies(const TaxonSet& taxa) {
  const int n = taxa.size();
  if (n < 2) throw std::invalid_argument("need at least 2 taxa");
  if (n > kMaxEnumerationTaxa) throw std::invalid_argument("too many taxa to enumerate");
  RootedScaffold scaffold(n);
  std::vector<RootedTopology> out;
  if (n == 2) {
    scaffold.attach(1, 0, 2);
    out.push_back(scaffold.materialize(taxa));
    return out;
  }
  scaffold.attach(1, 0, n);
  enumerate_rooted_rec(scaffold, 2, taxa, out);
  return out;
}

std::vector<UnrootedTopology> enumerate_unrooted_topologies(const TaxonSet& taxa) {
  const int n = taxa.size();
  if (n < 3) throw std::invalid_argument("need at least 3 taxa");
  if (n > kMaxEnumerationTaxa) throw std::invalid_argument("too many taxa to enumerate");
  std::vector<std::pair<int, int>> edge_list{{0, n}, {1, n}, {2, n}};
  std::vector<UnrootedTopology> out;
  enumerate_unrooted_rec(edge_list, 3, n, taxa, out);
  return out;
}

RootedTopology random_rooted_topology(const TaxonSet& taxa, Rng& rng) {
  const int n = taxa.size();
  if (n < 2) throw std::invalid_argument("need at least 2 taxa");
  RootedScaffold scaffold(n);
  scaffold.attach(1, 0, n);
  for (int leaf = 2; leaf < n; ++leaf) {
    std::vector<int> spots;
    scaffold.collect_nodes(scaffold.root, spots);
    scaffold.attach(leaf, spots[rng.uniform_index(spots.size())], n + leaf - 1);
  }
  return scaffold.materialize(taxa);
}

UnrootedTopology random_unrooted_topology(const TaxonSet& taxa, Rng& rng) {
  const int n = taxa.size();
  if (n < 3) throw std::invalid_argument("need at least 3 taxa");
  std::vector<std::pair<int, int>> edge_list{{0, n}, {1, n}, {2, n}};
  for (int leaf = 3; leaf < n; ++leaf) {
    const int fresh = n + leaf - 2;
    const size_t e = rng.uniform_index(edge_list.size());
    const auto [a, b] = edge_list[e];
    edge_list[e] = {a, fresh};
    edge_list.emplace_back(fresh, b);
    edge_list.emplace_back(fresh, leaf);
  }
  return unrooted_from_edges(taxa, edge_list, 2 * n - 2);
}

std::vector<UnrootedTopology> nni_neighbors(const UnrootedTopology& tree) {
  std::vector<UnrootedTopology> out;
  std::vector<std::string> seen;
  for (int e = 0; e < tree.n_edges(); ++e) {
    const int u = tree.edges[e].a;
    const int v = tree.edges[e].b;
    if (u < tree.n_leaves() || v < tree.n_leaves()) continue;
    int u_side[2], v_side[2];
    int fu = 0, fv = 0;
    for (int k = 0; k < 3; ++k) {
      if (tree.neighbors[u][k] != v) u_side[fu++] = tree.neighbors[u][k];
      if (tree.neighbors[v][k] != u) v_side[fv++] = tree.neighbors[v][k];
    }
    for (int swap_with : {0, 1}) {
      std::vector<std::pair<int, int>> edge_list;
      for (int f = 0; f < tree.n_edges(); ++f) {
        int a = tree.edges[f].a;
        int b = tree.edges[f].b;
        const auto rewire = [&](int& x, int& y) {
          if (x == u && y == u_side[1]) {
            y = v_side[swap_with];
          } else if (x == v && y == v_side[swap_with]) {
            y = u_side[1];
          }
        };
        rewire(a, b);
        rewire(b, a);
        edge_list.emplace_back(a, b);
      }
      auto neighbor = unrooted_from_edges(tree.taxa, edge_list, tree.n_nodes());
      auto key = neighbor.topology_key();
      if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
        seen.push_back(std::move(key));
        out.push_back(std::move(neighbor));
      }
    }
  }
  return out;
}

TaxonSet default_taxa(int n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (n <= 26) {
      names.push_back(std::string(1, static_cast<char>('A' + i)));
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "t%03d", i);
      names.emplace_back(buf);
    }
  }
  return TaxonSet(names);
}

}  // namespace vbphylo
