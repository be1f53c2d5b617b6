#include "vbphylo/sbn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vbphylo/numeric.hpp"

namespace vbphylo {

void SubsplitSupport::add_root_subsplit(const Subsplit& s) {
  if (finalized_) throw std::logic_error("support already finalized");
  if (root_index_.emplace(s, -1).second) root_subsplits_.push_back(s);
}

void SubsplitSupport::add_pcsp(const Pcsp& pcsp) {
  if (finalized_) throw std::logic_error("support already finalized");
  const int side = pcsp.side();  // throws when incompatible
  const ParentSideKey key{pcsp.parent, side};
  auto [it, inserted] = child_set_index_.emplace(key, static_cast<int>(child_sets_.size()));
  if (inserted) {
    child_sets_.push_back({pcsp.parent, side, {}, -1});
  }
  ChildSet& set = child_sets_[it->second];
  if (pcsp_index_.emplace(pcsp, std::make_pair(it->second, -1)).second) {
    set.children.push_back(pcsp.child);
  }
}

void SubsplitSupport::add_clade(const Clade& c) {
  if (finalized_) throw std::logic_error("support already finalized");
  if (clade_index_.emplace(c, -1).second) clades_.push_back(c);
}

void SubsplitSupport::finalize() {
  if (finalized_) return;
  std::sort(root_subsplits_.begin(), root_subsplits_.end());
  root_index_.clear();
  for (size_t i = 0; i < root_subsplits_.size(); ++i) {
    root_index_[root_subsplits_[i]] = static_cast<int>(i);
  }
  std::sort(child_sets_.begin(), child_sets_.end(), [](const ChildSet& a, const ChildSet& b) {
    if (a.parent != b.parent) return a.parent < b.parent;
    return a.side < b.side;
  });
  std::sort(clades_.begin(), clades_.end());
  clade_index_.clear();
  for (size_t i = 0; i < clades_.size(); ++i) clade_index_[clades_[i]] = static_cast<int>(i);

  child_set_index_.clear();
  pcsp_index_.clear();
  param_count_ = 0;
  root_param_offset_ = -1;
  if (root_subsplits_.size() > 1) {
    root_param_offset_ = 0;
    param_count_ += static_cast<int>(root_subsplits_.size());
  }
  child_set_flat_offset_.assign(child_sets_.size(), 0);
  int flat = 0;
  for (size_t si = 0; si < child_sets_.size(); ++si) {
    ChildSet& set = child_sets_[si];
    std::sort(set.children.begin(), set.children.end());
    child_set_index_[{set.parent, set.side}] = static_cast<int>(si);
    child_set_flat_offset_[si] = flat;
    flat += static_cast<int>(set.children.size());
    if (set.children.size() > 1) {
      set.param_offset = param_count_;
      param_count_ += static_cast<int>(set.children.size());
    } else {
      set.param_offset = -1;
    }
    for (size_t ci = 0; ci < set.children.size(); ++ci) {
      if (!set.children[ci].clade().subset_of(set.parent.side(set.side))) {
        throw std::invalid_argument("child subsplit incompatible with parent side");
      }
      pcsp_index_[{set.parent, set.children[ci]}] = {static_cast<int>(si),
                                                     static_cast<int>(ci)};
    }
  }
  finalized_ = true;
}

int SubsplitSupport::n_pcsps() const {
  int total = 0;
  for (const auto& set : child_sets_) total += static_cast<int>(set.children.size());
  return total;
}

int SubsplitSupport::root_index(const Subsplit& s) const {
  auto it = root_index_.find(s);
  return it == root_index_.end() ? -1 : it->second;
}

int SubsplitSupport::clade_index(const Clade& c) const {
  auto it = clade_index_.find(c);
  return it == clade_index_.end() ? -1 : it->second;
}

int SubsplitSupport::child_set_index(const Subsplit& parent, int side) const {
  auto it = child_set_index_.find({parent, side});
  return it == child_set_index_.end() ? -1 : it->second;
}

std::pair<int, int> SubsplitSupport::pcsp_location(const Pcsp& pcsp) const {
  auto it = pcsp_index_.find(pcsp);
  return it == pcsp_index_.end() ? std::make_pair(-1, -1) : it->second;
}

int SubsplitSupport::pcsp_param_index(const Pcsp& pcsp) const {
  const auto [set, pos] = pcsp_location(pcsp);
  if (set < 0) return -1;
  const int offset = child_sets_[set].param_offset;
  return offset < 0 ? -1 : offset + pos;
}

int SubsplitSupport::pcsp_flat_index(const Pcsp& pcsp) const {
  const auto [set, pos] = pcsp_location(pcsp);
  return set < 0 ? -1 : child_set_flat_offset_[set] + pos;
}

// --- SbnModel ---

SbnModel::SbnModel(const SubsplitSupport* support) : support_(support) {
  if (!support_->finalized()) throw std::logic_error("support must be finalized");
  phi_.assign(support_->param_count(), 0.0);
  refresh_cpds();
}

void SbnModel::set_params(std::vector<double> phi) {
  if (static_cast<int>(phi.size()) != support_->param_count()) {
    throw std::invalid_argument("parameter vector size mismatch");
  }
  phi_ = std::move(phi);
  refresh_cpds();
}

void SbnModel::update_params(const std::vector<double>& step) {
  if (step.size() != phi_.size()) throw std::invalid_argument("step size mismatch");
  for (size_t i = 0; i < phi_.size(); ++i) phi_[i] += step[i];
  refresh_cpds();
}

void SbnModel::refresh_cpds() {
  cpd_.assign(phi_.size(), 0.0);
  log_cpd_.assign(phi_.size(), 0.0);
  const auto refresh_set = [this](int offset, int size) {
    if (offset < 0 || size <= 1) return;
    const std::span<const double> x(phi_.data() + offset, static_cast<size_t>(size));
    double m = kNegInf;
    for (double v : x) m = std::max(m, v);
    double acc = 0.0;
    for (int i = 0; i < size; ++i) {
      cpd_[offset + i] = std::exp(x[i] - m);
      acc += cpd_[offset + i];
    }
    const double log_norm = m + std::log(acc);
    for (int i = 0; i < size; ++i) {
      cpd_[offset + i] /= acc;
      log_cpd_[offset + i] = x[i] - log_norm;
    }
  };
  refresh_set(support_->root_param_offset(), support_->n_root_subsplits());
  for (const auto& set : support_->child_sets()) {
    refresh_set(set.param_offset, static_cast<int>(set.children.size()));
  }
}

std::vector<double> SbnModel::cpd_root() const {
  const int n = support_->n_root_subsplits();
  if (n == 1) return {1.0};
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = cpd_[support_->root_param_offset() + i];
  return out;
}

std::vector<double> SbnModel::cpd_children(const Subsplit& parent, int side) const {
  const int set_id = support_->child_set_index(parent, side);
  if (set_id < 0) throw std::invalid_argument("(parent, side) not in support");
  const auto& set = support_->child_sets()[set_id];
  if (set.children.size() == 1) return {1.0};
  std::vector<double> out(set.children.size());
  for (size_t i = 0; i < set.children.size(); ++i) out[i] = cpd_[set.param_offset + i];
  return out;
}

double SbnModel::pcsp_prob(const Subsplit& parent, int side, const Subsplit& child) const {
  if (parent.side(side).count() == 1) return 1.0;  // fake child, probability one
  const auto [set_id, pos] = support_->pcsp_location({parent, child});
  if (set_id < 0) return 0.0;
  const auto& set = support_->child_sets()[set_id];
  return set.children.size() == 1 ? 1.0 : cpd_[set.param_offset + pos];
}

double SbnModel::log_rooted_prob(const RootedTopology& tree) const {
  const auto internals = tree.postorder_internals();
  double total = 0.0;
  for (int v : internals) {
    if (v == tree.root) {
      const int pos = support_->root_index(tree.node_subsplit(v));
      if (pos < 0) return kNegInf;
      if (support_->n_root_subsplits() > 1) {
        total += log_cpd_[support_->root_param_offset() + pos];
      }
    } else {
      const Pcsp pcsp{tree.node_subsplit(tree.nodes[v].parent), tree.node_subsplit(v)};
      const auto [set_id, pos] = support_->pcsp_location(pcsp);
      if (set_id < 0) return kNegInf;
      const auto& set = support_->child_sets()[set_id];
      if (set.children.size() > 1) total += log_cpd_[set.param_offset + pos];
    }
  }
  return total;
}

double SbnModel::rooted_prob(const RootedTopology& tree) const {
  const double lp = log_rooted_prob(tree);
  return std::isfinite(lp) ? std::exp(lp) : 0.0;
}

UnrootedProbResult SbnModel::unrooted_prob(const UnrootedTopology& tree) const {
  return unrooted_prob(tree, EdgeCladeTable(tree));
}

namespace {

// Per-internal-node subsplits looking away from each neighbor slot, plus the
// parent side each neighbor's clade occupies in that subsplit.
struct AwaySubsplits {
  // away[node][k]: subsplit at node looking away from neighbor slot k
  std::vector<std::array<Subsplit, 3>> away;

  AwaySubsplits(const UnrootedTopology& tree, const EdgeCladeTable& table)
      : away(tree.n_nodes()) {
    for (int v = tree.n_leaves(); v < tree.n_nodes(); ++v) {
      for (int k = 0; k < 3; ++k) {
        away[v][k] = table.subsplit_at(v, tree.neighbors[v][k]);
      }
    }
  }

  const Subsplit& at(const UnrootedTopology& tree, int node, int away_neighbor) const {
    for (int k = 0; k < 3; ++k) {
      if (tree.neighbors[node][k] == away_neighbor) return away[node][k];
    }
    throw std::logic_error("neighbor not found");
  }
};

// Virtual-root orientation of an unrooted tree: parent edges and preorder.
struct Orientation {
  std::vector<int> parent_edge;  // -1 at the virtual root
  std::vector<int> parent_node;
  std::vector<int> preorder;

  Orientation(const UnrootedTopology& tree, int vroot)
      : parent_edge(tree.n_nodes(), -1), parent_node(tree.n_nodes(), -1) {
    preorder.reserve(tree.n_nodes());
    std::vector<int> stack{vroot};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      preorder.push_back(v);
      for (int k = 0; k < tree.degree[v]; ++k) {
        const int u = tree.neighbors[v][k];
        const int e = tree.edge_ids[v][k];
        if (e == parent_edge[v]) continue;
        parent_edge[u] = e;
        parent_node[u] = v;
        stack.push_back(u);
      }
    }
  }
};

}  // namespace

UnrootedProbResult SbnModel::unrooted_prob(const UnrootedTopology& tree,
                                           const EdgeCladeTable& table) const {
  const AwaySubsplits sub(tree, table);
  const int n_leaves = tree.n_leaves();
  const Orientation orient(tree, table.traversal_root());

  // msg[2e + s] is the message flowing across edge e out of endpoint a (s=0)
  // or endpoint b (s=1); initialized to one.
  std::vector<double> msg(2 * tree.n_edges(), 1.0);
  const auto msg_from = [&](int edge, int from) -> double& {
    return msg[2 * edge + (tree.edges[edge].a == from ? 0 : 1)];
  };

  // The CPD of the pair at node i for the subtree toward neighbor j, with the
  // parent subsplit at i looking away from k.
  const auto step_prob = [&](int i, int j, int k) -> double {
    if (j < n_leaves) return 1.0;
    const Subsplit& parent = sub.at(tree, i, k);
    const Clade& toward_j = table.away_from(tree.edge_between(i, j), i);
    return pcsp_prob(parent, parent.side_of(toward_j), sub.at(tree, j, i));
  };

  // Rootward pass (postorder = reverse preorder).
  for (auto it = orient.preorder.rbegin(); it != orient.preorder.rend(); ++it) {
    const int i = *it;
    if (i == table.traversal_root() || i < n_leaves) continue;
    const int pi = orient.parent_node[i];
    double acc = 1.0;
    for (int k = 0; k < 3; ++k) {
      const int j = tree.neighbors[i][k];
      if (j == pi) continue;
      acc *= step_prob(i, j, pi) * msg_from(tree.edge_ids[i][k], j);
    }
    msg_from(orient.parent_edge[i], i) = acc;
  }
  // Leafward pass (preorder).
  for (int i : orient.preorder) {
    if (i < n_leaves) continue;
    for (int kk = 0; kk < 3; ++kk) {
      const int k = tree.neighbors[i][kk];
      const int ek = tree.edge_ids[i][kk];
      if (ek == orient.parent_edge[i]) continue;
      double acc = 1.0;
      for (int jj = 0; jj < 3; ++jj) {
        const int j = tree.neighbors[i][jj];
        if (j == k) continue;
        acc *= step_prob(i, j, k) * msg_from(tree.edge_ids[i][jj], j);
      }
      msg_from(ek, i) = acc;
    }
  }

  // Per-edge rooted probabilities.
  UnrootedProbResult result;
  result.edge_probs.assign(tree.n_edges(), 0.0);
  const auto root_cpd_value = [&](const Subsplit& s) -> double {
    const int pos = support_->root_index(s);
    if (pos < 0) return 0.0;
    return support_->n_root_subsplits() == 1 ? 1.0
                                             : cpd_[support_->root_param_offset() + pos];
  };
  for (int e = 0; e < tree.n_edges(); ++e) {
    const int u = tree.edges[e].a;
    const int v = tree.edges[e].b;
    const Subsplit root_subsplit = table.edge_split(e);
    double p = root_cpd_value(root_subsplit);
    if (p == 0.0) continue;
    for (const int x : {u, v}) {
      if (x < n_leaves) continue;
      const Clade& toward_x = table.side(e, x);
      p *= pcsp_prob(root_subsplit, root_subsplit.side_of(toward_x),
                     sub.at(tree, x, tree.other_end(e, x)));
    }
    p *= msg[2 * e] * msg[2 * e + 1];
    result.edge_probs[e] = p;
    result.prob += p;
  }
  return result;
}

double SbnModel::unrooted_prob_naive(const UnrootedTopology& tree) const {
  double total = 0.0;
  for (int e = 0; e < tree.n_edges(); ++e) total += rooted_prob(root_at_edge(tree, e));
  return total;
}

double SbnModel::log_unrooted_prob(const UnrootedTopology& tree) const {
  const double p = unrooted_prob(tree).prob;
  return p > 0.0 ? std::log(p) : kNegInf;
}

RootedTopology SbnModel::sample_rooted(Rng& rng) const {
  struct Pending {
    Subsplit subsplit;
    int node_id;
  };
  const int n = support_->taxa().size();
  std::vector<std::pair<int, int>> kids(n - 1, {-1, -1});
  int next_internal = n;

  const auto draw_root = [&]() -> Subsplit {
    if (support_->n_root_subsplits() == 1) return support_->root_subsplits()[0];
    const std::span<const double> w(cpd_.data() + support_->root_param_offset(),
                                    static_cast<size_t>(support_->n_root_subsplits()));
    return support_->root_subsplits()[rng.discrete(w)];
  };

  std::vector<Pending> stack{{draw_root(), next_internal++}};
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    int child_ids[2];
    for (int side = 0; side < 2; ++side) {
      const Clade& clade = cur.subsplit.side(side);
      if (clade.count() == 1) {
        child_ids[side] = clade.first_set();
        continue;
      }
      const int set_id = support_->child_set_index(cur.subsplit, side);
      if (set_id < 0) throw std::runtime_error("support is not closed under sampling");
      const auto& set = support_->child_sets()[set_id];
      int pick = 0;
      if (set.children.size() > 1) {
        const std::span<const double> w(cpd_.data() + set.param_offset, set.children.size());
        pick = static_cast<int>(rng.discrete(w));
      }
      child_ids[side] = next_internal;
      stack.push_back({set.children[pick], next_internal++});
    }
    kids[cur.node_id - n] = {child_ids[0], child_ids[1]};
  }
  return make_rooted_topology(support_->taxa(), kids);
}

UnrootedTopology SbnModel::sample_unrooted(Rng& rng) const {
  return unroot(sample_rooted(rng));
}

void SbnModel::add_set_gradient(int set_index, int pos, double coeff,
                                std::vector<double>& dense) const {
  const auto& set = support_->child_sets()[set_index];
  if (set.param_offset < 0) return;
  dense[set.param_offset + pos] += coeff;
  for (size_t i = 0; i < set.children.size(); ++i) {
    dense[set.param_offset + i] -= coeff * cpd_[set.param_offset + i];
  }
}

void SbnModel::add_root_gradient(int pos, double coeff, std::vector<double>& dense) const {
  const int offset = support_->root_param_offset();
  if (offset < 0) return;
  dense[offset + pos] += coeff;
  for (int i = 0; i < support_->n_root_subsplits(); ++i) {
    dense[offset + i] -= coeff * cpd_[offset + i];
  }
}

SbnGradient sparsify(const std::vector<double>& dense) {
  SbnGradient out;
  for (size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) out.emplace_back(static_cast<int>(i), dense[i]);
  }
  return out;
}

SbnGradient SbnModel::grad_log_rooted(const RootedTopology& tree) const {
  std::vector<double> dense(support_->param_count(), 0.0);
  for (int v : tree.postorder_internals()) {
    if (v == tree.root) {
      const int pos = support_->root_index(tree.node_subsplit(v));
      if (pos < 0) throw std::invalid_argument("rooted tree out of support");
      add_root_gradient(pos, 1.0, dense);
    } else {
      const Pcsp pcsp{tree.node_subsplit(tree.nodes[v].parent), tree.node_subsplit(v)};
      const auto [set_id, pos] = support_->pcsp_location(pcsp);
      if (set_id < 0) throw std::invalid_argument("rooted tree out of support");
      add_set_gradient(set_id, pos, 1.0, dense);
    }
  }
  return sparsify(dense);
}

SbnGradient SbnModel::grad_log_unrooted(const UnrootedTopology& tree) const {
  const EdgeCladeTable table(tree);
  const auto res = unrooted_prob(tree, table);
  if (!(res.prob > 0.0)) throw std::invalid_argument("unrooted tree out of support");
  const AwaySubsplits sub(tree, table);
  const int n_leaves = tree.n_leaves();

  std::vector<double> w(tree.n_edges());
  for (int e = 0; e < tree.n_edges(); ++e) w[e] = res.edge_probs[e] / res.prob;

  const Orientation orient(tree, table.traversal_root());
  // Cumulative rooting probability in the subtree below-and-including each
  // node's parent edge; postorder = reverse preorder.
  std::vector<double> wbar(tree.n_nodes(), 0.0);
  for (auto it = orient.preorder.rbegin(); it != orient.preorder.rend(); ++it) {
    const int v = *it;
    if (orient.parent_edge[v] < 0) continue;
    wbar[v] += w[orient.parent_edge[v]];
    wbar[orient.parent_node[v]] += wbar[v];
  }

  std::vector<double> dense(support_->param_count(), 0.0);

  // Root subsplit terms: sum_e w_e over chosen splits minus the CPD once.
  if (support_->root_param_offset() >= 0) {
    const int offset = support_->root_param_offset();
    for (int e = 0; e < tree.n_edges(); ++e) {
      if (w[e] <= 0.0) continue;
      dense[offset + support_->root_index(table.edge_split(e))] += w[e];
    }
    for (int i = 0; i < support_->n_root_subsplits(); ++i) {
      dense[offset + i] -= cpd_[offset + i];
    }
  }

  // Primary subsplit pairs at each edge, coefficient w_e.
  for (int e = 0; e < tree.n_edges(); ++e) {
    if (w[e] <= 0.0) continue;
    const Subsplit root_subsplit = table.edge_split(e);
    for (const int x : {tree.edges[e].a, tree.edges[e].b}) {
      if (x < n_leaves) continue;
      const Subsplit& child = sub.at(tree, x, tree.other_end(e, x));
      const auto [set_id, pos] = support_->pcsp_location({root_subsplit, child});
      if (set_id < 0) throw std::logic_error("missing PSP for an in-support rooting");
      add_set_gradient(set_id, pos, w[e], dense);
    }
  }

  // Regular parent-child pairs: the parent subsplit at node i away from far
  // neighbor fw appears in exactly the rootings on the fw side of i.
  for (int i = n_leaves; i < tree.n_nodes(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const int fw = tree.neighbors[i][k];
      const int e_fw = tree.edge_ids[i][k];
      double ws;
      if (e_fw == orient.parent_edge[i]) {
        ws = 1.0 - wbar[i] + w[e_fw];  // virtual root on the far side
      } else {
        ws = wbar[fw];
      }
      if (ws <= 0.0) continue;
      const Subsplit& parent = sub.at(tree, i, fw);
      for (int jj = 0; jj < 3; ++jj) {
        const int v = tree.neighbors[i][jj];
        if (v == fw || v < n_leaves) continue;
        const Subsplit& child = sub.at(tree, v, i);
        const auto [set_id, pos] = support_->pcsp_location({parent, child});
        if (set_id < 0) throw std::logic_error("missing PCSP for an in-support rooting");
        add_set_gradient(set_id, pos, ws, dense);
      }
    }
  }
  return sparsify(dense);
}

SbnGradient SbnModel::grad_log_unrooted_naive(const UnrootedTopology& tree) const {
  std::vector<double> probs(tree.n_edges());
  std::vector<RootedTopology> rootings;
  rootings.reserve(tree.n_edges());
  double total = 0.0;
  for (int e = 0; e < tree.n_edges(); ++e) {
    rootings.push_back(root_at_edge(tree, e));
    probs[e] = rooted_prob(rootings.back());
    total += probs[e];
  }
  if (!(total > 0.0)) throw std::invalid_argument("unrooted tree out of support");
  std::vector<double> dense(support_->param_count(), 0.0);
  for (int e = 0; e < tree.n_edges(); ++e) {
    if (probs[e] <= 0.0) continue;
    const double we = probs[e] / total;
    for (const auto& [idx, val] : grad_log_rooted(rootings[e])) {
      dense[idx] += we * val;
    }
  }
  return sparsify(dense);
}

}  // namespace vbphylo
