#include "vbphylo/substitution.hpp"

#include <cmath>
#include <stdexcept>

namespace vbphylo {

void Jc69Model::transition(double t, Matrix4& p) const {
  if (t < 0.0) throw std::invalid_argument("negative branch length");
  const double e = std::exp(-4.0 * t / 3.0);
  const double diag = 0.25 + 0.75 * e;
  const double off = 0.25 - 0.25 * e;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) p[i][j] = i == j ? diag : off;
  }
}

void Jc69Model::transition_derivative(double t, Matrix4& dp) const {
  if (t < 0.0) throw std::invalid_argument("negative branch length");
  const double e = std::exp(-4.0 * t / 3.0);
  const double ddiag = -e;
  const double doff = e / 3.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) dp[i][j] = i == j ? ddiag : doff;
  }
}

namespace {

void append_rooted_postorder(const RootedTopology& tree, const std::vector<double>& lengths,
                             PruningView& view, std::vector<int>& slot, int v) {
  const auto& node = tree.nodes[v];
  if (!node.is_leaf()) {
    append_rooted_postorder(tree, lengths, view, slot, node.left);
    append_rooted_postorder(tree, lengths, view, slot, node.right);
  }
  slot[v] = static_cast<int>(view.nodes.size());
  PruningView::VNode vn;
  if (node.is_leaf()) {
    vn.taxon = v;
  } else {
    for (int c : {node.left, node.right}) {
      vn.children.push_back(slot[c]);
      vn.child_lengths.push_back(lengths[c]);
      vn.child_edge_keys.push_back(c);
    }
  }
  view.nodes.push_back(std::move(vn));
}

void append_unrooted_postorder(const UnrootedTopology& tree, const std::vector<double>& lengths,
                               PruningView& view, std::vector<int>& slot, int v,
                               int parent_edge) {
  PruningView::VNode vn;
  if (v < tree.n_leaves()) {
    vn.taxon = v;
  } else {
    for (int k = 0; k < tree.degree[v]; ++k) {
      const int e = tree.edge_ids[v][k];
      if (e == parent_edge) continue;
      append_unrooted_postorder(tree, lengths, view, slot, tree.neighbors[v][k], e);
      vn.children.push_back(slot[tree.neighbors[v][k]]);
      vn.child_lengths.push_back(lengths[e]);
      vn.child_edge_keys.push_back(e);
    }
  }
  slot[v] = static_cast<int>(view.nodes.size());
  view.nodes.push_back(std::move(vn));
}

}  // namespace

PruningView pruning_view(const RootedTopology& tree, const std::vector<double>& lengths) {
  if (static_cast<int>(lengths.size()) != tree.n_nodes()) {
    throw std::invalid_argument("need one branch length slot per node (root slot unused)");
  }
  PruningView view;
  std::vector<int> slot(tree.n_nodes(), -1);
  append_rooted_postorder(tree, lengths, view, slot, tree.root);
  view.root = slot[tree.root];
  view.n_edge_keys = tree.n_nodes();
  return view;
}

PruningView pruning_view(const UnrootedTopology& tree, const std::vector<double>& lengths) {
  if (!((int)lengths.size() == tree.n_edges())) {
    throw std::invalid_argument("edge length vector does not match edge count");
  }
  PruningView view;
  std::vector<int> slot(tree.n_nodes(), -1);
  const int root = tree.neighbors[0][0];
  append_unrooted_postorder(tree, lengths, view, slot, root, -1);
  view.root = slot[root];
  view.n_edge_keys = tree.n_edges();
  return view;
}

namespace {

struct PartialTable {
  // partials[node * n_patterns * 4 ...], scaled so the max entry per
  // (node, pattern) is 1; scaler_log holds the accumulated log scale.
  std::vector<double> partials;
  std::vector<double> scaler_log;
  int n_patterns = 0;

  double* at(int node, int pattern) { return &partials[(node * n_patterns + pattern) * 4]; }
  const double* at(int node, int pattern) const {
    return &partials[(node * n_patterns + pattern) * 4];
  }
};

void compute_postorder_partials(const PruningView& view, const PatternTable& patterns,
                                const SubstModel& model, PartialTable& table) {
  const int n_patterns = patterns.n_patterns();
  table.n_patterns = n_patterns;
  table.partials.assign(static_cast<size_t>(view.nodes.size()) * n_patterns * 4, 0.0);
  table.scaler_log.assign(static_cast<size_t>(view.nodes.size()) * n_patterns, 0.0);

  Matrix4 p;
  for (size_t v = 0; v < view.nodes.size(); ++v) {
    const auto& node = view.nodes[v];
    if (node.taxon >= 0) {
      for (int s = 0; s < n_patterns; ++s) {
        const auto ind = mask_indicators(patterns.mask(s, node.taxon));
        double* out = table.at(static_cast<int>(v), s);
        for (int i = 0; i < 4; ++i) out[i] = ind[i];
      }
      continue;
    }
    for (int s = 0; s < n_patterns; ++s) {
      double* out = table.at(static_cast<int>(v), s);
      for (int i = 0; i < 4; ++i) out[i] = 1.0;
    }
    double* scalers = &table.scaler_log[v * n_patterns];
    for (size_t k = 0; k < node.children.size(); ++k) {
      const int c = node.children[k];
      model.transition(node.child_lengths[k], p);
      for (int s = 0; s < n_patterns; ++s) {
        const double* child = table.at(c, s);
        double* out = table.at(static_cast<int>(v), s);
        for (int i = 0; i < 4; ++i) {
          double acc = 0.0;
          for (int j = 0; j < 4; ++j) acc += p[i][j] * child[j];
          out[i] *= acc;
        }
        scalers[s] += table.scaler_log[c * n_patterns + s];
      }
    }
    // rescale so the max entry is 1
    for (int s = 0; s < n_patterns; ++s) {
      double* out = table.at(static_cast<int>(v), s);
      double m = 0.0;
      for (int i = 0; i < 4; ++i) m = std::max(m, out[i]);
      if (m > 0.0 && m != 1.0) {
        for (int i = 0; i < 4; ++i) out[i] /= m;
        scalers[s] += std::log(m);
      }
    }
  }
}

}  // namespace

double log_likelihood(const PruningView& view, const PatternTable& patterns,
                      const SubstModel& model) {
  PartialTable table;
  compute_postorder_partials(view, patterns, model, table);
  const auto eta = model.stationary();
  const int n_patterns = patterns.n_patterns();
  double total = 0.0;
  for (int s = 0; s < n_patterns; ++s) {
    const double* root = table.at(view.root, s);
    double site = 0.0;
    for (int i = 0; i < 4; ++i) site += eta[i] * root[i];
    total += patterns.weights[s] * (std::log(site) + table.scaler_log[view.root * n_patterns + s]);
  }
  return total;
}

LikelihoodGradient log_likelihood_gradient(const PruningView& view,
                                           const PatternTable& patterns,
                                           const SubstModel& model) {
  PartialTable lower;
  compute_postorder_partials(view, patterns, model, lower);
  const auto eta = model.stationary();
  const int n_patterns = patterns.n_patterns();

  LikelihoodGradient out;
  out.d_log_likelihood.assign(view.n_edge_keys, 0.0);

  // Preorder "outside" partials: upper[v] is the partial of everything
  // outside the subtree of v, seen at v's parent-facing end, with the
  // stationary distribution folded in at the root. Scale factors cancel in
  // the gradient ratio, so upper partials only need their own rescaling.
  std::vector<double> upper(static_cast<size_t>(view.nodes.size()) * n_patterns * 4, 0.0);
  const auto upper_at = [&](int node, int s) { return &upper[(node * n_patterns + s) * 4]; };

  for (int s = 0; s < n_patterns; ++s) {
    double* u = upper_at(view.root, s);
    for (int i = 0; i < 4; ++i) u[i] = eta[i];
    const double* root = lower.at(view.root, s);
    double site = 0.0;
    for (int i = 0; i < 4; ++i) site += eta[i] * root[i];
    out.log_likelihood +=
        patterns.weights[s] * (std::log(site) + lower.scaler_log[view.root * n_patterns + s]);
  }

  std::vector<Matrix4> p_k, dp_k;
  std::vector<double> down;  // per child: (P_k . lower[c_k]) for each (pattern, state)
  for (int v = static_cast<int>(view.nodes.size()) - 1; v >= 0; --v) {
    const auto& node = view.nodes[v];
    if (node.taxon >= 0) continue;
    const size_t d = node.children.size();
    p_k.assign(d, Matrix4{});
    dp_k.assign(d, Matrix4{});
    down.assign(d * n_patterns * 4, 0.0);
    for (size_t k = 0; k < d; ++k) {
      model.transition(node.child_lengths[k], p_k[k]);
      model.transition_derivative(node.child_lengths[k], dp_k[k]);
      for (int s = 0; s < n_patterns; ++s) {
        const double* child = lower.at(node.children[k], s);
        double* out_d = &down[(k * n_patterns + s) * 4];
        for (int i = 0; i < 4; ++i) {
          double acc = 0.0;
          for (int j = 0; j < 4; ++j) acc += p_k[k][i][j] * child[j];
          out_d[i] = acc;
        }
      }
    }
    for (size_t k = 0; k < d; ++k) {
      const int c = node.children[k];
      double grad = 0.0;
      for (int s = 0; s < n_patterns; ++s) {
        // W(a): upper partial at v times the sibling subtree contributions
        double w[4];
        const double* uv = upper_at(v, s);
        for (int i = 0; i < 4; ++i) w[i] = uv[i];
        for (size_t k2 = 0; k2 < d; ++k2) {
          if (k2 == k) continue;
          const double* sib = &down[(k2 * n_patterns + s) * 4];
          for (int i = 0; i < 4; ++i) w[i] *= sib[i];
        }
        const double* child = lower.at(c, s);
        const double* self = &down[(k * n_patterns + s) * 4];
        double num = 0.0;
        double den = 0.0;
        for (int i = 0; i < 4; ++i) {
          double acc_d = 0.0;
          for (int j = 0; j < 4; ++j) acc_d += dp_k[k][i][j] * child[j];
          num += w[i] * acc_d;
          den += w[i] * self[i];
        }
        if (den > 0.0) grad += patterns.weights[s] * num / den;
        // push the upper partial down to c: W(a) transported through P
        double* uc = upper_at(c, s);
        double m = 0.0;
        for (int j = 0; j < 4; ++j) {
          double acc = 0.0;
          for (int i = 0; i < 4; ++i) acc += w[i] * p_k[k][i][j];
          uc[j] = acc;
          m = std::max(m, acc);
        }
        if (m > 0.0) {
          for (int j = 0; j < 4; ++j) uc[j] /= m;
        }
      }
      out.d_log_likelihood[node.child_edge_keys[k]] = grad;
    }
  }
  return out;
}

double log_likelihood(const RootedTopology& tree, const std::vector<double>& lengths,
                      const PatternTable& patterns, const SubstModel& model) {
  return log_likelihood(pruning_view(tree, lengths), patterns, model);
}

double log_likelihood(const UnrootedTopology& tree, const std::vector<double>& lengths,
                      const PatternTable& patterns, const SubstModel& model) {
  if (!model.reversible()) {
    throw std::invalid_argument("unrooted likelihood needs a reversible model");
  }
  return log_likelihood(pruning_view(tree, lengths), patterns, model);
}

LikelihoodGradient log_likelihood_gradient(const UnrootedTopology& tree,
                                           const std::vector<double>& lengths,
                                           const PatternTable& patterns,
                                           const SubstModel& model) {
  if (!model.reversible()) {
    throw std::invalid_argument("unrooted likelihood needs a reversible model");
  }
  return log_likelihood_gradient(pruning_view(tree, lengths), patterns, model);
}

namespace {

Alignment simulate_from_view(const PruningView& view, const TaxonSet& taxa,
                             const SubstModel& model, int n_sites, Rng& rng) {
  static constexpr char kBases[4] = {'A', 'C', 'G', 'T'};
  const auto eta = model.stationary();
  Alignment alignment;
  alignment.taxa = taxa;
  alignment.rows.assign(taxa.size(), std::string(n_sites, 'A'));

  std::vector<int> state(view.nodes.size(), 0);
  Matrix4 p;
  for (int site = 0; site < n_sites; ++site) {
    // walk from the root (last node in postorder) downward
    for (int v = static_cast<int>(view.nodes.size()) - 1; v >= 0; --v) {
      const auto& node = view.nodes[v];
      if (v == view.root) {
        state[v] = static_cast<int>(rng.discrete(std::span<const double>(eta.data(), 4)));
      }
      if (node.taxon >= 0) {
        alignment.rows[node.taxon][site] = kBases[state[v]];
        continue;
      }
      for (size_t k = 0; k < node.children.size(); ++k) {
        model.transition(node.child_lengths[k], p);
        state[node.children[k]] =
            static_cast<int>(rng.discrete(std::span<const double>(p[state[v]].data(), 4)));
      }
    }
  }
  return alignment;
}

}  // namespace

Alignment simulate_alignment(const RootedTopology& tree, const std::vector<double>& lengths,
                             const SubstModel& model, int n_sites, Rng& rng) {
  return simulate_from_view(pruning_view(tree, lengths), tree.taxa, model, n_sites, rng);
}

Alignment simulate_alignment(const UnrootedTopology& tree, const std::vector<double>& lengths,
                             const SubstModel& model, int n_sites, Rng& rng) {
  return simulate_from_view(pruning_view(tree, lengths), tree.taxa, model, n_sites, rng);
}

}  // namespace vbphylo
