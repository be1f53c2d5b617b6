#include "test_util.hpp"

#include <stdexcept>

namespace vbphylo::testing {

double brute_force_log_likelihood(const RootedTopology& tree,
                                  const std::vector<double>& lengths,
                                  const Alignment& alignment, const SubstModel& model) {
  const int n = tree.n_leaves();
  const auto internals = tree.postorder_internals();
  const int n_internal = static_cast<int>(internals.size());
  if (n_internal > 8) throw std::invalid_argument("too many internal nodes for brute force");
  const auto eta = model.stationary();

  // transition matrix per non-root node (for its parent edge)
  std::vector<Matrix4> p(tree.n_nodes());
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v != tree.root) model.transition(lengths[v], p[v]);
  }

  double total = 0.0;
  std::vector<int> state(tree.n_nodes(), 0);
  for (int site = 0; site < alignment.n_sites(); ++site) {
    double site_prob = 0.0;
    const long combos = 1L << (2 * n_internal);
    for (long assign = 0; assign < combos; ++assign) {
      long a = assign;
      for (int idx = 0; idx < n_internal; ++idx) {
        state[internals[idx]] = static_cast<int>(a & 3);
        a >>= 2;
      }
      double term = eta[state[tree.root]];
      for (int v = 0; v < tree.n_nodes(); ++v) {
        if (v == tree.root) continue;
        if (v < n) {
          // leaf: sum the transition over the (possibly ambiguous) states
          const auto ind = mask_indicators(state_mask(alignment.rows[v][site]));
          double leaf_term = 0.0;
          for (int s = 0; s < 4; ++s) {
            leaf_term += p[v][state[tree.nodes[v].parent]][s] * ind[s];
          }
          term *= leaf_term;
        } else {
          term *= p[v][state[tree.nodes[v].parent]][state[v]];
        }
      }
      site_prob += term;
    }
    total += std::log(site_prob);
  }
  return total;
}

std::vector<double> random_rooted_lengths(const RootedTopology& tree, Rng& rng, double lo,
                                          double hi) {
  std::vector<double> lengths(tree.n_nodes(), 0.0);
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v != tree.root) lengths[v] = rng.uniform(lo, hi);
  }
  return lengths;
}

SubsplitSupport full_rooted_support(const TaxonSet& taxa) {
  SubsplitSupport support(taxa);
  for (const auto& tree : enumerate_rooted_topologies(taxa)) {
    add_tree_to_support(support, tree);
  }
  support.finalize();
  return support;
}

SubsplitSupport full_unrooted_support(const TaxonSet& taxa) {
  SubsplitSupport support(taxa);
  for (const auto& tree : enumerate_unrooted_topologies(taxa)) {
    add_tree_to_support(support, tree);
  }
  support.finalize();
  return support;
}

std::vector<double> random_phi(const SubsplitSupport& support, Rng& rng, double scale) {
  std::vector<double> phi(support.param_count());
  for (auto& v : phi) v = rng.uniform(-scale, scale);
  return phi;
}

GaussHermite::GaussHermite(int n) {
  nodes.resize(n);
  weights.resize(n);
  std::vector<double> roots;  // positive roots found so far, descending
  const auto hermite_pair = [n](double x) {
    // normalized physicists' Hermite recurrence; returns (H_n, H_n')
    double p0 = std::pow(M_PI, -0.25);
    double p1 = std::sqrt(2.0) * x * p0;
    for (int k = 2; k <= n; ++k) {
      const double p2 = x * std::sqrt(2.0 / k) * p1 - std::sqrt((k - 1.0) / k) * p0;
      p0 = p1;
      p1 = p2;
    }
    return std::pair<double, double>(p1, std::sqrt(2.0 * n) * p0);
  };
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x;
    if (i == 0) {
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      x = roots[0] - 1.14 * std::pow(static_cast<double>(n), 0.426) / roots[0];
    } else if (i == 2) {
      x = 1.86 * roots[1] - 0.86 * roots[0];
    } else if (i == 3) {
      x = 1.91 * roots[2] - 0.91 * roots[1];
    } else {
      x = 2.0 * roots[i - 1] - roots[i - 2];
    }
    for (int it = 0; it < 200; ++it) {
      const auto [p, dp] = hermite_pair(x);
      const double step = p / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    roots.push_back(x);
    const auto [p, dp] = hermite_pair(x);
    (void)p;
    const double w = 2.0 / (dp * dp);
    // symmetric pair, rescaled to the standard normal measure
    nodes[i] = std::sqrt(2.0) * x;
    weights[i] = w / std::sqrt(M_PI);
    nodes[n - 1 - i] = -nodes[i];
    weights[n - 1 - i] = weights[i];
  }
}

GaussLegendre::GaussLegendre(int n) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    // map from (-1, 1) to (0, 1)
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

}  // namespace vbphylo::testing
