#include "vbphylo/timetree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vbphylo/numeric.hpp"

namespace vbphylo {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

SamplingTimes SamplingTimes::read_csv(const std::string& path, const TaxonSet& taxa) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sampling times CSV: " + path);
  SamplingTimes out{std::vector<double>(taxa.size(), 0.0)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("bad sampling-time row: " + line);
    const std::string taxon = line.substr(0, comma);
    out.times[taxa.index_of(taxon)] = std::stod(line.substr(comma + 1));
  }
  out.validate();
  return out;
}

void SamplingTimes::validate() const {
  double min = std::numeric_limits<double>::infinity();
  for (double t : times) {
    if (t < 0.0) throw std::invalid_argument("sampling times must be nonnegative");
    min = std::min(min, t);
  }
  if (!times.empty() && min != 0.0) {
    throw std::invalid_argument("the most recent sampling time must be 0");
  }
}

std::vector<double> height_lower_bounds(const RootedTopology& tree,
                                        const SamplingTimes& times) {
  std::vector<double> bounds(tree.n_nodes(), 0.0);
  for (int i = 0; i < tree.n_leaves(); ++i) bounds[i] = times.times[i];
  for (int v : tree.postorder_internals()) {
    bounds[v] = std::max(bounds[tree.nodes[v].left], bounds[tree.nodes[v].right]);
  }
  return bounds;
}

HeightTransformResult heights_from_alpha(const RootedTopology& tree,
                                         const std::vector<double>& bounds,
                                         const std::vector<double>& alpha_by_node) {
  HeightTransformResult out;
  out.heights.assign(bounds.begin(), bounds.end());  // leaves keep their tip times
  out.theta.assign(tree.n_nodes(), 0.0);

  const auto internals = tree.postorder_internals();
  for (auto it = internals.rbegin(); it != internals.rend(); ++it) {  // preorder
    const int v = *it;
    if (v == tree.root) {
      out.root_gap = std::exp(alpha_by_node[v]);
      out.heights[v] = bounds[v] + out.root_gap;
      out.log_jacobian += alpha_by_node[v];  // log T
    } else {
      const double parent_height = out.heights[tree.nodes[v].parent];
      const double theta = logistic(alpha_by_node[v]);
      out.theta[v] = theta;
      out.heights[v] = parent_height - theta * (parent_height - bounds[v]);
      out.log_jacobian +=
          std::log(parent_height - bounds[v]) + std::log(theta * (1.0 - theta));
    }
  }
  return out;
}

std::vector<double> alpha_from_heights(const RootedTopology& tree,
                                       const std::vector<double>& bounds,
                                       const std::vector<double>& heights) {
  std::vector<double> alpha(tree.n_nodes(), 0.0);
  for (int v : tree.postorder_internals()) {
    if (v == tree.root) {
      const double gap = heights[v] - bounds[v];
      if (!(gap > 0.0)) throw std::invalid_argument("root height at or below its bound");
      alpha[v] = std::log(gap);
    } else {
      const double parent_height = heights[tree.nodes[v].parent];
      const double denom = parent_height - bounds[v];
      if (!(denom > 0.0)) throw std::invalid_argument("parent height at or below child bound");
      const double theta = (parent_height - heights[v]) / denom;
      if (!(theta > 0.0 && theta < 1.0)) {
        throw std::invalid_argument("height outside its feasible interval");
      }
      alpha[v] = logit(theta);
    }
  }
  return alpha;
}

std::vector<double> backprop_heights_to_alpha(const RootedTopology& tree,
                                              const std::vector<double>& bounds,
                                              const HeightTransformResult& transform,
                                              std::vector<double> d_heights,
                                              bool with_log_jacobian) {
  std::vector<double> d_alpha(tree.n_nodes(), 0.0);
  const auto internals = tree.postorder_internals();
  if (with_log_jacobian) {
    // log J depends on the parent heights through log(t_pi - lb_i)
    for (int v : internals) {
      if (v == tree.root) continue;
      const int p = tree.nodes[v].parent;
      d_heights[p] += 1.0 / (transform.heights[p] - bounds[v]);
    }
  }
  // Reverse of the preorder construction: children push adjoints up to their
  // parents before the parent's own alpha derivative is read off.
  for (int v : internals) {  // postorder: children before parents
    if (v == tree.root) {
      d_alpha[v] = d_heights[v] * transform.root_gap + (with_log_jacobian ? 1.0 : 0.0);
      continue;
    }
    const int p = tree.nodes[v].parent;
    const double theta = transform.theta[v];
    const double span = transform.heights[p] - bounds[v];
    d_heights[p] += d_heights[v] * (1.0 - theta);
    d_alpha[v] = d_heights[v] * (-span) * theta * (1.0 - theta);
    if (with_log_jacobian) d_alpha[v] += 1.0 - 2.0 * theta;
  }
  return d_alpha;
}

// --- Coalescent ---

namespace {

struct Event {
  double time;
  int node;
  bool coalescent;
};

std::vector<Event> sorted_events(const RootedTopology& tree,
                                 const std::vector<double>& heights) {
  std::vector<Event> events;
  events.reserve(tree.n_nodes());
  for (int v = 0; v < tree.n_nodes(); ++v) {
    events.push_back({heights[v], v, !tree.nodes[v].is_leaf()});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.node < b.node;
  });
  return events;
}

void check_monotone(const RootedTopology& tree, const std::vector<double>& heights) {
  for (int v : tree.postorder_internals()) {
    if (!(heights[v] > heights[tree.nodes[v].left]) ||
        !(heights[v] > heights[tree.nodes[v].right])) {
      throw std::invalid_argument("node heights are not parent-monotone");
    }
  }
}

inline double choose2(int n) { return 0.5 * n * (n - 1); }

}  // namespace

double coalescent_log_density(const RootedTopology& tree, const std::vector<double>& heights,
                              std::span<const double> gamma, CoalescentKind kind) {
  check_monotone(tree, heights);
  const int n = tree.n_leaves();
  const int expected = kind == CoalescentKind::kConstant ? 1 : n - 1;
  if (static_cast<int>(gamma.size()) != expected) {
    throw std::invalid_argument("gamma length does not match the coalescent prior");
  }
  const auto events = sorted_events(tree, heights);

  // Ascending segment j (1-based, most recent first) takes gamma[n - 1 - j]
  // for the skyride; the constant model always uses gamma[0].
  const auto segment_gamma = [&](int coal_seen) {
    return kind == CoalescentKind::kConstant ? gamma[0] : gamma[n - 2 - coal_seen];
  };

  double log_density = 0.0;
  double prev_time = 0.0;
  int lineages = 0;
  int coal_seen = 0;
  for (const auto& event : events) {
    const double g = segment_gamma(coal_seen);
    log_density -= choose2(lineages) * (event.time - prev_time) * std::exp(-g);
    if (event.coalescent) {
      log_density += std::log(choose2(lineages)) - g;
      --lineages;
      ++coal_seen;
    } else {
      ++lineages;
    }
    prev_time = event.time;
  }
  return log_density;
}

CoalescentGradient coalescent_log_density_gradient(const RootedTopology& tree,
                                                   const std::vector<double>& heights,
                                                   std::span<const double> gamma,
                                                   CoalescentKind kind) {
  check_monotone(tree, heights);
  const int n = tree.n_leaves();
  const auto events = sorted_events(tree, heights);
  const auto segment_gamma = [&](int coal_seen) {
    return kind == CoalescentKind::kConstant ? gamma[0] : gamma[n - 2 - coal_seen];
  };
  const auto segment_index = [&](int coal_seen) {
    return kind == CoalescentKind::kConstant ? 0 : n - 2 - coal_seen;
  };

  CoalescentGradient out;
  out.d_heights.assign(tree.n_nodes(), 0.0);
  out.d_gamma.assign(gamma.size(), 0.0);

  double prev_time = 0.0;
  int lineages = 0;
  int coal_seen = 0;
  for (const auto& event : events) {
    const double g = segment_gamma(coal_seen);
    const int seg = segment_index(coal_seen);
    const double rate = choose2(lineages) * std::exp(-g);
    // -A (b - a) e^{-g}: d/db and d/dgamma of the interval term
    out.d_gamma[seg] += choose2(lineages) * (event.time - prev_time) * std::exp(-g);
    if (event.coalescent) {
      out.d_heights[event.node] -= rate;
      out.d_gamma[seg] -= 1.0;  // event factor -gamma
      --lineages;
      ++coal_seen;
      // this event opens the next interval: d/da of -A (b - a) e^{-g'}
      if (lineages >= 2) {
        out.d_heights[event.node] += choose2(lineages) * std::exp(-segment_gamma(coal_seen));
      }
    } else {
      ++lineages;
    }
    prev_time = event.time;
  }
  return out;
}

double skyride_log_prior(std::span<const double> gamma, double a, double b,
                         std::span<const double> delta) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("gamma hyperparameters must be positive");
  if (delta.size() + 1 != gamma.size()) throw std::invalid_argument("delta length must be |gamma|-1");
  double quad = 0.0;
  for (size_t i = 0; i + 1 < gamma.size(); ++i) {
    if (!(delta[i] > 0.0)) throw std::invalid_argument("smoothing coefficients must be positive");
    const double diff = gamma[i + 1] - gamma[i];
    quad += diff * diff / delta[i];
  }
  const double half_field = 0.5 * static_cast<double>(gamma.size() - 1);  // (N-2)/2
  return a * std::log(b) - std::lgamma(a) + std::lgamma(a + half_field) -
         (a + half_field) * std::log(b + 0.5 * quad);
}

void add_skyride_log_prior_gradient(std::span<const double> gamma, double a, double b,
                                    std::span<const double> delta, double coeff,
                                    std::span<double> out) {
  double quad = 0.0;
  for (size_t i = 0; i + 1 < gamma.size(); ++i) {
    const double diff = gamma[i + 1] - gamma[i];
    quad += diff * diff / delta[i];
  }
  const double half_field = 0.5 * static_cast<double>(gamma.size() - 1);
  const double scale = -(a + half_field) / (b + 0.5 * quad);
  for (size_t i = 0; i + 1 < gamma.size(); ++i) {
    const double diff = gamma[i + 1] - gamma[i];
    out[i + 1] += coeff * scale * diff / delta[i];
    out[i] -= coeff * scale * diff / delta[i];
  }
}

double constant_gamma_log_prior(double gamma_e, double mu0, double sigma0) {
  const double z = (gamma_e - mu0) / sigma0;
  return -std::log(sigma0) - kHalfLog2Pi - 0.5 * z * z;
}

std::vector<double> clock_branch_lengths(const RootedTopology& tree,
                                         const std::vector<double>& heights, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("clock rate must be positive");
  std::vector<double> lengths(tree.n_nodes(), 0.0);
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v == tree.root) continue;
    lengths[v] = rate * (heights[tree.nodes[v].parent] - heights[v]);
  }
  return lengths;
}

// --- HeightModel ---

HeightModel::HeightModel(const SubsplitSupport* support, bool psp)
    : support_(support), psp_(psp) {
  mu_root.assign(support->n_root_subsplits(), 0.0);
  log_sigma_root.assign(support->n_root_subsplits(), std::log(0.5));
  mu_clade.assign(support->n_clades(), 0.0);
  log_sigma_clade.assign(support->n_clades(), std::log(0.5));
  mu_psp.assign(support->n_pcsps(), 0.0);
  log_sigma_psp.assign(support->n_pcsps(), 0.0);
}

HeightModel::TreeKeys HeightModel::resolve(const RootedTopology& tree) const {
  TreeKeys keys;
  keys.by_node.resize(tree.n_nodes());
  const auto internals = tree.postorder_internals();
  keys.internal_preorder.assign(internals.rbegin(), internals.rend());

  const auto pair_of = [&](int parent_node, int child_node) {
    return Pcsp{tree.node_subsplit(parent_node), tree.node_subsplit(child_node)};
  };
  for (int v : internals) {
    NodeKeys& nk = keys.by_node[v];
    nk.is_root = v == tree.root;
    if (nk.is_root) {
      nk.base = support_->root_index(tree.node_subsplit(v));
      if (nk.base < 0) throw std::invalid_argument("root subsplit not in support");
    } else {
      nk.base = support_->clade_index(tree.clades[v]);
      if (nk.base < 0) {
        throw std::invalid_argument("node clade not in support: " + tree.clades[v].to_string());
      }
    }
    if (psp_) {
      if (!nk.is_root) {
        const int idx = support_->pcsp_flat_index(pair_of(tree.nodes[v].parent, v));
        if (idx >= 0) nk.pair_indices.push_back(idx);
      }
      for (int c : {tree.nodes[v].left, tree.nodes[v].right}) {
        if (tree.nodes[c].is_leaf()) continue;
        const int idx = support_->pcsp_flat_index(pair_of(v, c));
        if (idx >= 0) nk.pair_indices.push_back(idx);
      }
    }
  }
  return keys;
}

std::pair<double, double> HeightModel::node_params(const NodeKeys& keys) const {
  double mu = keys.is_root ? mu_root[keys.base] : mu_clade[keys.base];
  double ls = keys.is_root ? log_sigma_root[keys.base] : log_sigma_clade[keys.base];
  for (int idx : keys.pair_indices) {
    mu += mu_psp[idx];
    ls += log_sigma_psp[idx];
  }
  return {mu, std::exp(ls)};
}

HeightModel::Sample HeightModel::sample(const TreeKeys& keys, Rng& rng) const {
  Sample s;
  s.alpha.assign(keys.by_node.size(), 0.0);
  s.eps.assign(keys.by_node.size(), 0.0);
  for (int v : keys.internal_preorder) {
    const auto [mu, sigma] = node_params(keys.by_node[v]);
    s.eps[v] = rng.normal();
    s.alpha[v] = mu + sigma * s.eps[v];
    s.log_density += -std::log(sigma) - kHalfLog2Pi - 0.5 * s.eps[v] * s.eps[v];
  }
  return s;
}

HeightModel::Gradient HeightModel::zero_gradient() const {
  Gradient g;
  g.mu_root.assign(mu_root.size(), 0.0);
  g.log_sigma_root.assign(log_sigma_root.size(), 0.0);
  g.mu_clade.assign(mu_clade.size(), 0.0);
  g.log_sigma_clade.assign(log_sigma_clade.size(), 0.0);
  g.mu_psp.assign(mu_psp.size(), 0.0);
  g.log_sigma_psp.assign(log_sigma_psp.size(), 0.0);
  return g;
}

void HeightModel::add_pathwise_gradient(const TreeKeys& keys, const Sample& sample,
                                        const std::vector<double>& d_alpha, double coeff,
                                        Gradient& out) const {
  for (int v : keys.internal_preorder) {
    const NodeKeys& nk = keys.by_node[v];
    const auto [mu, sigma] = node_params(nk);
    (void)mu;
    const double d_mu = d_alpha[v];
    // alpha = mu + sigma*eps and -log Q contributes +1 per log-sigma key
    const double d_ls = d_alpha[v] * sigma * sample.eps[v] + 1.0;
    if (nk.is_root) {
      out.mu_root[nk.base] += coeff * d_mu;
      out.log_sigma_root[nk.base] += coeff * d_ls;
    } else {
      out.mu_clade[nk.base] += coeff * d_mu;
      out.log_sigma_clade[nk.base] += coeff * d_ls;
    }
    for (int idx : nk.pair_indices) {
      out.mu_psp[idx] += coeff * d_mu;
      out.log_sigma_psp[idx] += coeff * d_ls;
    }
  }
}

}  // namespace vbphylo
