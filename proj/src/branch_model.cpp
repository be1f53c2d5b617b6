#include "vbphylo/branch_model.hpp"

#include <cmath>
#include <stdexcept>

namespace vbphylo {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2*pi)/2
}

BranchModel::BranchModel(const SubsplitSupport* support, bool psp)
    : support_(support), psp_(psp) {
  if (!support_->finalized()) throw std::logic_error("support must be finalized");
  // Split parameters start at the Exp(10) prior mean scale; PSP parameters
  // start at zero so PSP mode begins exactly at the split-mode distribution.
  mu_split.assign(support_->n_root_subsplits(), std::log(0.1));
  log_sigma_split.assign(support_->n_root_subsplits(), std::log(0.5));
  mu_psp.assign(support_->n_pcsps(), 0.0);
  log_sigma_psp.assign(support_->n_pcsps(), 0.0);
}

BranchModel::TreeKeys BranchModel::resolve(const UnrootedTopology& tree) const {
  return resolve(tree, EdgeCladeTable(tree));
}

BranchModel::TreeKeys BranchModel::resolve(const UnrootedTopology& tree,
                                           const EdgeCladeTable& table) const {
  TreeKeys keys;
  keys.edges.resize(tree.n_edges());
  for (int e = 0; e < tree.n_edges(); ++e) {
    const Subsplit split = table.edge_split(e);
    keys.edges[e].split = support_->root_index(split);
    if (keys.edges[e].split < 0) {
      throw std::invalid_argument("edge split not in support: " + split.to_string());
    }
    if (psp_) {
      for (const auto& pair : primary_subsplit_pairs(tree, table, e)) {
        const int idx = support_->pcsp_flat_index(pair);
        if (idx >= 0) keys.edges[e].pair_indices.push_back(idx);
      }
    }
  }
  return keys;
}

std::pair<double, double> BranchModel::edge_params(const EdgeKeys& keys) const {
  double mu = mu_split[keys.split];
  double log_sigma = log_sigma_split[keys.split];
  for (int idx : keys.pair_indices) {
    mu += mu_psp[idx];
    log_sigma += log_sigma_psp[idx];
  }
  return {mu, std::exp(log_sigma)};
}

std::pair<double, double> BranchModel::edge_params(const UnrootedTopology& tree,
                                                   int edge) const {
  return edge_params(resolve(tree).edges[edge]);
}

BranchModel::Sample BranchModel::sample(const TreeKeys& keys, Rng& rng) const {
  Sample s;
  s.lengths.resize(keys.edges.size());
  s.eps.resize(keys.edges.size());
  for (size_t e = 0; e < keys.edges.size(); ++e) {
    const auto [mu, sigma] = edge_params(keys.edges[e]);
    s.eps[e] = rng.normal();
    const double log_q = mu + sigma * s.eps[e];
    s.lengths[e] = std::exp(log_q);
    // lognormal log-density at the sampled point
    s.log_density += -log_q - std::log(sigma) - kHalfLog2Pi - 0.5 * s.eps[e] * s.eps[e];
  }
  return s;
}

double BranchModel::log_density(const TreeKeys& keys, const std::vector<double>& lengths) const {
  double total = 0.0;
  for (size_t e = 0; e < keys.edges.size(); ++e) {
    if (!(lengths[e] > 0.0)) throw std::invalid_argument("nonpositive branch length");
    const auto [mu, sigma] = edge_params(keys.edges[e]);
    const double z = (std::log(lengths[e]) - mu) / sigma;
    total += -std::log(lengths[e]) - std::log(sigma) - kHalfLog2Pi - 0.5 * z * z;
  }
  return total;
}

BranchModel::Gradient BranchModel::zero_gradient() const {
  Gradient g;
  g.mu_split.assign(mu_split.size(), 0.0);
  g.log_sigma_split.assign(log_sigma_split.size(), 0.0);
  g.mu_psp.assign(mu_psp.size(), 0.0);
  g.log_sigma_psp.assign(log_sigma_psp.size(), 0.0);
  return g;
}

void BranchModel::add_log_density_gradient(const TreeKeys& keys,
                                           const std::vector<double>& lengths, double coeff,
                                           Gradient& out) const {
  for (size_t e = 0; e < keys.edges.size(); ++e) {
    const auto [mu, sigma] = edge_params(keys.edges[e]);
    const double z = (std::log(lengths[e]) - mu) / sigma;
    const double d_mu = z / sigma;
    const double d_log_sigma = z * z - 1.0;  // chain rule through sigma = exp(sum)
    const auto& ek = keys.edges[e];
    out.mu_split[ek.split] += coeff * d_mu;
    out.log_sigma_split[ek.split] += coeff * d_log_sigma;
    for (int idx : ek.pair_indices) {
      out.mu_psp[idx] += coeff * d_mu;
      out.log_sigma_psp[idx] += coeff * d_log_sigma;
    }
  }
}

void BranchModel::add_pathwise_gradient(const TreeKeys& keys, const Sample& sample,
                                        const std::vector<double>& d_logjoint_dq, double coeff,
                                        Gradient& out) const {
  for (size_t e = 0; e < keys.edges.size(); ++e) {
    const auto [mu, sigma] = edge_params(keys.edges[e]);
    const double q = sample.lengths[e];
    const double eps = sample.eps[e];
    // q = exp(mu + sigma*eps): dq/dmu = q, dq/dsigma = q*eps.
    // -log Q contributes d/dmu = 1 and d/dsigma = eps + 1/sigma explicitly.
    const double d_mu = d_logjoint_dq[e] * q + 1.0;
    const double d_sigma = d_logjoint_dq[e] * q * eps + eps + 1.0 / sigma;
    const double d_log_sigma = d_sigma * sigma;
    const auto& ek = keys.edges[e];
    out.mu_split[ek.split] += coeff * d_mu;
    out.log_sigma_split[ek.split] += coeff * d_log_sigma;
    for (int idx : ek.pair_indices) {
      out.mu_psp[idx] += coeff * d_mu;
      out.log_sigma_psp[idx] += coeff * d_log_sigma;
    }
  }
}

int BranchModel::n_params() const {
  return static_cast<int>(mu_split.size() + log_sigma_split.size() + mu_psp.size() +
                          log_sigma_psp.size());
}

double exp_branch_log_prior(const std::vector<double>& lengths, double rate) {
  double total = 0.0;
  for (double q : lengths) total += std::log(rate) - rate * q;
  return total;
}

}  // namespace vbphylo
