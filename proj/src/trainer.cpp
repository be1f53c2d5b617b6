#include "vbphylo/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <ostream>
#include <stdexcept>

#include "vbphylo/numeric.hpp"

namespace vbphylo {

double multi_sample_elbo(std::span<const double> log_f) { return log_mean_exp(log_f); }

std::vector<double> normalized_importance_weights(std::span<const double> log_f) {
  return normalized_exp(log_f);
}

std::vector<double> vimco_coefficients(std::span<const double> log_f) {
  const int k = static_cast<int>(log_f.size());
  if (k < 2) throw std::invalid_argument("VIMCO needs at least two samples");
  const double full = log_mean_exp(log_f);
  const auto weights = normalized_exp(log_f);

  double log_sum_all = 0.0;  // sum of log f, for leave-one-out means
  for (double v : log_f) log_sum_all += v;

  std::vector<double> coeffs(k);
  std::vector<double> replaced(log_f.begin(), log_f.end());
  for (int j = 0; j < k; ++j) {
    const double held_out = log_f[j];
    replaced[j] = (log_sum_all - held_out) / (k - 1);  // geometric mean of the rest
    const double signal = full - log_mean_exp(replaced);
    replaced[j] = held_out;
    coeffs[j] = signal - weights[j];
  }
  return coeffs;
}

double anneal_beta(long t, long period) {
  return std::min(1.0, 0.001 + static_cast<double>(t) / static_cast<double>(period));
}

std::vector<double> AdamOptimizer::step(std::span<const double> grad, double step_size) {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  if (grad.size() != m_.size()) throw std::invalid_argument("gradient size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  std::vector<double> delta(grad.size());
  for (size_t i = 0; i < grad.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    delta[i] = step_size * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + kEps);
  }
  return delta;
}

void parallel_indexed(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> futures;
  std::atomic<int> next{0};
  const int workers = std::min(threads, n);
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

namespace {

void clip_gradient(std::vector<std::span<double>> blocks, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& b : blocks) {
    for (double v : b) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& b : blocks) {
    for (double& v : b) v *= scale;
  }
}

}  // namespace

UnrootedDraw evaluate_unrooted_draw(const UnrootedModel& model, UnrootedTopology tree,
                                    BranchModel::Sample branches,
                                    const PatternTable& patterns, const SubstModel& subst,
                                    double beta, bool with_gradients) {
  UnrootedDraw draw;
  draw.tree = std::move(tree);
  draw.branches = std::move(branches);
  const EdgeCladeTable table(draw.tree);
  draw.keys = model.branch.resolve(draw.tree, table);

  if (with_gradients) {
    auto lg = log_likelihood_gradient(draw.tree, draw.branches.lengths, patterns, subst);
    draw.log_likelihood = lg.log_likelihood;
    draw.d_loglik_dq = std::move(lg.d_log_likelihood);
  } else {
    draw.log_likelihood = log_likelihood(draw.tree, draw.branches.lengths, patterns, subst);
  }
  draw.log_q_topology = std::log(model.sbn.unrooted_prob(draw.tree, table).prob);
  draw.log_prior = exp_branch_log_prior(draw.branches.lengths, model.branch_prior_rate) -
                   log_double_factorial_unrooted(draw.tree.n_leaves());
  draw.log_f = beta * draw.log_likelihood + draw.log_prior - draw.log_q_topology -
               draw.branches.log_density;
  return draw;
}

TimeTreeDraw evaluate_timetree_draw(const TimeTreeModel& model, RootedTopology tree,
                                    HeightModel::Sample alpha, std::vector<double> gamma_eps,
                                    double rate_eps, const PatternTable& patterns,
                                    const SubstModel& subst, double beta, bool with_gradients) {
  TimeTreeDraw draw;
  draw.tree = std::move(tree);
  draw.alpha = std::move(alpha);
  draw.gamma_eps = std::move(gamma_eps);
  draw.rate_eps = rate_eps;
  draw.keys = model.heights.resolve(draw.tree);
  draw.bounds = height_lower_bounds(draw.tree, model.times);
  draw.transform = heights_from_alpha(draw.tree, draw.bounds, draw.alpha.alpha);

  draw.gamma.resize(model.gamma_mu.size());
  double log_q_gamma = 0.0;
  for (size_t i = 0; i < draw.gamma.size(); ++i) {
    const double sigma = std::exp(model.gamma_log_sigma[i]);
    draw.gamma[i] = model.gamma_mu[i] + sigma * draw.gamma_eps[i];
    log_q_gamma += -model.gamma_log_sigma[i] - 0.91893853320467274178 -
                   0.5 * draw.gamma_eps[i] * draw.gamma_eps[i];
  }

  double log_q_rate = 0.0;
  if (model.rate_fixed) {
    draw.rate = model.fixed_rate;
  } else {
    const double sigma_r = std::exp(model.rate_log_sigma);
    const double log_r = model.rate_mu + sigma_r * draw.rate_eps;
    draw.rate = std::exp(log_r);
    log_q_rate = -log_r - model.rate_log_sigma - 0.91893853320467274178 -
                 0.5 * draw.rate_eps * draw.rate_eps;
    const double zp = (log_r - model.rate_prior_mu) / model.rate_prior_sigma;
    draw.log_prior_rate = -log_r - std::log(model.rate_prior_sigma) -
                          0.91893853320467274178 - 0.5 * zp * zp;
  }

  draw.branch_lengths = clock_branch_lengths(draw.tree, draw.transform.heights, draw.rate);
  if (with_gradients) {
    auto lg = log_likelihood_gradient(pruning_view(draw.tree, draw.branch_lengths), patterns,
                                      subst);
    draw.log_likelihood = lg.log_likelihood;
    draw.d_loglik_dq = std::move(lg.d_log_likelihood);
  } else {
    draw.log_likelihood = log_likelihood(draw.tree, draw.branch_lengths, patterns, subst);
  }

  draw.log_coalescent = coalescent_log_density(draw.tree, draw.transform.heights, draw.gamma,
                                               model.coalescent.kind);
  if (model.coalescent.kind == CoalescentKind::kConstant) {
    draw.log_prior_gamma = constant_gamma_log_prior(draw.gamma[0], model.coalescent.constant_mu0,
                                                    model.coalescent.constant_sigma0);
  } else {
    draw.log_prior_gamma = skyride_log_prior(draw.gamma, model.coalescent.skyride_a,
                                             model.coalescent.skyride_b,
                                             model.coalescent.skyride_delta);
  }

  draw.log_q_topology = model.sbn.log_rooted_prob(draw.tree);
  draw.log_q_continuous =
      draw.alpha.log_density - draw.transform.log_jacobian + log_q_gamma + log_q_rate;
  const double log_topology_prior = -log_double_factorial_rooted(draw.tree.n_leaves());
  draw.log_f = beta * draw.log_likelihood + draw.log_coalescent + draw.log_prior_gamma +
               draw.log_prior_rate + log_topology_prior - draw.log_q_topology -
               draw.log_q_continuous;
  return draw;
}

void add_timetree_continuous_gradient(const TimeTreeModel& model, const TimeTreeDraw& draw,
                                      double beta, double coeff,
                                      TimeTreeContinuousGradient& out) {
  const auto& tree = draw.tree;

  // dF/dheights from the clock-scaled likelihood.
  std::vector<double> d_heights(tree.n_nodes(), 0.0);
  double d_rate = 0.0;
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v == tree.root) continue;
    const int p = tree.nodes[v].parent;
    const double dq = beta * draw.d_loglik_dq[v];
    d_heights[p] += dq * draw.rate;
    if (!tree.nodes[v].is_leaf()) d_heights[v] -= dq * draw.rate;
    d_rate += dq * (draw.transform.heights[p] - draw.transform.heights[v]);
  }
  // Coalescent terms in heights and gamma.
  const auto coal = coalescent_log_density_gradient(tree, draw.transform.heights, draw.gamma,
                                                    model.coalescent.kind);
  for (int v = tree.n_leaves(); v < tree.n_nodes(); ++v) d_heights[v] += coal.d_heights[v];

  const auto d_alpha = backprop_heights_to_alpha(tree, draw.bounds, draw.transform,
                                                 std::move(d_heights),
                                                 /*with_log_jacobian=*/true);
  model.heights.add_pathwise_gradient(draw.keys, draw.alpha, d_alpha, coeff, out.heights);

  std::vector<double> d_gamma = coal.d_gamma;
  if (model.coalescent.kind == CoalescentKind::kConstant) {
    const double z =
        (draw.gamma[0] - model.coalescent.constant_mu0) / model.coalescent.constant_sigma0;
    d_gamma[0] += -z / model.coalescent.constant_sigma0;
  } else {
    add_skyride_log_prior_gradient(draw.gamma, model.coalescent.skyride_a,
                                   model.coalescent.skyride_b, model.coalescent.skyride_delta,
                                   1.0, d_gamma);
  }
  for (size_t i = 0; i < d_gamma.size(); ++i) {
    const double sigma = std::exp(model.gamma_log_sigma[i]);
    out.gamma_mu[i] += coeff * d_gamma[i];
    out.gamma_log_sigma[i] += coeff * (d_gamma[i] * sigma * draw.gamma_eps[i] + 1.0);
  }

  if (!model.rate_fixed) {
    const double log_r = std::log(draw.rate);
    const double zp = (log_r - model.rate_prior_mu) / model.rate_prior_sigma;
    d_rate += (-1.0 - zp / model.rate_prior_sigma) / draw.rate;
    const double sigma_r = std::exp(model.rate_log_sigma);
    out.rate_mu += coeff * (d_rate * draw.rate + 1.0);
    out.rate_log_sigma +=
        coeff * ((d_rate * draw.rate * draw.rate_eps + draw.rate_eps) * sigma_r + 1.0);
  }
}

namespace {

struct TraceWriter {
  std::ostream* out;
  std::vector<TraceRow>* rows;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void emit(long iter, double beta, double bound) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows->push_back({iter, beta, bound, elapsed});
    if (out != nullptr) {
      (*out) << iter << ',' << beta << ',' << bound << ',' << elapsed << '\n';
    }
  }
};

[[noreturn]] void divergence_abort(long iter, double bound) {
  throw std::runtime_error("training diverged at iteration " + std::to_string(iter) +
                           ": non-finite bound " + std::to_string(bound));
}

}  // namespace

TrainResult train_unrooted(UnrootedModel& model, const PatternTable& patterns,
                           const SubstModel& subst, const TrainConfig& config,
                           std::ostream* trace_out) {
  Rng rng_topology = Rng::substream(config.seed, "topology");
  Rng rng_branch = Rng::substream(config.seed, "branch");

  const int n_phi = model.support->param_count();
  AdamOptimizer opt_phi(n_phi);
  AdamOptimizer opt_mu_split(model.branch.mu_split.size());
  AdamOptimizer opt_ls_split(model.branch.log_sigma_split.size());
  AdamOptimizer opt_mu_psp(model.branch.mu_psp.size());
  AdamOptimizer opt_ls_psp(model.branch.log_sigma_psp.size());

  TrainResult result;
  TraceWriter trace{trace_out, &result.trace};
  if (trace_out != nullptr) (*trace_out) << "iter,beta,lower_bound,elapsed_s\n";

  for (long iter = 0; iter < config.iters; ++iter) {
    const double beta = anneal_beta(iter, config.anneal_period);

    // Draw all randomness serially, evaluate the expensive parts in parallel.
    std::vector<UnrootedTopology> trees;
    std::vector<BranchModel::Sample> branch_samples;
    trees.reserve(config.k);
    for (int j = 0; j < config.k; ++j) {
      trees.push_back(model.sbn.sample_unrooted(rng_topology));
      branch_samples.push_back(model.branch.sample(model.branch.resolve(trees.back()), rng_branch));
    }
    std::vector<UnrootedDraw> draws(config.k);
    std::vector<SbnGradient> phi_grads(config.k);
    parallel_indexed(config.k, config.threads, [&](int j) {
      draws[j] = evaluate_unrooted_draw(model, std::move(trees[j]),
                                        std::move(branch_samples[j]), patterns, subst, beta,
                                        /*with_gradients=*/true);
      phi_grads[j] = model.sbn.grad_log_unrooted(draws[j].tree);
    });

    std::vector<double> log_f(config.k);
    for (int j = 0; j < config.k; ++j) log_f[j] = draws[j].log_f;
    const double bound = multi_sample_elbo(log_f);
    if (!std::isfinite(bound)) divergence_abort(iter, bound);

    const auto weights = normalized_importance_weights(log_f);
    const auto phi_coeffs = config.estimator == PhiEstimator::kVimco
                                ? vimco_coefficients(log_f)
                                : weights;

    std::vector<double> grad_phi(n_phi, 0.0);
    for (int j = 0; j < config.k; ++j) {
      for (const auto& [idx, val] : phi_grads[j]) grad_phi[idx] += phi_coeffs[j] * val;
    }

    auto grad_branch = model.branch.zero_gradient();
    std::vector<double> d_logjoint_dq;
    for (int j = 0; j < config.k; ++j) {
      const auto& draw = draws[j];
      d_logjoint_dq.assign(draw.d_loglik_dq.size(), 0.0);
      for (size_t e = 0; e < d_logjoint_dq.size(); ++e) {
        d_logjoint_dq[e] = beta * draw.d_loglik_dq[e] - model.branch_prior_rate;
      }
      model.branch.add_pathwise_gradient(draw.keys, draw.branches, d_logjoint_dq, weights[j],
                                         grad_branch);
    }

    clip_gradient({std::span<double>(grad_phi), std::span<double>(grad_branch.mu_split),
                   std::span<double>(grad_branch.log_sigma_split),
                   std::span<double>(grad_branch.mu_psp),
                   std::span<double>(grad_branch.log_sigma_psp)},
                  config.clip_norm);

    model.sbn.update_params(opt_phi.step(grad_phi, config.step_size));
    const auto apply = [&](AdamOptimizer& opt, std::vector<double>& params,
                           const std::vector<double>& grad) {
      const auto delta = opt.step(grad, config.step_size);
      for (size_t i = 0; i < params.size(); ++i) params[i] += delta[i];
    };
    apply(opt_mu_split, model.branch.mu_split, grad_branch.mu_split);
    apply(opt_ls_split, model.branch.log_sigma_split, grad_branch.log_sigma_split);
    if (config.psp) {
      apply(opt_mu_psp, model.branch.mu_psp, grad_branch.mu_psp);
      apply(opt_ls_psp, model.branch.log_sigma_psp, grad_branch.log_sigma_psp);
    }

    if (iter % config.trace_stride == 0 || iter + 1 == config.iters) {
      trace.emit(iter, beta, bound);
    }
    ++result.iters_run;
  }
  result.rng_state = rng_topology.serialize();
  return result;
}

TrainResult train_timetree(TimeTreeModel& model, const PatternTable& patterns,
                           const SubstModel& subst, const TrainConfig& config,
                           std::ostream* trace_out) {
  Rng rng_topology = Rng::substream(config.seed, "topology");
  Rng rng_height = Rng::substream(config.seed, "height");
  Rng rng_gamma = Rng::substream(config.seed, "gamma");
  Rng rng_rate = Rng::substream(config.seed, "rate");

  const int n_phi = model.support->param_count();
  AdamOptimizer opt_phi(n_phi);
  AdamOptimizer opt_mu_root(model.heights.mu_root.size());
  AdamOptimizer opt_ls_root(model.heights.log_sigma_root.size());
  AdamOptimizer opt_mu_clade(model.heights.mu_clade.size());
  AdamOptimizer opt_ls_clade(model.heights.log_sigma_clade.size());
  AdamOptimizer opt_mu_psp(model.heights.mu_psp.size());
  AdamOptimizer opt_ls_psp(model.heights.log_sigma_psp.size());
  AdamOptimizer opt_gamma_mu(model.gamma_mu.size());
  AdamOptimizer opt_gamma_ls(model.gamma_log_sigma.size());
  AdamOptimizer opt_rate(2);

  TrainResult result;
  TraceWriter trace{trace_out, &result.trace};
  if (trace_out != nullptr) (*trace_out) << "iter,beta,lower_bound,elapsed_s\n";

  for (long iter = 0; iter < config.iters; ++iter) {
    const double beta = anneal_beta(iter, config.anneal_period);

    std::vector<RootedTopology> trees;
    std::vector<HeightModel::Sample> alphas;
    std::vector<std::vector<double>> gamma_eps(config.k);
    std::vector<double> rate_eps(config.k, 0.0);
    for (int j = 0; j < config.k; ++j) {
      trees.push_back(model.sbn.sample_rooted(rng_topology));
      alphas.push_back(model.heights.sample(model.heights.resolve(trees.back()), rng_height));
      gamma_eps[j].resize(model.gamma_mu.size());
      for (auto& e : gamma_eps[j]) e = rng_gamma.normal();
      if (!model.rate_fixed) rate_eps[j] = rng_rate.normal();
    }

    std::vector<TimeTreeDraw> draws(config.k);
    std::vector<SbnGradient> phi_grads(config.k);
    parallel_indexed(config.k, config.threads, [&](int j) {
      draws[j] = evaluate_timetree_draw(model, std::move(trees[j]), std::move(alphas[j]),
                                        std::move(gamma_eps[j]), rate_eps[j], patterns, subst,
                                        beta, /*with_gradients=*/true);
      phi_grads[j] = model.sbn.grad_log_rooted(draws[j].tree);
    });

    std::vector<double> log_f(config.k);
    for (int j = 0; j < config.k; ++j) log_f[j] = draws[j].log_f;
    const double bound = multi_sample_elbo(log_f);
    if (!std::isfinite(bound)) divergence_abort(iter, bound);

    const auto weights = normalized_importance_weights(log_f);
    const auto phi_coeffs = config.estimator == PhiEstimator::kVimco
                                ? vimco_coefficients(log_f)
                                : weights;

    std::vector<double> grad_phi(n_phi, 0.0);
    for (int j = 0; j < config.k; ++j) {
      for (const auto& [idx, val] : phi_grads[j]) grad_phi[idx] += phi_coeffs[j] * val;
    }

    TimeTreeContinuousGradient grads;
    grads.heights = model.heights.zero_gradient();
    grads.gamma_mu.assign(model.gamma_mu.size(), 0.0);
    grads.gamma_log_sigma.assign(model.gamma_mu.size(), 0.0);
    for (int j = 0; j < config.k; ++j) {
      add_timetree_continuous_gradient(model, draws[j], beta, weights[j], grads);
    }
    auto& grad_heights = grads.heights;
    auto& grad_gamma_mu = grads.gamma_mu;
    auto& grad_gamma_ls = grads.gamma_log_sigma;
    const double grad_rate_mu = grads.rate_mu;
    const double grad_rate_ls = grads.rate_log_sigma;

    clip_gradient({std::span<double>(grad_phi), std::span<double>(grad_heights.mu_root),
                   std::span<double>(grad_heights.log_sigma_root),
                   std::span<double>(grad_heights.mu_clade),
                   std::span<double>(grad_heights.log_sigma_clade),
                   std::span<double>(grad_heights.mu_psp),
                   std::span<double>(grad_heights.log_sigma_psp),
                   std::span<double>(grad_gamma_mu), std::span<double>(grad_gamma_ls)},
                  config.clip_norm);

    model.sbn.update_params(opt_phi.step(grad_phi, config.step_size));
    const auto apply = [&](AdamOptimizer& opt, std::vector<double>& params,
                           const std::vector<double>& grad) {
      const auto delta = opt.step(grad, config.step_size);
      for (size_t i = 0; i < params.size(); ++i) params[i] += delta[i];
    };
    apply(opt_mu_root, model.heights.mu_root, grad_heights.mu_root);
    apply(opt_ls_root, model.heights.log_sigma_root, grad_heights.log_sigma_root);
    apply(opt_mu_clade, model.heights.mu_clade, grad_heights.mu_clade);
    apply(opt_ls_clade, model.heights.log_sigma_clade, grad_heights.log_sigma_clade);
    if (config.psp) {
      apply(opt_mu_psp, model.heights.mu_psp, grad_heights.mu_psp);
      apply(opt_ls_psp, model.heights.log_sigma_psp, grad_heights.log_sigma_psp);
    }
    apply(opt_gamma_mu, model.gamma_mu, grad_gamma_mu);
    apply(opt_gamma_ls, model.gamma_log_sigma, grad_gamma_ls);
    if (!model.rate_fixed) {
      std::vector<double> rate_grad{grad_rate_mu, grad_rate_ls};
      const auto delta = opt_rate.step(rate_grad, config.step_size);
      model.rate_mu += delta[0];
      model.rate_log_sigma += delta[1];
    }

    if (iter % config.trace_stride == 0 || iter + 1 == config.iters) {
      trace.emit(iter, beta, bound);
    }
    ++result.iters_run;
  }
  result.rng_state = rng_topology.serialize();
  return result;
}

}  // namespace vbphylo
