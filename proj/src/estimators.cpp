#include "vbphylo/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "vbphylo/numeric.hpp"

namespace vbphylo {

MarginalLikelihoodEstimate tree_marginal_likelihood(const UnrootedModel& model,
                                                    const UnrootedTopology& tree,
                                                    const PatternTable& patterns,
                                                    const SubstModel& subst, int n_samples,
                                                    Rng& rng) {
  const auto keys = model.branch.resolve(tree);  // throws when uncovered
  std::vector<double> log_ratios(n_samples);
  for (int j = 0; j < n_samples; ++j) {
    const auto sample = model.branch.sample(keys, rng);
    log_ratios[j] = log_likelihood(tree, sample.lengths, patterns, subst) +
                    exp_branch_log_prior(sample.lengths, model.branch_prior_rate) -
                    sample.log_density;
  }
  MarginalLikelihoodEstimate out;
  out.n_samples = n_samples;
  out.log_estimate = log_mean_exp(log_ratios);
  // Delta method on the log scale: se(log mean) ~ sd(ratio) / (mean * sqrt(m)),
  // computed with a common shift to avoid overflow.
  double shift = out.log_estimate;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double lr : log_ratios) {
    const double v = std::exp(lr - shift);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n_samples;
  const double var = std::max(0.0, sum_sq / n_samples - mean * mean);
  out.std_error = std::sqrt(var / n_samples) / mean;
  return out;
}

namespace {

EvidenceEstimate summarize_repeats(std::vector<double> repeats) {
  EvidenceEstimate out;
  out.repeats = std::move(repeats);
  double sum = 0.0;
  for (double v : out.repeats) sum += v;
  out.mean = sum / out.repeats.size();
  double sq = 0.0;
  for (double v : out.repeats) sq += (v - out.mean) * (v - out.mean);
  out.std_dev = out.repeats.size() > 1 ? std::sqrt(sq / (out.repeats.size() - 1)) : 0.0;
  return out;
}

}  // namespace

EvidenceEstimate evidence_estimate(const UnrootedModel& model, const PatternTable& patterns,
                                   const SubstModel& subst, int k, int repeats, Rng& rng,
                                   int threads) {
  std::vector<double> bounds(repeats);
  std::vector<UnrootedTopology> trees(k);
  std::vector<BranchModel::Sample> samples(k);
  std::vector<double> log_f(k);
  for (int r = 0; r < repeats; ++r) {
    // draws come off the stream serially; the likelihood work is parallel
    for (int j = 0; j < k; ++j) {
      trees[j] = model.sbn.sample_unrooted(rng);
      samples[j] = model.branch.sample(model.branch.resolve(trees[j]), rng);
    }
    parallel_indexed(k, threads, [&](int j) {
      log_f[j] = evaluate_unrooted_draw(model, std::move(trees[j]), std::move(samples[j]),
                                        patterns, subst, /*beta=*/1.0,
                                        /*with_gradients=*/false)
                     .log_f;
    });
    bounds[r] = multi_sample_elbo(log_f);
  }
  return summarize_repeats(std::move(bounds));
}

EvidenceEstimate evidence_estimate(const TimeTreeModel& model, const PatternTable& patterns,
                                   const SubstModel& subst, int k, int repeats, Rng& rng,
                                   int threads) {
  Rng rng_rate = Rng::substream(rng.bits(), "estimate-rate");
  std::vector<double> bounds(repeats);
  std::vector<RootedTopology> trees(k);
  std::vector<HeightModel::Sample> alphas(k);
  std::vector<std::vector<double>> gamma_eps(k);
  std::vector<double> rate_eps(k);
  std::vector<double> log_f(k);
  for (int r = 0; r < repeats; ++r) {
    for (int j = 0; j < k; ++j) {
      trees[j] = model.sbn.sample_rooted(rng);
      alphas[j] = model.heights.sample(model.heights.resolve(trees[j]), rng);
      gamma_eps[j].resize(model.gamma_mu.size());
      for (auto& e : gamma_eps[j]) e = rng.normal();
      rate_eps[j] = model.rate_fixed ? 0.0 : rng_rate.normal();
    }
    parallel_indexed(k, threads, [&](int j) {
      log_f[j] = evaluate_timetree_draw(model, std::move(trees[j]), std::move(alphas[j]),
                                        std::move(gamma_eps[j]), rate_eps[j], patterns, subst,
                                        /*beta=*/1.0, /*with_gradients=*/false)
                     .log_f;
    });
    bounds[r] = multi_sample_elbo(log_f);
  }
  return summarize_repeats(std::move(bounds));
}

KlResult kl_topology(const SbnModel& sbn, const ReferenceDistribution& reference) {
  KlResult out;
  double kl = 0.0;
  for (size_t i = 0; i < reference.probs.size(); ++i) {
    const double p_hat = reference.probs[i];
    double log_q;
    if (reference.rooted) {
      log_q = sbn.log_rooted_prob(reference.rooted_trees[i]);
    } else {
      log_q = sbn.log_unrooted_prob(reference.unrooted_trees[i]);
    }
    if (!std::isfinite(log_q)) {
      out.uncovered.push_back(reference.rooted
                                  ? write_newick(reference.rooted_trees[i])
                                  : write_newick(reference.unrooted_trees[i]));
      continue;
    }
    kl += p_hat * (std::log(p_hat) - log_q);
  }
  out.kl = out.uncovered.empty() ? kl : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace vbphylo
