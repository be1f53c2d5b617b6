#include <doctest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "vbphylo/checkpoint.hpp"
#include "vbphylo/estimators.hpp"
#include "vbphylo/numeric.hpp"
#include "vbphylo/trainer.hpp"

using namespace vbphylo;

TEST_CASE("multi-sample bound basics") {
  const std::vector<double> equal{std::log(2.5), std::log(2.5), std::log(2.5)};
  CHECK(multi_sample_elbo(equal) == doctest::Approx(std::log(2.5)).epsilon(1e-12));
  const std::vector<double> one{-3.7};
  CHECK(multi_sample_elbo(one) == doctest::Approx(-3.7));
  // monotone in each sample
  std::vector<double> base{-1.0, -2.0, -3.0};
  const double before = multi_sample_elbo(base);
  base[1] += 0.5;
  CHECK(multi_sample_elbo(base) > before);
  // weights normalize exactly
  const auto w = normalized_importance_weights(base);
  double total = 0.0;
  for (double v : w) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("vimco coefficients at equal weights are -1/K") {
  const int k = 5;
  const std::vector<double> log_f(k, -11.3);
  const auto coeffs = vimco_coefficients(log_f);
  for (double c : coeffs) CHECK(c == doctest::Approx(-1.0 / k).epsilon(1e-12));
  CHECK_THROWS(vimco_coefficients(std::vector<double>{-1.0}));
}

TEST_CASE("annealing schedule") {
  CHECK(anneal_beta(0, 100000) == doctest::Approx(0.001));
  CHECK(anneal_beta(100000, 100000) == doctest::Approx(1.0));
  CHECK(anneal_beta(200000, 100000) == doctest::Approx(1.0));  // clamped
  CHECK(anneal_beta(50000, 100000) == doctest::Approx(0.501));
}

TEST_CASE("adam first step has unit normalized magnitude and gradient sign") {
  AdamOptimizer opt(3);
  const std::vector<double> grad{0.02, -5.0, 0.0};
  const auto delta = opt.step(grad, 0.01);
  CHECK(delta[0] == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(delta[1] == doctest::Approx(-0.01).epsilon(1e-5));
  CHECK(delta[2] == 0.0);
  // zero gradient leaves parameters unchanged forever
  AdamOptimizer opt2(2);
  const std::vector<double> zero{0.0, 0.0};
  for (int i = 0; i < 5; ++i) {
    const auto d = opt2.step(zero, 0.1);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 0.0);
  }
}

namespace {

struct TinyUnrooted {
  std::shared_ptr<SubsplitSupport> support;
  std::unique_ptr<UnrootedModel> model;
  PatternTable patterns;
  Jc69Model jc;
  UnrootedTopology true_tree;
  std::vector<double> true_lengths;

  TinyUnrooted(int n, int sites, uint64_t seed, int extra_trees, bool psp) {
    Rng rng(seed);
    const auto taxa = default_taxa(n);
    true_tree = random_unrooted_topology(taxa, rng);
    true_lengths.assign(true_tree.n_edges(), 0.0);
    Rng lrng = Rng::substream(seed, "sim-lengths");
    for (auto& l : true_lengths) l = lrng.exponential(10.0);
    Rng srng = Rng::substream(seed, "sim");
    patterns = compress_patterns(simulate_alignment(true_tree, true_lengths, jc, sites, srng));
    auto s = std::make_shared<SubsplitSupport>(taxa);
    add_tree_to_support(*s, true_tree);
    for (int i = 0; i < extra_trees; ++i) {
      add_tree_to_support(*s, random_unrooted_topology(taxa, rng));
    }
    s->finalize();
    support = s;
    model = std::make_unique<UnrootedModel>(support, psp);
  }
};

}  // namespace

TEST_CASE("unrooted pathwise gradient matches finite differences of log f") {
  TinyUnrooted tiny(5, 30, 404, 2, true);
  auto& model = *tiny.model;
  Rng rng(1);
  // random parameter perturbation, then a fixed draw
  for (auto& v : model.branch.mu_split) v += rng.uniform(-0.2, 0.2);
  for (auto& v : model.branch.log_sigma_split) v += rng.uniform(-0.2, 0.2);
  for (auto& v : model.branch.mu_psp) v += rng.uniform(-0.1, 0.1);
  const auto tree = model.sbn.sample_unrooted(rng);
  const auto keys = model.branch.resolve(tree);
  const auto sample = model.branch.sample(keys, rng);
  const double beta = 0.37;

  const auto log_f_at = [&]() {
    // rebuild lengths from the fixed eps under the current parameters
    BranchModel::Sample s = sample;
    s.log_density = 0.0;
    for (size_t e = 0; e < keys.edges.size(); ++e) {
      const auto [mu, sigma] = model.branch.edge_params(keys.edges[e]);
      s.lengths[e] = std::exp(mu + sigma * sample.eps[e]);
      s.log_density += -std::log(s.lengths[e]) - std::log(sigma) - 0.9189385332046727 -
                       0.5 * sample.eps[e] * sample.eps[e];
    }
    return evaluate_unrooted_draw(model, tree, std::move(s), tiny.patterns, tiny.jc, beta,
                                  false)
        .log_f;
  };

  const auto draw = evaluate_unrooted_draw(model, tree, sample, tiny.patterns, tiny.jc, beta,
                                           true);
  auto grad = model.branch.zero_gradient();
  std::vector<double> d_logjoint(draw.d_loglik_dq.size());
  for (size_t e = 0; e < d_logjoint.size(); ++e) {
    d_logjoint[e] = beta * draw.d_loglik_dq[e] - model.branch_prior_rate;
  }
  model.branch.add_pathwise_gradient(draw.keys, draw.branches, d_logjoint, 1.0, grad);

  const auto check_block = [&](std::vector<double>& params, const std::vector<double>& g) {
    for (size_t i = 0; i < params.size(); ++i) {
      const double fd = testing::central_difference(
          [&](double x) {
            const double saved = params[i];
            params[i] = x;
            const double v = log_f_at();
            params[i] = saved;
            return v;
          },
          params[i], 1e-5);
      CHECK(g[i] == doctest::Approx(fd).epsilon(2e-4));
    }
  };
  check_block(model.branch.mu_split, grad.mu_split);
  check_block(model.branch.log_sigma_split, grad.log_sigma_split);
  check_block(model.branch.mu_psp, grad.mu_psp);
  check_block(model.branch.log_sigma_psp, grad.log_sigma_psp);
}

TEST_CASE("timetree continuous gradient matches finite differences of log f") {
  Rng rng(717);
  const int n = 5;
  const auto taxa = default_taxa(n);
  std::vector<std::string> newicks;
  for (int i = 0; i < 4; ++i) {
    newicks.push_back(write_newick(random_rooted_topology(taxa, rng)));
  }
  auto support = std::make_shared<SubsplitSupport>(
      build_support(candidate_trees_from_newicks(newicks, true)));

  for (auto kind : {CoalescentKind::kConstant, CoalescentKind::kSkyride}) {
    for (bool fixed_rate : {true, false}) {
      CoalescentConfig coal;
      coal.kind = kind;
      if (kind == CoalescentKind::kSkyride) coal.skyride_delta.assign(n - 2, 1.0);
      SamplingTimes times{{0.0, 0.3, 0.0, 1.1, 0.6}};
      TimeTreeModel model(support, /*psp=*/true, coal, times);
      model.rate_fixed = fixed_rate;
      model.fixed_rate = 0.8;

      const Jc69Model jc;
      Rng srng(9);
      const auto sim_tree = random_rooted_topology(taxa, srng);
      const auto patterns = compress_patterns(
          simulate_alignment(sim_tree, testing::random_rooted_lengths(sim_tree, srng), jc, 20,
                             srng));

      Rng draw_rng(rng.bits());
      const auto tree = model.sbn.sample_rooted(draw_rng);
      const auto alpha = model.heights.sample(model.heights.resolve(tree), draw_rng);
      std::vector<double> gamma_eps(model.gamma_mu.size());
      for (auto& e : gamma_eps) e = draw_rng.normal();
      const double rate_eps = fixed_rate ? 0.0 : draw_rng.normal();
      const double beta = 0.42;

      const auto log_f_at = [&]() {
        return evaluate_timetree_draw(model, tree, alpha, gamma_eps, rate_eps, patterns, jc,
                                      beta, false)
            .log_f;
      };
      // NOTE: alpha carries eps; rebuild alpha values from mu/sigma at eval time
      const auto log_f_rebuilt = [&]() {
        auto keys = model.heights.resolve(tree);
        HeightModel::Sample s = alpha;
        s.log_density = 0.0;
        for (int v : keys.internal_preorder) {
          const auto [mu, sigma] = model.heights.node_params(keys.by_node[v]);
          s.alpha[v] = mu + sigma * alpha.eps[v];
          s.log_density += -std::log(sigma) - 0.9189385332046727 - 0.5 * alpha.eps[v] * alpha.eps[v];
        }
        return evaluate_timetree_draw(model, tree, std::move(s), gamma_eps, rate_eps, patterns,
                                      jc, beta, false)
            .log_f;
      };
      (void)log_f_at;

      const auto draw = evaluate_timetree_draw(model, tree, alpha, gamma_eps, rate_eps,
                                               patterns, jc, beta, true);
      TimeTreeContinuousGradient grads;
      grads.heights = model.heights.zero_gradient();
      grads.gamma_mu.assign(model.gamma_mu.size(), 0.0);
      grads.gamma_log_sigma.assign(model.gamma_mu.size(), 0.0);
      add_timetree_continuous_gradient(model, draw, beta, 1.0, grads);

      const auto check_block = [&](std::vector<double>& params, const std::vector<double>& g) {
        for (size_t i = 0; i < params.size(); ++i) {
          const double fd = testing::central_difference(
              [&](double x) {
                const double saved = params[i];
                params[i] = x;
                const double v = log_f_rebuilt();
                params[i] = saved;
                return v;
              },
              params[i], 1e-5);
          CHECK(g[i] == doctest::Approx(fd).epsilon(2e-4));
        }
      };
      check_block(model.heights.mu_root, grads.heights.mu_root);
      check_block(model.heights.log_sigma_root, grads.heights.log_sigma_root);
      check_block(model.heights.mu_clade, grads.heights.mu_clade);
      check_block(model.heights.log_sigma_clade, grads.heights.log_sigma_clade);
      check_block(model.heights.mu_psp, grads.heights.mu_psp);
      check_block(model.heights.log_sigma_psp, grads.heights.log_sigma_psp);
      check_block(model.gamma_mu, grads.gamma_mu);
      check_block(model.gamma_log_sigma, grads.gamma_log_sigma);
      if (!fixed_rate) {
        double save = model.rate_mu;
        const double fd_mu = testing::central_difference(
            [&](double x) {
              model.rate_mu = x;
              const double v = log_f_rebuilt();
              model.rate_mu = save;
              return v;
            },
            save, 1e-5);
        CHECK(grads.rate_mu == doctest::Approx(fd_mu).epsilon(2e-4));
        save = model.rate_log_sigma;
        const double fd_ls = testing::central_difference(
            [&](double x) {
              model.rate_log_sigma = x;
              const double v = log_f_rebuilt();
              model.rate_log_sigma = save;
              return v;
            },
            save, 1e-5);
        CHECK(grads.rate_log_sigma == doctest::Approx(fd_ls).epsilon(2e-4));
      }
    }
  }
}

TEST_CASE("training on a degenerate support improves the bound") {
  TinyUnrooted tiny(5, 200, 11, /*extra_trees=*/0, /*psp=*/false);
  TrainConfig config;
  config.k = 5;
  config.iters = 2000;
  config.anneal_period = 500;
  config.seed = 13;
  config.trace_stride = 10;
  const auto result = train_unrooted(*tiny.model, tiny.patterns, tiny.jc, config);

  // the annealed bound is only comparable across iterations once beta hits 1
  std::vector<double> settled;
  for (const auto& row : result.trace) {
    if (row.beta == 1.0) settled.push_back(row.lower_bound);
  }
  REQUIRE(settled.size() > 40);
  const auto mean_of = [&](size_t begin, size_t end) {
    double total = 0.0;
    for (size_t i = begin; i < end; ++i) total += settled[i];
    return total / (end - begin);
  };
  const double early = mean_of(0, 10);
  const double late = mean_of(settled.size() - 10, settled.size());
  CHECK(late > early);
}

TEST_CASE("training is deterministic under a fixed seed") {
  TinyUnrooted a(5, 60, 17, 2, true), b(5, 60, 17, 2, true);
  TrainConfig config;
  config.k = 4;
  config.iters = 50;
  config.anneal_period = 100;
  config.seed = 19;
  config.trace_stride = 1;
  const auto ra = train_unrooted(*a.model, a.patterns, a.jc, config);
  const auto rb = train_unrooted(*b.model, b.patterns, b.jc, config);
  REQUIRE(ra.trace.size() == rb.trace.size());
  for (size_t i = 0; i < ra.trace.size(); ++i) {
    CHECK(ra.trace[i].lower_bound == rb.trace[i].lower_bound);
  }
  CHECK(a.model->sbn.params() == b.model->sbn.params());
  CHECK(a.model->branch.mu_split == b.model->branch.mu_split);
}

TEST_CASE("threaded evaluation reproduces the single-threaded trace") {
  TinyUnrooted a(6, 40, 23, 2, true), b(6, 40, 23, 2, true);
  TrainConfig config;
  config.k = 6;
  config.iters = 20;
  config.anneal_period = 100;
  config.seed = 29;
  config.trace_stride = 1;
  const auto ra = train_unrooted(*a.model, a.patterns, a.jc, config);
  config.threads = 2;
  const auto rb = train_unrooted(*b.model, b.patterns, b.jc, config);
  REQUIRE(ra.trace.size() == rb.trace.size());
  for (size_t i = 0; i < ra.trace.size(); ++i) {
    CHECK(ra.trace[i].lower_bound == rb.trace[i].lower_bound);
  }
}

TEST_CASE("timetree training runs and improves on simulated data") {
  Rng rng(31);
  const int n = 5;
  const auto taxa = default_taxa(n);
  const Jc69Model jc;
  // simulate from a clock tree with heights away from the variational init
  const auto true_tree = random_rooted_topology(taxa, rng);
  const auto bounds = height_lower_bounds(true_tree, SamplingTimes::zeros(n));
  std::vector<double> alpha(true_tree.n_nodes(), 0.0);
  for (int v : true_tree.postorder_internals()) alpha[v] = rng.uniform(0.5, 1.5);
  const auto heights = heights_from_alpha(true_tree, bounds, alpha).heights;
  const auto lengths = clock_branch_lengths(true_tree, heights, 0.1);
  Rng srng(33);
  const auto patterns = compress_patterns(simulate_alignment(true_tree, lengths, jc, 150, srng));

  std::vector<std::string> newicks{write_newick(true_tree)};
  for (int i = 0; i < 3; ++i) newicks.push_back(write_newick(random_rooted_topology(taxa, rng)));
  auto support = std::make_shared<SubsplitSupport>(
      build_support(candidate_trees_from_newicks(newicks, true)));
  CoalescentConfig coal;  // constant
  TimeTreeModel model(support, /*psp=*/false, coal, SamplingTimes::zeros(n));
  model.rate_fixed = true;
  model.fixed_rate = 0.1;

  // mean K-sample bound of the untrained model, for comparison after training
  const auto bound_of = [&](const TimeTreeModel& m, uint64_t seed) {
    Rng erng(seed);
    return evidence_estimate(m, patterns, jc, /*k=*/20, /*repeats=*/20, erng).mean;
  };
  const double before = bound_of(model, 71);

  TrainConfig config;
  config.k = 5;
  config.iters = 800;
  config.anneal_period = 300;
  config.seed = 37;
  config.trace_stride = 10;
  const auto result = train_timetree(model, patterns, jc, config);
  REQUIRE(result.iters_run == 800);
  const double after = bound_of(model, 71);
  CHECK(after > before);
  // skyride variant smoke test
  CoalescentConfig sky;
  sky.kind = CoalescentKind::kSkyride;
  TimeTreeModel sky_model(support, true, sky, SamplingTimes::zeros(n));
  sky_model.rate_fixed = true;
  sky_model.fixed_rate = 0.1;
  config.iters = 60;
  const auto sky_result = train_timetree(sky_model, patterns, jc, config);
  CHECK(sky_result.iters_run == 60);
}

TEST_CASE("trained SBN recovers the exact topology posterior") {
  // the 4-taxon posterior over all three topologies is exactly computable:
  // under q = -1.5 ln w the JC likelihood is polynomial in w and the Exp(10)
  // prior measure is 15 w^14 dw, so tensor Gauss-Legendre is exact
  const auto taxa = default_taxa(4);
  const Jc69Model jc;
  const auto patterns = compress_patterns(parse_fasta(">A\nAAC\n>B\nACA\n>C\nGAC\n>D\nGCA\n"));
  const std::vector<std::string> newicks{"((A,B),C,D);", "((A,C),B,D);", "((A,D),B,C);"};

  const auto exact_marginal = [&](const UnrootedTopology& tree) {
    const testing::GaussLegendre gl(12);
    const int d = tree.n_edges();
    std::vector<int> idx(d, 0);
    std::vector<double> q(d);
    double total = 0.0;
    while (true) {
      double weight = 1.0;
      for (int e = 0; e < d; ++e) {
        const double w = gl.nodes[idx[e]];
        q[e] = -1.5 * std::log(w);
        weight *= gl.weights[idx[e]] * 15.0 * std::pow(w, 14.0);
      }
      total += weight * std::exp(log_likelihood(tree, q, patterns, jc));
      int e = 0;
      while (e < d && ++idx[e] == 12) idx[e++] = 0;
      if (e == d) break;
    }
    return total;
  };
  std::vector<double> posterior(3);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    posterior[i] = exact_marginal(parse_unrooted_newick(newicks[i], &taxa));
    total += posterior[i];
  }
  for (auto& p : posterior) p /= total;

  auto support = std::make_shared<SubsplitSupport>(
      build_support(candidate_trees_from_newicks(newicks, false)));
  UnrootedModel model(support, /*psp=*/true);
  TrainConfig config;
  config.k = 8;
  config.psp = true;
  config.iters = 10000;
  config.anneal_period = 1000;
  config.seed = 77;
  train_unrooted(model, patterns, jc, config);

  double kl = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double q = model.sbn.unrooted_prob(parse_unrooted_newick(newicks[i], &taxa)).prob;
    CHECK(std::abs(q - posterior[i]) < 0.03);
    kl += posterior[i] * std::log(posterior[i] / q);
  }
  CHECK(kl < 0.02);
}

TEST_CASE("trace format and stream output") {
  TinyUnrooted tiny(4, 20, 41, 1, false);
  TrainConfig config;
  config.k = 2;
  config.iters = 5;
  config.anneal_period = 100000;
  config.trace_stride = 2;
  std::ostringstream trace;
  train_unrooted(*tiny.model, tiny.patterns, tiny.jc, config, &trace);
  const auto text = trace.str();
  CHECK(text.rfind("iter,beta,lower_bound,elapsed_s\n", 0) == 0);
  CHECK(text.find("\n0,0.001,") != std::string::npos);
}

TEST_CASE("checkpoint json round trip") {
  TinyUnrooted tiny(5, 30, 43, 2, true);
  TrainConfig config;
  config.k = 3;
  config.iters = 30;
  config.anneal_period = 100;
  config.seed = 47;
  train_unrooted(*tiny.model, tiny.patterns, tiny.jc, config);

  const auto text = checkpoint_to_json(*tiny.model, true, R"({"k":3})", "12345");
  const auto ckpt = checkpoint_from_json(text);
  REQUIRE(ckpt.kind == "unrooted");
  REQUIRE(ckpt.unrooted.has_value());
  CHECK(ckpt.psp);
  CHECK(ckpt.unrooted->sbn.params() == tiny.model->sbn.params());
  CHECK(ckpt.unrooted->branch.mu_split == tiny.model->branch.mu_split);
  CHECK(ckpt.unrooted->branch.log_sigma_psp == tiny.model->branch.log_sigma_psp);
  // the restored model scores trees identically
  Rng rng(49);
  for (int i = 0; i < 5; ++i) {
    const auto tree = tiny.model->sbn.sample_unrooted(rng);
    CHECK(ckpt.unrooted->sbn.unrooted_prob(tree).prob ==
          doctest::Approx(tiny.model->sbn.unrooted_prob(tree).prob).epsilon(1e-15));
  }

  // timetree round trip
  auto support = tiny.support;
  CoalescentConfig sky;
  sky.kind = CoalescentKind::kSkyride;
  sky.skyride_delta.assign(3, 1.0);
  TimeTreeModel tt(support, false, sky, SamplingTimes::zeros(5));
  const auto tt_text = checkpoint_to_json(tt, false, "{}", "0");
  const auto tt_ckpt = checkpoint_from_json(tt_text);
  REQUIRE(tt_ckpt.kind == "timetree");
  REQUIRE(tt_ckpt.timetree.has_value());
  CHECK(tt_ckpt.timetree->coalescent.kind == CoalescentKind::kSkyride);
  CHECK(tt_ckpt.timetree->gamma_mu == tt.gamma_mu);
}

TEST_CASE("divergence guard raises a diagnostic") {
  TinyUnrooted tiny(4, 10, 53, 1, false);
  // poison the branch parameters so lengths overflow
  for (auto& v : tiny.model->branch.mu_split) v = 1e8;
  TrainConfig config;
  config.k = 2;
  config.iters = 3;
  CHECK_THROWS_AS(train_unrooted(*tiny.model, tiny.patterns, tiny.jc, config),
                  std::runtime_error);
}
