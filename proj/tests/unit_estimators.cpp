#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "vbphylo/estimators.hpp"
#include "vbphylo/numeric.hpp"

using namespace vbphylo;

namespace {

// 5-D tensor-grid quadrature of the per-tree marginal integral p(Y|tau) =
// int p(Y|tau,q) p(q) dq with p(q) iid Exp(rate). Substituting q = -1.5 ln w
// per axis turns the JC likelihood into a polynomial in w (its transition
// entries are affine in e^{-4q/3} = w^2) and the Exp(10) prior measure into
// 15 w^14 dw, so Gauss-Legendre integrates the product exactly.
double grid_marginal(const UnrootedTopology& tree, const PatternTable& patterns,
                     const SubstModel& subst, double rate, int points_per_dim) {
  const testing::GaussLegendre gl(points_per_dim);
  const int d = tree.n_edges();
  std::vector<int> idx(d, 0);
  std::vector<double> q(d, 0.0);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (int e = 0; e < d; ++e) {
      const double w = gl.nodes[idx[e]];
      q[e] = -1.5 * std::log(w);
      weight *= gl.weights[idx[e]] * rate * 1.5 * std::pow(w, 1.5 * rate - 1.0);
    }
    total += weight * std::exp(log_likelihood(tree, q, patterns, subst));
    int e = 0;
    while (e < d && ++idx[e] == points_per_dim) idx[e++] = 0;
    if (e == d) break;
  }
  return total;
}

}  // namespace

TEST_CASE("tree marginal likelihood agrees with grid quadrature") {
  const auto taxa = default_taxa(4);
  const auto tree = parse_unrooted_newick("((A,B),C,D);", &taxa);
  const Jc69Model jc;
  const auto alignment = parse_fasta(">A\nAG\n>B\nCT\n>C\nGA\n>D\nTC\n");
  const auto patterns = compress_patterns(alignment);

  auto support = std::make_shared<SubsplitSupport>(taxa);
  add_tree_to_support(*support, tree);
  support->finalize();
  UnrootedModel model(support, /*psp=*/false);
  // fit the importance distribution first: branch-only VI on the fixed tree
  TrainConfig config;
  config.k = 16;
  config.iters = 5000;
  config.anneal_period = 500;
  config.seed = 509;
  const auto result = train_unrooted(model, patterns, jc, config);
  REQUIRE(result.iters_run == config.iters);

  // the exact-substitution quadrature is machine-precision converged
  const double quad = grid_marginal(tree, patterns, jc, model.branch_prior_rate, 16);
  const double coarse = grid_marginal(tree, patterns, jc, model.branch_prior_rate, 12);
  REQUIRE(std::abs(coarse - quad) / quad < 1e-10);

  Rng est_rng(5);
  const auto est = tree_marginal_likelihood(model, tree, patterns, jc, 50000, est_rng);
  // the acceptance suite runs the tight 1% protocol; this is a sanity band
  CHECK(std::abs(std::exp(est.log_estimate) - quad) / quad < 0.05);
  CHECK(est.std_error < 0.05);

  // estimates with m and 2m agree within joint standard errors
  Rng r1(513), r2(515);
  const auto e1 = tree_marginal_likelihood(model, tree, patterns, jc, 20000, r1);
  const auto e2 = tree_marginal_likelihood(model, tree, patterns, jc, 40000, r2);
  CHECK(std::abs(e1.log_estimate - e2.log_estimate) <
        3.0 * std::sqrt(e1.std_error * e1.std_error + e2.std_error * e2.std_error));
}

TEST_CASE("uncovered trees are rejected by the per-tree estimator") {
  Rng rng(521);
  const auto taxa = default_taxa(5);
  const auto in_tree = random_unrooted_topology(taxa, rng);
  auto support = std::make_shared<SubsplitSupport>(taxa);
  add_tree_to_support(*support, in_tree);
  support->finalize();
  UnrootedModel model(support, false);
  const Jc69Model jc;
  const auto patterns = compress_patterns(parse_fasta(">A\nA\n>B\nC\n>C\nG\n>D\nT\n>E\nA\n"));
  UnrootedTopology out_tree;
  while (true) {
    out_tree = random_unrooted_topology(taxa, rng);
    const EdgeCladeTable table(out_tree);
    bool covered = true;
    for (int e = 0; e < out_tree.n_edges(); ++e) {
      if (support->root_index(table.edge_split(e)) < 0) covered = false;
    }
    if (!covered) break;
  }
  Rng est_rng(523);
  CHECK_THROWS(tree_marginal_likelihood(model, out_tree, patterns, jc, 10, est_rng));
}

TEST_CASE("evidence on a degenerate support matches the per-tree marginal") {
  Rng rng(541);
  const auto taxa = default_taxa(4);
  const auto tree = parse_unrooted_newick("((A,B),C,D);", &taxa);
  const Jc69Model jc;
  const auto patterns = compress_patterns(parse_fasta(">A\nAC\n>B\nAG\n>C\nGC\n>D\nGT\n"));
  auto support = std::make_shared<SubsplitSupport>(taxa);
  add_tree_to_support(*support, tree);
  support->finalize();
  UnrootedModel model(support, false);

  Rng r1(547);
  const auto per_tree = tree_marginal_likelihood(model, tree, patterns, jc, 200000, r1);
  Rng r2(557);
  const auto ev = evidence_estimate(model, patterns, jc, /*k=*/1000, /*repeats=*/50, r2);
  // evidence = marginal of the single tree + log p(tau): uniform over 3 topologies
  const double expected = per_tree.log_estimate - log_double_factorial_unrooted(4);
  CHECK(std::abs(ev.mean - expected) < 3.0 * (ev.std_dev / std::sqrt(50.0) + per_tree.std_error)
                                           + 0.05);
}

TEST_CASE("evidence mean is nondecreasing in K") {
  Rng rng(563);
  const auto taxa = default_taxa(5);
  std::vector<std::string> newicks;
  for (int i = 0; i < 4; ++i) {
    newicks.push_back(write_newick(random_unrooted_topology(taxa, rng)));
  }
  auto support = std::make_shared<SubsplitSupport>(
      build_support(candidate_trees_from_newicks(newicks, false)));
  UnrootedModel model(support, false);
  const Jc69Model jc;
  Rng srng(569);
  const auto sim_tree = random_unrooted_topology(taxa, srng);
  std::vector<double> lengths(sim_tree.n_edges());
  for (auto& l : lengths) l = srng.exponential(10.0);
  const auto patterns = compress_patterns(simulate_alignment(sim_tree, lengths, jc, 50, srng));

  std::vector<double> means;
  for (int k : {1, 10, 100}) {
    Rng erng(571);
    means.push_back(evidence_estimate(model, patterns, jc, k, 400, erng).mean);
  }
  CHECK(means[0] <= means[1] + 0.5);
  CHECK(means[1] <= means[2] + 0.5);
  CHECK(means[0] < means[2]);  // strictly tighter across two decades
}

TEST_CASE("topology KL against references") {
  const auto taxa = default_taxa(4);
  const auto support = testing::full_unrooted_support(taxa);
  SbnModel model(&support);

  SUBCASE("matching reference has zero divergence") {
    const auto ref = reference_from_pairs({{"((A,B),C,D);", 1.0 / 3},
                                           {"((A,C),B,D);", 1.0 / 3},
                                           {"((A,D),B,C);", 1.0 / 3}},
                                          false);
    const auto res = kl_topology(model, ref);
    CHECK(res.uncovered.empty());
    CHECK(res.kl == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("point mass on one tree gives -log q") {
    const auto ref = reference_from_pairs({{"((A,B),C,D);", 1.0}}, false);
    const auto res = kl_topology(model, ref);
    CHECK(res.kl == doctest::Approx(-std::log(1.0 / 3.0)).epsilon(1e-12));
  }
  SUBCASE("uncovered reference trees give +infinity with the offenders listed") {
    const auto one_tree = candidate_trees_from_newicks({"((A,B),C,D);"}, false);
    const auto small = build_support(one_tree);
    SbnModel small_model(&small);
    const auto ref = reference_from_pairs({{"((A,B),C,D);", 0.5}, {"((A,C),B,D);", 0.5}}, false);
    const auto res = kl_topology(small_model, ref);
    CHECK(std::isinf(res.kl));
    REQUIRE(res.uncovered.size() == 1);
  }
  SUBCASE("direct summation cross-check on five taxa") {
    Rng rng(577);
    const auto taxa5 = default_taxa(5);
    const auto support5 = testing::full_unrooted_support(taxa5);
    SbnModel model5(&support5);
    model5.set_params(testing::random_phi(support5, rng, 1.0));
    // reference = a second random SBN restricted to all 15 trees
    SbnModel ref_model(&support5);
    ref_model.set_params(testing::random_phi(support5, rng, 1.0));
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& tree : enumerate_unrooted_topologies(taxa5)) {
      rows.emplace_back(write_newick(tree), ref_model.unrooted_prob(tree).prob);
    }
    const auto ref = reference_from_pairs(rows, false);
    const auto res = kl_topology(model5, ref);
    double direct = 0.0;
    for (const auto& tree : enumerate_unrooted_topologies(taxa5)) {
      const double p = ref_model.unrooted_prob(tree).prob;
      const double q = model5.unrooted_prob(tree).prob;
      direct += p * std::log(p / q);
    }
    CHECK(res.kl == doctest::Approx(direct).epsilon(1e-9));
    CHECK(res.kl > 0.0);
  }
}

TEST_CASE("log-sum-exp aggregation survives extreme log ratios") {
  const std::vector<double> huge{700.0, 699.0, 698.5};
  CHECK(std::isfinite(multi_sample_elbo(huge)));
  CHECK(multi_sample_elbo(huge) == doctest::Approx(700.0).epsilon(1e-3));
  const std::vector<double> tiny{-700.0, -699.0};
  CHECK(std::isfinite(multi_sample_elbo(tiny)));
  const auto w = normalized_importance_weights(std::vector<double>{-700.0, 700.0});
  CHECK(w[1] == doctest::Approx(1.0));
  CHECK(std::isfinite(w[0]));
  const std::vector<double> mixed{-700.0, 650.0, 700.0};
  const auto wm = normalized_importance_weights(mixed);
  CHECK(wm[0] + wm[1] + wm[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("estimator invariance to pattern compression") {
  Rng rng(587);
  const auto taxa = default_taxa(4);
  const auto tree = parse_unrooted_newick("((A,B),C,D);", &taxa);
  const Jc69Model jc;
  std::vector<double> lengths(tree.n_edges(), 0.1);
  Rng srng(593);
  const auto alignment = simulate_alignment(tree, lengths, jc, 60, srng);
  auto support = std::make_shared<SubsplitSupport>(taxa);
  add_tree_to_support(*support, tree);
  support->finalize();
  UnrootedModel model(support, false);
  Rng r1(599), r2(599);  // same stream: identical branch draws
  const auto compressed = tree_marginal_likelihood(model, tree, compress_patterns(alignment),
                                                   jc, 2000, r1);
  const auto raw = tree_marginal_likelihood(model, tree, site_patterns_uncompressed(alignment),
                                            jc, 2000, r2);
  CHECK(compressed.log_estimate == doctest::Approx(raw.log_estimate).epsilon(1e-10));
}
