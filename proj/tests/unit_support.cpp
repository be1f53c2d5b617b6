#include <doctest.h>

#include <fstream>
#include <set>

#include "test_util.hpp"
#include "vbphylo/support_build.hpp"

using namespace vbphylo;

TEST_CASE("support from one unrooted tree lists every edge split as a root subsplit") {
  const auto trees = candidate_trees_from_newicks({"((A,B),(C,D));"}, /*rooted=*/false);
  const auto support = build_support(trees);
  CHECK(support.n_root_subsplits() == 5);  // 4 pendant + 1 internal
  std::set<std::string> got;
  for (const auto& s : support.root_subsplits()) got.insert(s.to_string());
  CHECK(got.count("1100|0011") == 1);
  CHECK(got.count("1000|0111") == 1);
}

TEST_CASE("support built from a single rooted tree makes it certain at zero phi") {
  const auto trees = candidate_trees_from_newicks({"((A,(B,C)),D);"}, /*rooted=*/true);
  const auto support = build_support(trees);
  const SbnModel model(&support);
  CHECK(model.rooted_prob(parse_rooted_newick("((A,(B,C)),D);", &support.taxa())) ==
        doctest::Approx(1.0));
  // clades of all internal nodes are collected for time-tree keys
  CHECK(support.clade_index(Clade::from_string("0110")) >= 0);  // {B,C}
  CHECK(support.clade_index(Clade::from_string("1110")) >= 0);  // {A,B,C}
  CHECK(support.clade_index(Clade::from_string("1111")) >= 0);  // root clade
}

TEST_CASE("support union property and input order invariance") {
  const std::vector<std::string> newicks{"((A,B),(C,D));", "((A,C),(B,D));",
                                         "(((A,B),C),D);"};
  const auto support_all = build_support(candidate_trees_from_newicks(newicks, false));

  // union of separately built supports has the same elements
  std::set<std::string> from_parts;
  for (const auto& nw : newicks) {
    const auto part = build_support(candidate_trees_from_newicks({nw}, false));
    for (const auto& s : part.root_subsplits()) from_parts.insert("r:" + s.to_string());
    for (const auto& set : part.child_sets()) {
      for (const auto& c : set.children) {
        from_parts.insert("p:" + Pcsp{set.parent, c}.to_string());
      }
    }
  }
  std::set<std::string> from_all;
  for (const auto& s : support_all.root_subsplits()) from_all.insert("r:" + s.to_string());
  for (const auto& set : support_all.child_sets()) {
    for (const auto& c : set.children) from_all.insert("p:" + Pcsp{set.parent, c}.to_string());
  }
  CHECK(from_parts == from_all);

  // reversal of input order yields the identical finalized support
  auto reversed = newicks;
  std::reverse(reversed.begin(), reversed.end());
  const auto support_rev = build_support(candidate_trees_from_newicks(reversed, false));
  REQUIRE(support_rev.n_root_subsplits() == support_all.n_root_subsplits());
  for (int i = 0; i < support_all.n_root_subsplits(); ++i) {
    CHECK(support_rev.root_subsplits()[i] == support_all.root_subsplits()[i]);
  }
  REQUIRE(support_rev.n_child_sets() == support_all.n_child_sets());
  for (int i = 0; i < support_all.n_child_sets(); ++i) {
    CHECK(support_rev.child_sets()[i].parent == support_all.child_sets()[i].parent);
    CHECK(support_rev.child_sets()[i].children == support_all.child_sets()[i].children);
  }
}

TEST_CASE("every support tree keeps positive probability at any finite phi") {
  Rng rng(107);
  const auto taxa = default_taxa(6);
  std::vector<std::string> newicks;
  std::vector<UnrootedTopology> trees;
  for (int i = 0; i < 8; ++i) {
    trees.push_back(random_unrooted_topology(taxa, rng));
    newicks.push_back(write_newick(trees.back()));
  }
  const auto support = build_support(candidate_trees_from_newicks(newicks, false));
  SbnModel model(&support);
  model.set_params(testing::random_phi(support, rng));
  for (const auto& tree : trees) {
    CHECK(model.unrooted_prob(tree).prob > 0.0);
    // and every single rooting is in support (the sweep collected them)
    for (double p : model.unrooted_prob(tree).edge_probs) CHECK(p > 0.0);
  }
}

TEST_CASE("mixed taxon sets are rejected") {
  CHECK_THROWS(candidate_trees_from_newicks({"((A,B),(C,D));", "((A,B),(C,E));"}, false));
}

TEST_CASE("trees files: one newick per line with comments and first-k") {
  const std::string path = "/tmp/vbphylo_test.trees";
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "((A,B),(C,D)); # trailing comment\n";
    out << "\n";
    out << "((A,C),(B,D));\n";
    out << "((A,D),(B,C));\n";
  }
  const auto all = read_candidate_trees({path}, false);
  CHECK(all.size() == 3);
  const auto first = read_candidate_trees({path}, false, 2);
  CHECK(first.size() == 2);
}

TEST_CASE("coverage report") {
  const auto ref = reference_from_pairs(
      {{"((A,B),(C,D));", 0.7}, {"((A,C),(B,D));", 0.2}, {"((A,D),(B,C));", 0.1}}, false);

  SUBCASE("full coverage of the reference") {
    const auto support = build_support(candidate_trees_from_newicks(
        {"((A,B),(C,D));", "((A,C),(B,D));", "((A,D),(B,C));"}, false));
    const auto report = coverage_report(support, ref, support);
    CHECK(report.covered_posterior == doctest::Approx(1.0));
    CHECK(report.root_coverage == doctest::Approx(1.0));
    CHECK(report.pcsp_coverage == doctest::Approx(1.0));
    CHECK(report.root_efficiency == doctest::Approx(1.0));
    CHECK(report.pcsp_efficiency == doctest::Approx(1.0));
  }
  SUBCASE("partial estimate against a wider truth") {
    const auto estimated = build_support(candidate_trees_from_newicks({"((A,B),(C,D));"}, false));
    const auto truth = build_support(candidate_trees_from_newicks(
        {"((A,B),(C,D));", "((A,C),(B,D));"}, false));
    const auto report = coverage_report(estimated, ref, truth);
    CHECK(report.covered_posterior == doctest::Approx(0.7));
    CHECK(report.root_coverage < 1.0);
    CHECK(report.root_efficiency == doctest::Approx(1.0));  // everything estimated is true
  }
}

TEST_CASE("reference distributions validate their probabilities") {
  CHECK_THROWS(reference_from_pairs({{"((A,B),(C,D));", 0.9}, {"((A,C),(B,D));", 0.2}}, false));
  CHECK_THROWS(reference_from_pairs({{"((A,B),(C,D));", 0.0}}, false));
}
