#include "vbphylo/support_build.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vbphylo {

namespace {

std::vector<std::string> read_newick_lines(const std::string& path, int first_k) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trees file: " + path);
  std::vector<std::string> lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    size_t begin = line.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) continue;
    size_t end = line.find_last_not_of(" \t\r\n");
    lines.push_back(line.substr(begin, end - begin + 1));
    if (first_k > 0 && static_cast<int>(lines.size()) >= first_k) break;
  }
  (void)line_no;
  return lines;
}

void ingest_newicks(CandidateTrees& out, const std::vector<std::string>& newicks,
                    const std::string& origin) {
  for (size_t i = 0; i < newicks.size(); ++i) {
    try {
      const TaxonSet* taxa_filter =
          (out.rooted ? !out.rooted_trees.empty() : !out.unrooted_trees.empty()) ? &out.taxa
                                                                                 : nullptr;
      auto parsed = parse_newick(newicks[i], taxa_filter);
      if (out.rooted && !parsed.rooted) {
        throw std::invalid_argument("expected a rooted tree");
      }
      if (taxa_filter == nullptr) {
        out.taxa = parsed.rooted ? parsed.rooted_tree->taxa : parsed.unrooted_tree->taxa;
      }
      if (out.rooted) {
        out.rooted_trees.push_back(std::move(*parsed.rooted_tree));
      } else if (parsed.rooted) {
        // bootstrap and MCMC samplers write arbitrary rootings; drop them
        out.unrooted_trees.push_back(unroot(*parsed.rooted_tree));
      } else {
        out.unrooted_trees.push_back(std::move(*parsed.unrooted_tree));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

}  // namespace

CandidateTrees read_candidate_trees(const std::vector<std::string>& paths, bool rooted,
                                    int first_k) {
  CandidateTrees out;
  out.rooted = rooted;
  for (const auto& path : paths) {
    ingest_newicks(out, read_newick_lines(path, first_k), path);
  }
  if (out.size() == 0) throw std::runtime_error("no candidate trees found");
  return out;
}

CandidateTrees candidate_trees_from_newicks(const std::vector<std::string>& newicks,
                                            bool rooted) {
  CandidateTrees out;
  out.rooted = rooted;
  ingest_newicks(out, newicks, "<memory>");
  if (out.size() == 0) throw std::runtime_error("no candidate trees given");
  return out;
}

void add_tree_to_support(SubsplitSupport& support, const UnrootedTopology& tree) {
  const EdgeCladeTable table(tree);
  const int n_leaves = tree.n_leaves();
  // Every edge is a possible root.
  for (int e = 0; e < tree.n_edges(); ++e) {
    const Subsplit root_subsplit = table.edge_split(e);
    support.add_root_subsplit(root_subsplit);
    for (const int x : {tree.edges[e].a, tree.edges[e].b}) {
      if (x < n_leaves) continue;
      support.add_pcsp({root_subsplit, table.subsplit_at(x, tree.other_end(e, x))});
    }
  }
  // All regular pair orientations: parent at node i away from one neighbor,
  // children at the two remaining neighbors.
  for (int i = n_leaves; i < tree.n_nodes(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const Subsplit parent = table.subsplit_at(i, tree.neighbors[i][k]);
      for (int jj = 0; jj < 3; ++jj) {
        if (jj == k) continue;
        const int v = tree.neighbors[i][jj];
        if (v < n_leaves) continue;
        support.add_pcsp({parent, table.subsplit_at(v, i)});
      }
    }
  }
}

void add_tree_to_support(SubsplitSupport& support, const RootedTopology& tree) {
  const auto [root_subsplit, pcsps] = tree.subsplit_decomposition();
  support.add_root_subsplit(root_subsplit);
  for (const auto& pcsp : pcsps) support.add_pcsp(pcsp);
  for (int v : tree.postorder_internals()) support.add_clade(tree.clades[v]);
}

SubsplitSupport build_support(const CandidateTrees& trees) {
  SubsplitSupport support(trees.taxa);
  if (trees.rooted) {
    for (const auto& tree : trees.rooted_trees) add_tree_to_support(support, tree);
  } else {
    for (const auto& tree : trees.unrooted_trees) add_tree_to_support(support, tree);
  }
  support.finalize();
  return support;
}

ReferenceDistribution read_reference_csv(const std::string& path, bool rooted) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reference CSV: " + path);
  std::vector<std::pair<std::string, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find_last_of(',');
    if (comma == std::string::npos) throw std::runtime_error("bad reference row: " + line);
    rows.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
  }
  return reference_from_pairs(rows, rooted);
}

ReferenceDistribution reference_from_pairs(
    const std::vector<std::pair<std::string, double>>& rows, bool rooted) {
  ReferenceDistribution ref;
  ref.rooted = rooted;
  double total = 0.0;
  for (const auto& [newick, prob] : rows) {
    if (!(prob > 0.0)) throw std::invalid_argument("reference probabilities must be positive");
    const TaxonSet* taxa_filter = ref.probs.empty() ? nullptr : &ref.taxa;
    if (rooted) {
      ref.rooted_trees.push_back(parse_rooted_newick(newick, taxa_filter));
      if (ref.probs.empty()) ref.taxa = ref.rooted_trees.back().taxa;
    } else {
      auto parsed = parse_newick(newick, taxa_filter);
      ref.unrooted_trees.push_back(parsed.rooted ? unroot(*parsed.rooted_tree)
                                                 : std::move(*parsed.unrooted_tree));
      if (ref.probs.empty()) ref.taxa = ref.unrooted_trees.back().taxa;
    }
    ref.probs.push_back(prob);
    total += prob;
  }
  if (total > 1.0 + 1e-9) throw std::invalid_argument("reference probabilities sum above one");
  return ref;
}

CoverageReport coverage_report(const SubsplitSupport& estimated,
                               const ReferenceDistribution& reference,
                               const SubsplitSupport& truth) {
  CoverageReport report;

  SbnModel model(&estimated);
  for (size_t i = 0; i < reference.probs.size(); ++i) {
    const bool covered = reference.rooted
                             ? model.rooted_prob(reference.rooted_trees[i]) > 0.0
                             : model.unrooted_prob(reference.unrooted_trees[i]).prob > 0.0;
    if (covered) report.covered_posterior += reference.probs[i];
  }

  int root_hits = 0;
  for (const auto& s : truth.root_subsplits()) {
    if (estimated.root_index(s) >= 0) ++root_hits;
  }
  int pcsp_hits_in_truth = 0;
  for (const auto& set : truth.child_sets()) {
    for (const auto& child : set.children) {
      if (estimated.pcsp_location({set.parent, child}).first >= 0) ++pcsp_hits_in_truth;
    }
  }
  int pcsp_hits_in_estimated = 0;
  for (const auto& set : estimated.child_sets()) {
    for (const auto& child : set.children) {
      if (truth.pcsp_location({set.parent, child}).first >= 0) ++pcsp_hits_in_estimated;
    }
  }
  int roots_of_estimated_in_truth = 0;
  for (const auto& s : estimated.root_subsplits()) {
    if (truth.root_index(s) >= 0) ++roots_of_estimated_in_truth;
  }

  const auto ratio = [](int num, int den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / den;
  };
  report.root_coverage = ratio(root_hits, truth.n_root_subsplits());
  report.pcsp_coverage = ratio(pcsp_hits_in_truth, truth.n_pcsps());
  report.root_efficiency = ratio(roots_of_estimated_in_truth, estimated.n_root_subsplits());
  report.pcsp_efficiency = ratio(pcsp_hits_in_estimated, estimated.n_pcsps());
  return report;
}

}  // namespace vbphylo
