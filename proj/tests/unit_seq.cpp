#include <doctest.h>

#include "test_util.hpp"
#include "vbphylo/alignment.hpp"
#include "vbphylo/substitution.hpp"

using namespace vbphylo;

TEST_CASE("fasta parsing basics") {
  const auto a = parse_fasta(">A\nACGT\n>B\nACGA\n");
  CHECK(a.taxa.size() == 2);
  CHECK(a.n_sites() == 4);
  CHECK(a.rows[a.taxa.index_of("A")] == "ACGT");

  // wrapped lines concatenate; order in file does not matter
  const auto b = parse_fasta(">Z\nAC\nGT\n>A\nTTTT\n");
  CHECK(b.taxa.name(0) == "A");
  CHECK(b.rows[b.taxa.index_of("Z")] == "ACGT");

  CHECK_THROWS(parse_fasta(">A\nACG\n>B\nAC\n"));     // unequal lengths
  CHECK_THROWS(parse_fasta(""));                      // empty
  CHECK_THROWS(parse_fasta(">A\nAC\n>A\nGT\n"));      // duplicate header
  CHECK_THROWS(parse_fasta(">A\nAXGT\n>B\nACGT\n"));  // illegal character
  CHECK_THROWS(parse_fasta("ACGT\n"));                // sequence before header
}

TEST_CASE("ambiguity codes map to indicator unions") {
  CHECK(state_mask('a') == state_mask('A'));
  CHECK(state_mask('R') == (state_mask('A') | state_mask('G')));
  CHECK(state_mask('N') == 0b1111);
  CHECK(state_mask('-') == 0b1111);
  const auto ind = mask_indicators(state_mask('Y'));
  CHECK(ind[1] == 1.0);  // C
  CHECK(ind[3] == 1.0);  // T
  CHECK(ind[0] == 0.0);
}

TEST_CASE("pattern compression counts unique columns") {
  const auto a = parse_fasta(">A\nAAA\n>B\nAAC\n");
  const auto table = compress_patterns(a);
  CHECK(table.n_patterns() == 2);
  CHECK(table.weights[0] == 2.0);
  CHECK(table.weights[1] == 1.0);
  CHECK(table.total_sites() == 3.0);

  const auto distinct = parse_fasta(">A\nACGT\n>B\nCAGT\n");
  CHECK(compress_patterns(distinct).n_patterns() == 4);
}

TEST_CASE("compressed likelihood equals the raw-site likelihood") {
  Rng rng(21);
  const auto taxa = default_taxa(5);
  const Jc69Model jc;
  for (int rep = 0; rep < 5; ++rep) {
    const auto tree = random_rooted_topology(taxa, rng);
    const auto lengths = testing::random_rooted_lengths(tree, rng);
    auto alignment = simulate_alignment(tree, lengths, jc, 200, rng);
    // sprinkle ambiguity codes in
    alignment.rows[0][3] = 'N';
    alignment.rows[2][7] = '-';
    alignment.rows[1][11] = 'R';
    const double compressed = log_likelihood(tree, lengths, compress_patterns(alignment), jc);
    const double raw = log_likelihood(tree, lengths, site_patterns_uncompressed(alignment), jc);
    CHECK(compressed == doctest::Approx(raw).epsilon(1e-12));
  }
}
