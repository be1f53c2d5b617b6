#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vbphylo/taxon_set.hpp"

namespace vbphylo {

// DNA alignment with IUPAC ambiguity codes. Rows are stored in taxon order.
struct Alignment {
  TaxonSet taxa;
  std::vector<std::string> rows;

  int n_sites() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
};

// Site-pattern table: unique columns with multiplicities. Each column is one
// 4-bit state mask per taxon (bit order A,C,G,T); ambiguity codes map to the
// union of their states and gaps are fully ambiguous.
struct PatternTable {
  int n_taxa = 0;
  std::vector<uint8_t> masks;     // n_patterns * n_taxa, row-major by pattern
  std::vector<double> weights;    // per-pattern site counts

  int n_patterns() const { return static_cast<int>(weights.size()); }
  uint8_t mask(int pattern, int taxon) const { return masks[pattern * n_taxa + taxon]; }
  double total_sites() const;
};

// Case-insensitive map from a nucleotide/ambiguity character to a state mask;
// throws on characters outside the supported alphabet.
uint8_t state_mask(char c);
// Indicator 4-vector for a mask.
std::array<double, 4> mask_indicators(uint8_t mask);

// Headers start with '>'; sequence lines may wrap. Taxa end up in
// lexicographic order regardless of file order.
Alignment parse_fasta(std::string_view text);
Alignment read_fasta_file(const std::string& path);
std::string write_fasta(const Alignment& alignment);

PatternTable compress_patterns(const Alignment& alignment);
// One pattern per site, no deduplication; the compression oracle.
PatternTable site_patterns_uncompressed(const Alignment& alignment);

}  // namespace vbphylo
