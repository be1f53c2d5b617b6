#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace vbphylo {

// Fixed-width bit vector over taxon indices. Bit i lives at word i/64,
// MSB-first within each word, so comparing words numerically in order is the
// same as comparing the bit strings lexicographically ("1100" > "0011"); that
// comparison is the total order on clades used everywhere.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(int n_bits) : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

  // Parse from a string of '0'/'1' characters.
  static Bitset from_string(const std::string& bits);

  int size() const { return n_bits_; }

  bool test(int i) const { return (words_[i >> 6] >> shift(i)) & 1ull; }
  void set(int i) { words_[i >> 6] |= (1ull << shift(i)); }
  void reset(int i) { words_[i >> 6] &= ~(1ull << shift(i)); }

  int count() const;
  bool any() const;
  bool none() const { return !any(); }

  // Lowest set taxon index; -1 when empty.
  int first_set() const;

  bool disjoint_with(const Bitset& o) const;
  bool subset_of(const Bitset& o) const;

  Bitset operator|(const Bitset& o) const;
  Bitset operator&(const Bitset& o) const;
  Bitset& operator|=(const Bitset& o);
  // Complement within the fixed width.
  Bitset complement() const;

  bool operator==(const Bitset& o) const { return n_bits_ == o.n_bits_ && words_ == o.words_; }
  bool operator!=(const Bitset& o) const { return !(*this == o); }
  // Big-endian bit string comparison; requires equal widths.
  bool operator<(const Bitset& o) const { return words_ < o.words_; }
  bool operator>(const Bitset& o) const { return o.words_ < words_; }

  std::string to_string() const;
  size_t hash() const;

  const std::vector<uint64_t>& words() const { return words_; }

 private:
  static int shift(int i) { return 63 - (i & 63); }

  int n_bits_ = 0;
  std::vector<uint64_t> words_;
};

struct BitsetHash {
  size_t operator()(const Bitset& b) const { return b.hash(); }
};

using Clade = Bitset;

}  // namespace vbphylo
