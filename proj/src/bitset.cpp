#include "vbphylo/bitset.hpp"

#include <bit>
#include <stdexcept>

namespace vbphylo {

Bitset Bitset::from_string(const std::string& bits) {
  Bitset b(static_cast<int>(bits.size()));
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      b.set(static_cast<int>(i));
    } else if (bits[i] != '0') {
      throw std::invalid_argument("bad bit string: " + bits);
    }
  }
  return b;
}

int Bitset::count() const {
  int c = 0;
  for (uint64_t w : words_) c += std::popcount(w);
  return c;
}

bool Bitset::any() const {
  for (uint64_t w : words_) {
    if (w != 0) return true;
  }
  return false;
}

int Bitset::first_set() const {
  for (size_t wi = 0; wi < words_.size(); ++wi) {
    if (words_[wi] != 0) {
      return static_cast<int>(wi) * 64 + std::countl_zero(words_[wi]);
    }
  }
  return -1;
}

bool Bitset::disjoint_with(const Bitset& o) const {
  for (size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & o.words_[i]) return false;
  }
  return true;
}

bool Bitset::subset_of(const Bitset& o) const {
  for (size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~o.words_[i]) return false;
  }
  return true;
}

Bitset Bitset::operator|(const Bitset& o) const {
  Bitset r(n_bits_);
  for (size_t i = 0; i < words_.size(); ++i) r.words_[i] = words_[i] | o.words_[i];
  return r;
}

Bitset Bitset::operator&(const Bitset& o) const {
  Bitset r(n_bits_);
  for (size_t i = 0; i < words_.size(); ++i) r.words_[i] = words_[i] & o.words_[i];
  return r;
}

Bitset& Bitset::operator|=(const Bitset& o) {
  for (size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
  return *this;
}

Bitset Bitset::complement() const {
  Bitset r(n_bits_);
  for (size_t i = 0; i < words_.size(); ++i) r.words_[i] = ~words_[i];
  // mask tail bits past n_bits_
  const int tail = n_bits_ & 63;
  if (tail != 0) r.words_.back() &= ~0ull << (64 - tail);
  return r;
}

std::string Bitset::to_string() const {
  std::string s(n_bits_, '0');
  for (int i = 0; i < n_bits_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

size_t Bitset::hash() const {
  uint64_t h = 14695981039346656037ull;
  for (uint64_t w : words_) {
    h ^= w;
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h);
}

}  // namespace vbphylo
