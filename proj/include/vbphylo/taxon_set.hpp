#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vbphylo/bitset.hpp"

namespace vbphylo {

// Ordered set of taxon labels. Ordering is lexicographic and fixed for the
// lifetime of a model; every clade bit encoding depends on it.
class TaxonSet {
 public:
  TaxonSet() = default;
  // Sorts and validates; throws on duplicates or empty/illegal labels.
  explicit TaxonSet(std::vector<std::string> names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int i) const { return names_[i]; }

  bool contains(const std::string& label) const { return index_.count(label) > 0; }
  int index_of(const std::string& label) const;

  Clade singleton(int i) const;
  Clade full_clade() const;

  bool operator==(const TaxonSet& o) const { return names_ == o.names_; }
  bool operator!=(const TaxonSet& o) const { return !(*this == o); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace vbphylo
