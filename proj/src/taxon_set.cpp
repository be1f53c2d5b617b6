#include "vbphylo/taxon_set.hpp"

#include <algorithm>
#include <stdexcept>

namespace vbphylo {

TaxonSet::TaxonSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw std::invalid_argument("empty taxon label");
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate taxon label: " + names_[i]);
    }
  }
}

int TaxonSet::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw std::invalid_argument("unknown taxon label: " + label);
  return it->second;
}

Clade TaxonSet::singleton(int i) const {
  Clade c(size());
  c.set(i);
  return c;
}

Clade TaxonSet::full_clade() const {
  Clade c(size());
  for (int i = 0; i < size(); ++i) c.set(i);
  return c;
}

}  // namespace vbphylo
