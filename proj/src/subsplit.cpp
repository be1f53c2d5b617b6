#include "vbphylo/subsplit.hpp"

#include <stdexcept>

namespace vbphylo {

Subsplit Subsplit::normalized(const Clade& a, const Clade& b) {
  if (!a.disjoint_with(b)) throw std::invalid_argument("subsplit sides must be disjoint");
  if (a.none() && b.none()) throw std::invalid_argument("subsplit of an empty clade");
  return a > b ? Subsplit(a, b) : Subsplit(b, a);
}

Subsplit Subsplit::fake(const Clade& singleton) {
  if (singleton.count() != 1) throw std::invalid_argument("fake subsplit needs a singleton clade");
  return Subsplit(singleton, Clade(singleton.size()));
}

Subsplit Subsplit::from_string(const std::string& encoded) {
  const auto bar = encoded.find('|');
  if (bar == std::string::npos) throw std::invalid_argument("subsplit string missing '|'");
  Clade y = Clade::from_string(encoded.substr(0, bar));
  Clade z = Clade::from_string(encoded.substr(bar + 1));
  if (y.size() != z.size()) throw std::invalid_argument("subsplit sides of unequal width");
  if (z.none()) {
    if (y.count() != 1) throw std::invalid_argument("fake subsplit side must be a singleton");
    return Subsplit(y, z);
  }
  Subsplit s = normalized(y, z);
  if (s.y() != y) throw std::invalid_argument("subsplit string not normalized: " + encoded);
  return s;
}

int Subsplit::side_of(const Clade& c) const {
  if (c == y_) return 0;
  if (c == z_) return 1;
  throw std::invalid_argument("clade is not a side of this subsplit");
}

}  // namespace vbphylo
