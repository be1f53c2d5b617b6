#pragma once

#include <string>

#include "vbphylo/bitset.hpp"

namespace vbphylo {

// Ordered bipartition (y, z) of a clade with y > z under the bit-string
// order. The fake subsplit of a singleton clade has z empty.
class Subsplit {
 public:
  Subsplit() = default;

  // Normalizes the pair so the stored y side is the larger bit string.
  static Subsplit normalized(const Clade& a, const Clade& b);
  static Subsplit fake(const Clade& singleton);

  // Parse "yyy|zzz"; throws on malformed input.
  static Subsplit from_string(const std::string& encoded);

  const Clade& y() const { return y_; }
  const Clade& z() const { return z_; }
  Clade clade() const { return y_ | z_; }
  bool is_fake() const { return z_.none(); }

  // 0 = y side, 1 = z side; throws if c matches neither.
  int side_of(const Clade& c) const;
  const Clade& side(int s) const { return s == 0 ? y_ : z_; }

  bool operator==(const Subsplit& o) const { return y_ == o.y_ && z_ == o.z_; }
  bool operator!=(const Subsplit& o) const { return !(*this == o); }
  bool operator<(const Subsplit& o) const {
    return y_ != o.y_ ? y_ < o.y_ : z_ < o.z_;
  }

  std::string to_string() const { return y_.to_string() + "|" + z_.to_string(); }
  size_t hash() const { return y_.hash() * 1000003u ^ z_.hash(); }

 private:
  Subsplit(Clade y, Clade z) : y_(std::move(y)), z_(std::move(z)) {}

  Clade y_;
  Clade z_;
};

struct SubsplitHash {
  size_t operator()(const Subsplit& s) const { return s.hash(); }
};

// Parent-child subsplit pair: the child's union equals exactly one side of
// the parent.
struct Pcsp {
  Subsplit parent;
  Subsplit child;

  // Side of the parent the child bisects.
  int side() const { return parent.side_of(child.clade()); }

  bool operator==(const Pcsp& o) const { return parent == o.parent && child == o.child; }
  bool operator<(const Pcsp& o) const {
    return parent != o.parent ? parent < o.parent : child < o.child;
  }

  std::string to_string() const { return parent.to_string() + "→" + child.to_string(); }
  size_t hash() const { return parent.hash() * 2000003u ^ child.hash(); }
};

struct PcspHash {
  size_t operator()(const Pcsp& p) const { return p.hash(); }
};

}  // namespace vbphylo
