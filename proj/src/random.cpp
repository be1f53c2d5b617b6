#include "vbphylo/random.hpp"

#include <sstream>
#include <stdexcept>

namespace vbphylo {

namespace {
uint64_t fnv1a(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace

Rng Rng::substream(uint64_t seed, std::string_view name) {
  // splitmix-style mix of the seed with the stream name hash
  uint64_t z = seed + 0x9e3779b97f4a7c15ull + fnv1a(name);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return Rng(z ^ (z >> 31));
}

size_t Rng::discrete(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::runtime_error("discrete draw from all-zero weights");
  double u = uniform() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return weights.size() - 1;  // top up rounding residue
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw std::runtime_error("bad RNG state string");
}

}  // namespace vbphylo
