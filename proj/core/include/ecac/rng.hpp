#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "ecac/array.hpp"

namespace ecac {

// Seed derivation: one root seed fans out into named substreams,
//   seed(root, name) = splitmix64(root ^ fnv1a64(name)),
// and indexed children seed(root, name, i) = splitmix64(seed(root, name) + i).
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);
std::uint64_t derive_seed(std::uint64_t root, std::string_view name, std::uint64_t index);

// Seeded generator whose full state (engine and cached normal deviate)
// round-trips through a string.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)

  Array normal_array(Shape shape);

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.serialize() == b.serialize(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ecac
