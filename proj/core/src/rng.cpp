#include "ecac/rng.hpp"

#include <sstream>

#include "ecac/errors.hpp"

namespace ecac {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view name) { return splitmix64(root ^ fnv1a64(name)); }

std::uint64_t derive_seed(std::uint64_t root, std::string_view name, std::uint64_t index) {
  return splitmix64(derive_seed(root, name) + index);
}

double Rng::uniform() { return std::generate_canonical<double, 64>(engine_); }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() { return normal_(engine_); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("Rng::below(0)");
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

Array Rng::normal_array(Shape shape) {
  Array out = Array::zeros(std::move(shape));
  for (auto& v : out.mutable_values()) v = normal();
  return out;
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << '|' << normal_;
  return out.str();
}

Rng Rng::deserialize(const std::string& state) {
  const auto bar = state.find('|');
  if (bar == std::string::npos) throw IoError("malformed generator state");
  Rng rng;
  std::istringstream engine_in(state.substr(0, bar));
  engine_in >> rng.engine_;
  std::istringstream normal_in(state.substr(bar + 1));
  normal_in >> rng.normal_;
  if (engine_in.fail() || normal_in.fail()) throw IoError("malformed generator state");
  return rng;
}

}  // namespace ecac
