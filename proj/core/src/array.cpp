#include "ecac/array.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "ecac/errors.hpp"

namespace ecac {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Array::Array(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("array dimensions must be positive, got " + shape_to_string(shape_));
  }
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("shape " + shape_to_string(shape_) + " needs " + std::to_string(shape_size(shape_)) +
                     " values, got " + std::to_string(values_.size()));
  }
}

Array Array::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Array Array::filled(Shape shape, double value) {
  const auto n = shape_size(shape);
  return Array(std::move(shape), std::vector<double>(n, value));
}

Array Array::scalar(double value) { return Array({}, {value}); }

Array Array::vector(std::vector<double> values) {
  const auto n = values.size();
  return Array({n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Array({rows, cols}, std::move(values));
}

std::size_t Array::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw ShapeError("rows() needs rank 1 or 2, got " + shape_to_string(shape_));
}

std::size_t Array::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw ShapeError("cols() needs rank 1 or 2, got " + shape_to_string(shape_));
}

double Array::item() const {
  if (values_.size() != 1) throw ShapeError("item() on array of shape " + shape_to_string(shape_));
  return values_[0];
}

bool Array::all_finite() const {
  // Non-finite doubles are exactly those with every exponent bit set.
  constexpr std::uint64_t kExponent = 0x7ff0000000000000ULL;
  const double* __restrict p = values_.data();
  const std::size_t n = values_.size();
  std::uint64_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, p + i, sizeof bits);
    bad |= static_cast<std::uint64_t>((bits & kExponent) == kExponent);
  }
  return bad == 0;
}

Array Array::reshaped(Shape shape) const { return Array(std::move(shape), values_); }

Array Array::row(std::size_t r) const {
  const auto c = cols();
  if (r >= rows()) throw ShapeError("row index out of range for " + shape_to_string(shape_));
  return Array::vector(std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(r * c),
                                           values_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)));
}

Array stack_rows(std::span<const Array> rows) {
  if (rows.empty()) throw ShapeError("stack_rows needs at least one row");
  const auto d = rows[0].size();
  std::vector<double> values;
  values.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) {
      throw ShapeError("stack_rows: row shape " + shape_to_string(r.shape()) + " vs " +
                       shape_to_string(rows[0].shape()));
    }
    values.insert(values.end(), r.values().begin(), r.values().end());
  }
  return Array::matrix(rows.size(), d, std::move(values));
}

}  // namespace ecac
