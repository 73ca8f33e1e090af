#include "ecac/gaussian.hpp"

#include <cmath>

#include "ecac/errors.hpp"

namespace ecac::gaussian {

namespace {

void require_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) throw ShapeError(std::string(op) + ": shape " + shape_to_string(a) + " vs " + shape_to_string(b));
}

Array as_matrix(const Array& a) {
  if (a.rank() == 2) return a;
  if (a.rank() == 1) return a.reshaped({1, a.size()});
  throw ShapeError("distribution parameters must be rank 1 or 2, got " + shape_to_string(a.shape()));
}

std::vector<double> to_vector(const Array& a) { return {a.values().begin(), a.values().end()}; }

void check_dist(const DiagGaussian& p) { require_same("DiagGaussian", p.mean.shape(), p.log_std.shape()); }

Vars bind_constant(ad::Tape& tape, const DiagGaussian& p) {
  const auto b = as_batch(p);
  return Vars{tape.constant(b.mean), tape.constant(b.log_std)};
}

}  // namespace

DiagGaussian as_batch(const DiagGaussian& p) {
  check_dist(p);
  return DiagGaussian{as_matrix(p.mean), as_matrix(p.log_std)};
}

ad::Var sample(const Vars& p, const Array& noise) {
  require_same("sample", p.mean.shape(), noise.shape());
  ad::Tape& t = *p.mean.tape;
  return p.mean + ad::exp(p.log_std) * t.constant(noise);
}

ad::Var entropy(const Vars& p) { return ad::row_sum(ad::add_scalar(p.log_std, 0.5 * (1.0 + kLog2Pi))); }

ad::Var cross_entropy(const Vars& p, const DiagGaussian& q) {
  const auto qb = as_batch(q);
  require_same("cross_entropy", p.mean.shape(), qb.mean.shape());
  ad::Tape& t = *p.mean.tape;
  Array inv_two_var = qb.log_std;
  Array offset = qb.log_std;
  for (std::size_t i = 0; i < inv_two_var.size(); ++i) {
    inv_two_var[i] = 0.5 * std::exp(-2.0 * qb.log_std[i]);
    offset[i] = qb.log_std[i] + 0.5 * kLog2Pi;
  }
  const ad::Var var_p = ad::exp(ad::scale(p.log_std, 2.0));
  const ad::Var shift = ad::square(p.mean - t.constant(qb.mean));
  return ad::row_sum((var_p + shift) * t.constant(inv_two_var) + t.constant(offset));
}

ad::Var kl(const Vars& p, const DiagGaussian& q) { return cross_entropy(p, q) - entropy(p); }

ad::Var log_prob(const Vars& p, const Array& action) {
  require_same("log_prob", p.mean.shape(), action.shape());
  ad::Tape& t = *p.mean.tape;
  const ad::Var z2 = ad::square(t.constant(action) - p.mean) * ad::exp(ad::scale(p.log_std, -2.0));
  return ad::row_sum(ad::add_scalar(-(p.log_std + ad::scale(z2, 0.5)), -0.5 * kLog2Pi));
}

Array sample(const DiagGaussian& p, const Array& noise) {
  check_dist(p);
  ad::Tape tape;
  return sample(Vars{tape.constant(p.mean), tape.constant(p.log_std)}, noise).value();
}

std::vector<double> entropy(const DiagGaussian& p) {
  ad::Tape tape;
  return to_vector(entropy(bind_constant(tape, p)).value());
}

std::vector<double> cross_entropy(const DiagGaussian& p, const DiagGaussian& q) {
  ad::Tape tape;
  return to_vector(cross_entropy(bind_constant(tape, p), q).value());
}

std::vector<double> kl(const DiagGaussian& p, const DiagGaussian& q) {
  ad::Tape tape;
  return to_vector(kl(bind_constant(tape, p), q).value());
}

std::vector<double> log_prob(const DiagGaussian& p, const Array& action) {
  ad::Tape tape;
  return to_vector(log_prob(bind_constant(tape, p), as_matrix(action)).value());
}

}  // namespace ecac::gaussian
