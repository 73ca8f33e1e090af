#pragma once

#include <vector>

#include "ecac/array.hpp"
#include "ecac/autodiff.hpp"

namespace ecac {

// Factored Gaussian over actions. `mean` and `log_std` share a shape: [d] for a
// single state or [n, d] for a batch of n states.
struct DiagGaussian {
  Array mean;
  Array log_std;
};

namespace gaussian {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Tape-level distribution; both members are [n, d].
struct Vars {
  ad::Var mean;
  ad::Var log_std;
};

// mean + exp(log_std) * noise, differentiable in mean and log_std.
ad::Var sample(const Vars& p, const Array& noise);
// Per-row closed forms, each [n]. The second distribution of cross_entropy/kl
// is a plain value, so no gradient can reach it.
ad::Var entropy(const Vars& p);
ad::Var cross_entropy(const Vars& p, const DiagGaussian& q);
ad::Var kl(const Vars& p, const DiagGaussian& q);
ad::Var log_prob(const Vars& p, const Array& action);

// Value-level versions, one entry per row (a rank-1 distribution is one row).
Array sample(const DiagGaussian& p, const Array& noise);
std::vector<double> entropy(const DiagGaussian& p);
std::vector<double> cross_entropy(const DiagGaussian& p, const DiagGaussian& q);
std::vector<double> kl(const DiagGaussian& p, const DiagGaussian& q);
std::vector<double> log_prob(const DiagGaussian& p, const Array& action);

// Batch [n, d] view of a distribution given as [d] or [n, d].
DiagGaussian as_batch(const DiagGaussian& p);

}  // namespace gaussian
}  // namespace ecac
