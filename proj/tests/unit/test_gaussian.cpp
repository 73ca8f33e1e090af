#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ecac/autodiff.hpp"
#include "ecac/errors.hpp"
#include "ecac/gaussian.hpp"
#include "ecac/rng.hpp"

using namespace ecac;

namespace {

constexpr double kHalfLog2PiE = 0.5 * (1.0 + gaussian::kLog2Pi);

DiagGaussian dist(std::vector<double> mean, std::vector<double> log_std) {
  return {Array::vector(std::move(mean)), Array::vector(std::move(log_std))};
}

struct MeanSe {
  double mean, se;
};

MeanSe mean_se(const std::vector<double>& xs) {
  double m = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// One row per sample of p, for Monte-Carlo oracles.
Array draw(const DiagGaussian& p, std::size_t n, Rng& rng) {
  const std::size_t d = p.mean.size();
  Array noise = rng.normal_array({n, d});
  Array out = Array::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = p.mean[j] + std::exp(p.log_std[j]) * noise.at(i, j);
  }
  return out;
}

DiagGaussian repeat(const DiagGaussian& p, std::size_t n) {
  const std::size_t d = p.mean.size();
  Array m = Array::zeros({n, d}), s = Array::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) m.at(i, j) = p.mean[j], s.at(i, j) = p.log_std[j];
  }
  return {m, s};
}

DiagGaussian random_dist(Rng& rng, std::size_t n, std::size_t d) {
  Array m = rng.normal_array({n, d}), s = Array::zeros({n, d});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform(-2.0, 1.0);
  return {m, s};
}

}  // namespace

TEST_CASE("reparameterized samples") {
  CHECK(gaussian::sample(dist({0, 0}, {0, 0}), Array::vector({1, -1})) == Array::vector({1, -1}));
  const auto p = dist({0.25, -3}, {0.7, -1.1});
  CHECK(gaussian::sample(p, Array::vector({0, 0})) == p.mean);
  CHECK(gaussian::sample(dist({2}, {std::log(3.0)}), Array::vector({0.5}))[0] == doctest::Approx(3.5).epsilon(1e-15));
  CHECK_THROWS_AS(gaussian::sample(p, Array::vector({1, 2, 3})), ShapeError);
}

TEST_CASE("sampling with a fixed seed is reproducible") {
  const auto p = dist({0.1, 0.2, 0.3}, {-0.5, 0, 0.5});
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) {
    CHECK(gaussian::sample(p, a.normal_array({3})) == gaussian::sample(p, b.normal_array({3})));
  }
}

TEST_CASE("entropy closed form") {
  CHECK(gaussian::entropy(dist({0}, {0}))[0] == doctest::Approx(1.41894).epsilon(1e-5));
  CHECK(gaussian::entropy(dist({0, 0, 0}, {0, 0, 0}))[0] == doctest::Approx(4.25681).epsilon(1e-5));
  CHECK(gaussian::entropy(dist({5}, {0.3}))[0] == doctest::Approx(0.3 + kHalfLog2PiE).epsilon(1e-14));
}

TEST_CASE("entropy matches the Monte-Carlo estimate -E[log p]") {
  Rng rng(1);
  const auto p = dist({0.3, -1.0}, {0.4, -0.7});
  const std::size_t n = 1'000'000;
  const auto lp = gaussian::log_prob(repeat(p, n), draw(p, n, rng));
  std::vector<double> neg(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) neg[i] = -lp[i];
  const auto est = mean_se(neg);
  CHECK(std::fabs(est.mean - gaussian::entropy(p)[0]) < 3 * est.se);
}

TEST_CASE("cross entropy closed form") {
  const auto p = dist({0.5, -0.2}, {0.1, -0.4});
  CHECK(gaussian::cross_entropy(p, p)[0] == doctest::Approx(gaussian::entropy(p)[0]).epsilon(1e-14));
  CHECK(gaussian::cross_entropy(dist({0}, {0}), dist({1}, {0}))[0] == doctest::Approx(1.91894).epsilon(1e-5));
  CHECK_THROWS_AS(gaussian::cross_entropy(p, dist({0}, {0})), ShapeError);
}

TEST_CASE("cross entropy matches the Monte-Carlo estimate -E_p[log q]") {
  Rng rng(2);
  const auto p = dist({0.3, -1.0}, {0.4, -0.7});
  const auto q = dist({-0.2, -0.5}, {0.1, 0.2});
  const std::size_t n = 1'000'000;
  const auto lq = gaussian::log_prob(repeat(q, n), draw(p, n, rng));
  std::vector<double> neg(lq.size());
  for (std::size_t i = 0; i < lq.size(); ++i) neg[i] = -lq[i];
  const auto est = mean_se(neg);
  CHECK(std::fabs(est.mean - gaussian::cross_entropy(p, q)[0]) < 3 * est.se);
}

TEST_CASE("kl divergence closed form") {
  const auto p = dist({0.5, -0.2}, {0.1, -0.4});
  CHECK(std::fabs(gaussian::kl(p, p)[0]) <= 1e-12);
  CHECK(gaussian::kl(dist({0}, {0}), dist({1}, {0}))[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gaussian::kl(dist({0}, {std::log(2.0)}), dist({0}, {0}))[0] ==
        doctest::Approx(std::log(0.5) + 2.0 - 0.5).epsilon(1e-12));
  CHECK(gaussian::kl(dist({0}, {std::log(2.0)}), dist({0}, {0}))[0] == doctest::Approx(0.80685).epsilon(1e-5));
}

TEST_CASE("log density") {
  CHECK(gaussian::log_prob(dist({0}, {0}), Array::vector({0}))[0] ==
        doctest::Approx(-0.5 * gaussian::kLog2Pi).epsilon(1e-15));
  CHECK(gaussian::log_prob(dist({0}, {0}), Array::vector({1}))[0] == doctest::Approx(-1.41894).epsilon(1e-5));
  CHECK_THROWS_AS(gaussian::log_prob(dist({0}, {0}), Array::vector({1, 2})), ShapeError);
}

TEST_CASE("density integrates to one on a fine grid") {
  const auto p = dist({0.4}, {-0.3});
  const double sigma = std::exp(-0.3), h = 1e-3;
  const std::size_t n = static_cast<std::size_t>(24 * sigma / h);
  Array grid = Array::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) grid[i] = 0.4 - 12 * sigma + (static_cast<double>(i) + 0.5) * h;
  double total = 0;
  for (double lp : gaussian::log_prob(repeat(p, n), grid)) total += std::exp(lp) * h;
  CHECK(std::fabs(total - 1.0) < 1e-3);
}

TEST_CASE("kl is non-negative and equals cross entropy minus entropy") {
  Rng rng(3);
  const auto p = random_dist(rng, 1000, 3);
  const auto q = random_dist(rng, 1000, 3);
  const auto k = gaussian::kl(p, q), h = gaussian::entropy(p), hx = gaussian::cross_entropy(p, q);
  const auto self = gaussian::kl(p, p);
  for (std::size_t i = 0; i < 1000; ++i) {
    CHECK(k[i] >= -1e-12);
    CHECK(self[i] <= 1e-12);
    CHECK(std::fabs(k[i] - (hx[i] - h[i])) <= 1e-12);
  }
}

TEST_CASE("tape versions agree with value versions and pass gradient checks") {
  Rng rng(4);
  const auto p = random_dist(rng, 5, 2);
  const auto q = random_dist(rng, 5, 2);
  const Array action = rng.normal_array({5, 2});
  const Array noise = rng.normal_array({5, 2});
  const Array weights = rng.normal_array({5});
  {
    ad::Tape t;
    gaussian::Vars v{t.constant(p.mean), t.constant(p.log_std)};
    const auto h = gaussian::entropy(v).value(), hx = gaussian::cross_entropy(v, q).value();
    const auto k = gaussian::kl(v, q).value(), lp = gaussian::log_prob(v, action).value();
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(h[i] == doctest::Approx(gaussian::entropy(p)[i]).epsilon(1e-14));
      CHECK(hx[i] == doctest::Approx(gaussian::cross_entropy(p, q)[i]).epsilon(1e-14));
      CHECK(k[i] == doctest::Approx(gaussian::kl(p, q)[i]).epsilon(1e-12));
      CHECK(lp[i] == doctest::Approx(gaussian::log_prob(p, action)[i]).epsilon(1e-14));
    }
    CHECK(gaussian::sample(v, noise).value() == gaussian::sample(p, noise));
  }

  using Closed = std::function<ad::Var(const gaussian::Vars&)>;
  const std::vector<std::pair<const char*, Closed>> forms = {
      {"entropy", [](const gaussian::Vars& v) { return gaussian::entropy(v); }},
      {"cross_entropy", [&](const gaussian::Vars& v) { return gaussian::cross_entropy(v, q); }},
      {"kl", [&](const gaussian::Vars& v) { return gaussian::kl(v, q); }},
      {"log_prob", [&](const gaussian::Vars& v) { return gaussian::log_prob(v, action); }},
      {"sample", [&](const gaussian::Vars& v) { return ad::row_sum(gaussian::sample(v, noise)); }},
  };
  for (const auto& [name, form] : forms) {
    CAPTURE(name);
    auto wrt_mean = [&](ad::Tape& t, ad::Var m) {
      return ad::sum(ad::mul(form({m, t.constant(p.log_std)}), t.constant(weights)));
    };
    auto wrt_log_std = [&](ad::Tape& t, ad::Var s) {
      return ad::sum(ad::mul(form({t.constant(p.mean), s}), t.constant(weights)));
    };
    CHECK(ad::finite_difference_check(wrt_mean, p.mean, 1e-6) <= 1e-4);
    CHECK(ad::finite_difference_check(wrt_log_std, p.log_std, 1e-6) <= 1e-4);
  }
}

TEST_CASE("no gradient reaches the frozen second distribution") {
  // q enters as a plain value, so the only tape parameters are p's.
  ad::Tape t;
  const auto q = dist({1, 2}, {0.5, -0.5});
  ad::Var m = t.parameter(Array::matrix(1, 2, {0, 0}));
  ad::Var s = t.parameter(Array::matrix(1, 2, {0, 0}));
  const std::size_t before = t.size();
  t.backward(ad::sum(gaussian::kl({m, s}, q)));
  CHECK(t.size() > before);
  // At p = N(0, 1): dKL/dmu = (mu - mu_q) / sigma_q^2, dKL/dlog_std = sigma^2/sigma_q^2 - 1.
  CHECK(t.grad(m).at(0, 0) == doctest::Approx(-1.0 / std::exp(1.0)));
  CHECK(t.grad(m).at(0, 1) == doctest::Approx(-2.0 / std::exp(-1.0)));
  CHECK(t.grad(s).at(0, 0) == doctest::Approx(1.0 / std::exp(1.0) - 1.0));
  CHECK(t.grad(s).at(0, 1) == doctest::Approx(1.0 / std::exp(-1.0) - 1.0));
}

TEST_CASE("as_batch promotes a single distribution to one row") {
  const auto b = gaussian::as_batch(dist({1, 2}, {0, 0}));
  CHECK(b.mean.shape() == Shape{1, 2});
  CHECK(b.log_std.shape() == Shape{1, 2});
}
