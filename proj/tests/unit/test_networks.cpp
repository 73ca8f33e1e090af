#include <doctest.h>

#include <cmath>
#include <vector>

#include "ecac/errors.hpp"
#include "ecac/networks.hpp"
#include "ecac/rng.hpp"

using namespace ecac;

namespace {

MlpParams zero_like(const MlpParams& p) {
  MlpParams z = p;
  for (Array* b : z.blocks()) {
    for (double& v : b->mutable_values()) v = 0.0;
  }
  return z;
}

}  // namespace

TEST_CASE("parameter count follows the layer sizes") {
  const std::vector<std::size_t> sizes{3, 256, 256, 1};
  const std::size_t expected = (3 * 256 + 256) + (256 * 256 + 256) + (256 * 1 + 1);
  CHECK(expected == 67'073);
  CHECK(mlp_parameter_count(sizes) == expected);
  const auto p = init_mlp(sizes, 1);
  CHECK(p.parameter_count() == expected);
  CHECK(p.layer_sizes() == sizes);
  CHECK(p.block_names() == std::vector<std::string>{"w0", "b0", "w1", "b1", "w2", "b2"});
  CHECK(p.weights[1].shape() == Shape{256, 256});
  CHECK(p.biases[2].shape() == Shape{1});
}

TEST_CASE("initialization is deterministic, bounded and has zero biases") {
  const std::vector<std::size_t> sizes{4, 32, 2};
  const auto a = init_mlp(sizes, 17), b = init_mlp(sizes, 17), c = init_mlp(sizes, 18);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (const auto& bias : a.biases) CHECK(bias == Array::zeros(bias.shape()));
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
    for (double w : a.weights[l].values()) CHECK(std::fabs(w) <= limit);
  }
  CHECK_THROWS(init_mlp(std::vector<std::size_t>{3, 0, 1}, 1));
}

TEST_CASE("policy head splits mean and clamped log-std") {
  auto p = zero_like(init_mlp(std::vector<std::size_t>{3, 8, 4}, 1));
  const auto d = forward_policy(p, Array::vector({0.5, -1, 2}));
  CHECK(d.mean == Array::zeros({2}));
  CHECK(d.log_std == Array::zeros({2}));

  p.biases[1] = Array::vector({0.25, -0.5, -50.0, 9.0});
  const auto c = forward_policy(p, Array::vector({0.5, -1, 2}));
  CHECK(c.mean == Array::vector({0.25, -0.5}));
  CHECK(c.log_std == Array::vector({kLogStdMin, kLogStdMax}));
  CHECK_THROWS_AS(forward_policy(p, Array::vector({1, 2})), ShapeError);
}

TEST_CASE("batch forwards equal per-sample forwards") {
  Rng rng(5);
  const auto policy = init_mlp(std::vector<std::size_t>{3, 16, 16, 4}, 2);
  const auto q = init_mlp(std::vector<std::size_t>{5, 16, 16, 1}, 3);
  const Array states = rng.normal_array({7, 3});
  const Array actions = rng.normal_array({7, 2});
  const auto batch = forward_policy(policy, states);
  const auto qs = forward_q(q, states, actions);
  REQUIRE(qs.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto one = forward_policy(policy, states.row(i));
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(one.mean[j] == doctest::Approx(batch.mean.at(i, j)).epsilon(1e-13));
      CHECK(one.log_std[j] == doctest::Approx(batch.log_std.at(i, j)).epsilon(1e-13));
    }
    const auto single = forward_q(q, states.row(i).reshaped({1, 3}), actions.row(i).reshaped({1, 2}));
    CHECK(single[0] == doctest::Approx(qs[i]).epsilon(1e-13));
  }
  // Purity: same inputs give bit-identical outputs.
  CHECK(forward_q(q, states, actions) == qs);
  CHECK(forward_policy(policy, states).mean == batch.mean);
}

TEST_CASE("Q network takes the state first, then the action") {
  const auto zero = zero_like(init_mlp(std::vector<std::size_t>{3, 4, 1}, 1));
  CHECK(forward_q(zero, Array::matrix(1, 2, {1, 2}), Array::matrix(1, 1, {3}))[0] == 0.0);

  const auto q = init_mlp(std::vector<std::size_t>{3, 16, 1}, 9);
  const double sa = forward_q(q, Array::matrix(1, 2, {0.3, -0.8}), Array::matrix(1, 1, {1.1}))[0];
  // Same numbers, concatenated as (action, state) instead.
  const double as = forward_q(q, Array::matrix(1, 2, {1.1, 0.3}), Array::matrix(1, 1, {-0.8}))[0];
  CHECK(sa != as);
  CHECK_THROWS_AS(forward_q(q, Array::matrix(1, 3, {1, 2, 3}), Array::matrix(1, 1, {1})), ShapeError);
}

TEST_CASE("polyak averaging") {
  const std::vector<std::size_t> sizes{2, 6, 1};
  const auto online = init_mlp(sizes, 1);
  const auto start = init_mlp(sizes, 2);

  auto full = start;
  polyak_update(full, online, 1.0);
  CHECK(full == online);

  auto none = start;
  polyak_update(none, online, 0.0);
  CHECK(none == start);

  auto zero = zero_like(start), ones = zero_like(start);
  for (Array* b : ones.blocks()) {
    for (double& v : b->mutable_values()) v = 1.0;
  }
  polyak_update(zero, ones, 5e-3);
  for (const Array* b : zero.blocks()) {
    for (double v : b->values()) CHECK(v == doctest::Approx(0.005).epsilon(1e-15));
  }

  auto moved = start;
  polyak_update(moved, online, 0.3);
  const auto mb = moved.blocks();
  const auto sb = start.blocks();
  const auto ob = online.blocks();
  for (std::size_t k = 0; k < mb.size(); ++k) {
    for (std::size_t i = 0; i < mb[k]->size(); ++i) {
      CHECK(std::fabs((*mb[k])[i] - (*ob[k])[i]) ==
            doctest::Approx(0.7 * std::fabs((*sb[k])[i] - (*ob[k])[i])).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(polyak_update(moved, init_mlp(std::vector<std::size_t>{2, 5, 1}, 1), 0.5), ShapeError);
}

TEST_CASE("Adam optimizer") {
  SUBCASE("zero gradient leaves parameters and moments unchanged") {
    Adam opt({}, {"x"}, {{3}});
    Array x = Array::vector({1, 2, 3});
    Array* params[] = {&x};
    const Array grads[] = {Array::zeros({3})};
    opt.step(params, grads);
    CHECK(x == Array::vector({1, 2, 3}));
    CHECK(opt.first_moments()[0] == Array::zeros({3}));
    CHECK(opt.second_moments()[0] == Array::zeros({3}));
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("first step from zero moments moves by about the learning rate") {
    Adam opt({.learning_rate = 1e-3}, {"x"}, {{3}});
    Array x = Array::vector({1, 2, 3});
    Array* params[] = {&x};
    const Array grads[] = {Array::vector({0.5, -7, 100})};
    opt.step(params, grads);
    CHECK(x[0] == doctest::Approx(1 - 1e-3).epsilon(1e-6));
    CHECK(x[1] == doctest::Approx(2 + 1e-3).epsilon(1e-6));
    CHECK(x[2] == doctest::Approx(3 - 1e-3).epsilon(1e-6));
  }
  SUBCASE("quadratic bowl converges") {
    Adam opt({.learning_rate = 0.1}, {"x"}, {{1}});
    Array x = Array::vector({5.0});
    Array* params[] = {&x};
    for (int i = 0; i < 500; ++i) {
      const Array grads[] = {Array::vector({2 * x[0]})};
      opt.step(params, grads);
    }
    CHECK(std::fabs(x[0]) < 1e-2);
  }
  SUBCASE("non-finite gradient names the block and modifies nothing") {
    Adam opt({}, {"w0", "b0"}, {{2}, {1}});
    Array w = Array::vector({1, 1}), b = Array::vector({0});
    Array* params[] = {&w, &b};
    const Array grads[] = {Array::vector({1, 1}), Array::vector({NAN})};
    try {
      opt.step(params, grads);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("b0") != std::string::npos);
    }
    CHECK(w == Array::vector({1, 1}));
    CHECK(opt.step_count() == 0);
    CHECK(opt.first_moments()[0] == Array::zeros({2}));
  }
  SUBCASE("identical inputs give identical trajectories") {
    auto run = [] {
      Adam opt({}, {"x"}, {{2}});
      Array x = Array::vector({0.3, -0.4});
      Array* params[] = {&x};
      for (int i = 0; i < 20; ++i) {
        const Array grads[] = {Array::vector({std::sin(x[0]), x[1] * x[1]})};
        opt.step(params, grads);
      }
      return x;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("end-to-end gradients through both heads pass finite-difference checks") {
  Rng rng(8);
  const auto policy = init_mlp(std::vector<std::size_t>{3, 8, 8, 4}, 4);
  const auto q = init_mlp(std::vector<std::size_t>{5, 8, 8, 1}, 5);
  const Array states = rng.normal_array({6, 3});
  const Array noise = rng.normal_array({6, 2});
  auto loss_wrt_states = [&](ad::Tape& t, ad::Var s) {
    const auto pv = bind(t, policy, false);
    const auto qv = bind(t, q, false);
    const auto d = forward_policy(pv, s);
    ad::Var a = gaussian::sample(d, noise);
    return ad::mean(ad::add(forward_q(qv, s, a), ad::row_sum(d.log_std)));
  };
  CHECK(ad::finite_difference_check(loss_wrt_states, states, 1e-6) <= 1e-4);

  // Gradient w.r.t. the first policy weight matrix.
  auto loss_wrt_w0 = [&](ad::Tape& t, ad::Var w0) {
    auto pv = bind(t, policy, false);
    pv.weights[0] = w0;
    const auto qv = bind(t, q, false);
    ad::Var s = t.constant(states);
    const auto d = forward_policy(pv, s);
    return ad::mean(forward_q(qv, s, gaussian::sample(d, noise)));
  };
  CHECK(ad::finite_difference_check(loss_wrt_w0, policy.weights[0], 1e-6) <= 1e-4);
}
