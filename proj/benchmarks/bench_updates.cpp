#include <benchmark/benchmark.h>

#include <vector>

#include "ecac/actor.hpp"
#include "ecac/autodiff.hpp"
#include "ecac/critic.hpp"
#include "ecac/envs.hpp"
#include "ecac/networks.hpp"
#include "ecac/replay.hpp"

namespace {

using namespace ecac;

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Array a = rng.normal_array({n, n});
  const Array b = rng.normal_array({n, n});
  for (auto _ : state) {
    ad::Tape tape;
    auto x = tape.parameter(a);
    auto y = tape.parameter(b);
    auto loss = ad::sum(ad::matmul(x, y));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(3 * n * n * n));
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128)->Arg(256);

struct Fixture {
  PointMass2D env;
  MlpParams policy;
  Adam policy_opt;
  CriticPair critics;
  CoefficientState coeffs;
  Batch batch;

  explicit Fixture(std::size_t hidden) {
    const auto& s = env.spec();
    const std::vector<std::size_t> ps{s.obs_dim, hidden, hidden, 2 * s.act_dim};
    const std::vector<std::size_t> qs{s.obs_dim + s.act_dim, hidden, hidden, 1};
    policy = init_mlp(ps, 1);
    policy_opt = Adam::for_mlp({}, policy, "policy/");
    critics = CriticPair::create(qs, 2, 3, {});
    coeffs = CoefficientState::create(s.act_dim, {});
    ReplayBuffer replay(1000);
    Rng rng(4);
    Array obs = env.reset(5);
    for (int i = 0; i < 1000; ++i) {
      const Array a = rng.normal_array({s.act_dim});
      const auto r = env.step(a);
      replay.push({obs, a, r.reward, r.observation, r.terminal});
      obs = (r.terminal || r.truncated) ? env.reset(static_cast<std::uint64_t>(i)) : r.observation;
    }
    batch = replay.sample_uniform(128, rng);
  }
};

void BM_CriticUpdate(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  Rng rng(6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(critic_update_step(f.critics, f.policy, f.batch, CriticConfig{}, rng));
  }
}
BENCHMARK(BM_CriticUpdate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ActorUpdate(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  Rng rng(7);
  for (auto _ : state) {
    const MlpParams snapshot = f.policy;
    benchmark::DoNotOptimize(actor_update_step(f.policy, f.policy_opt, snapshot, f.critics, f.batch.states, f.coeffs, rng));
  }
}
BENCHMARK(BM_ActorUpdate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
