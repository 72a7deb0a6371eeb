#include <benchmark/benchmark.h>

#include "epsdiag/mlp.hpp"
#include "epsdiag/rng.hpp"

using namespace epsdiag;

namespace {

Eigen::MatrixXd random_batch(int n, int d, std::uint64_t seed) {
  rng::SplitMix64 stream(seed);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = stream.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

static void BM_ForwardBatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto net = mlp::make_network(2, 10, 1, 1);
  const auto x = random_batch(n, 2, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp::forward_batch(net, x));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ForwardBatch)->Arg(256)->Arg(2001);

static void BM_Jacobian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto net = mlp::make_network(2, 10, 1, 1);
  const auto x = random_batch(n, 2, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp::jacobian(net, x));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Jacobian)->Arg(256)->Arg(1400);

static void BM_LmEpoch(benchmark::State& state) {
  // one damped Gauss-Newton iteration on the regression-model shape
  const auto x = random_batch(1400, 2, 3);
  Eigen::MatrixXd y(1400, 1);
  for (int i = 0; i < 1400; ++i) y(i, 0) = std::tanh(x(i, 0)) * x(i, 1);
  mlp::TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.seed = 5;
  for (auto _ : state) {
    auto net = mlp::make_network(2, 10, 1, cfg.seed);
    benchmark::DoNotOptimize(mlp::lm_train(std::move(net), x, y, cfg));
  }
}
BENCHMARK(BM_LmEpoch);
