#include <benchmark/benchmark.h>

#include "epsdiag/classify.hpp"
#include "epsdiag/rng.hpp"

using namespace epsdiag;
using faults::FaultClass;

namespace {

cls::LabeledDataset blobs(int per_class, std::uint64_t seed) {
  cls::LabeledDataset d;
  d.class_order = faults::system_task_classes();
  d.features.resize(5 * per_class, 2);
  rng::SplitMix64 stream(seed);
  int row = 0;
  for (int c = 0; c < 5; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      d.features(row, 0) = 3.0 * c + stream.gaussian() * 0.4;
      d.features(row, 1) = 0.15 * c + stream.gaussian() * 0.02;
      d.labels.push_back(d.class_order[static_cast<std::size_t>(c)]);
    }
  }
  return d;
}

}  // namespace

static void BM_KnnClassify(benchmark::State& state) {
  const auto data = blobs(1400, 11);
  const auto model = cls::knn_fit(data, 3, false);
  rng::SplitMix64 stream(3);
  Eigen::VectorXd q(2);
  for (auto _ : state) {
    q << stream.uniform(0.0, 12.0), stream.uniform(0.0, 0.6);
    benchmark::DoNotOptimize(cls::knn_classify(model, q));
  }
}
BENCHMARK(BM_KnnClassify);

static void BM_KnnLossCurve(benchmark::State& state) {
  const auto data = blobs(static_cast<int>(state.range(0)), 11);
  std::vector<int> ks;
  for (int k = 1; k <= 15; ++k) ks.push_back(k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cls::knn_loss_curve(data, ks, 10, 1, false));
  }
}
BENCHMARK(BM_KnnLossCurve)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_Id3Fit(benchmark::State& state) {
  const auto data = blobs(static_cast<int>(state.range(0)), 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cls::id3_fit(data, {}));
  }
}
BENCHMARK(BM_Id3Fit)->Arg(400)->Arg(1400)->Unit(benchmark::kMillisecond);

static void BM_PcaFit(benchmark::State& state) {
  const auto data = blobs(1400, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cls::pca_classifier_fit(data, true, true));
  }
}
BENCHMARK(BM_PcaFit);
