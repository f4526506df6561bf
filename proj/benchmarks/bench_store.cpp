#include <benchmark/benchmark.h>

#include "scenemem/geometry.hpp"
#include "scenemem/rng.hpp"

using namespace scenemem;

static void BM_CullPredicate(benchmark::State& state) {
  CameraIntrinsics k;
  k.fx = 224.0;
  k.fy = 224.0;
  k.cx = 112.0;
  k.cy = 112.0;
  k.height = 224;
  k.width = 224;
  std::vector<float> depth(static_cast<std::size_t>(k.height) * k.width, 3.0f);
  const DepthView dv{depth.data(), k.height, k.width};
  const Pose pose = Pose::from_heading(Vec3(0, -1.4, 0), 0.3);
  SeededRng rng(1);
  std::vector<Vec3> pts;
  for (int i = 0; i < 1024; ++i)
    pts.emplace_back(rng.uniform(-6, 6), rng.uniform(-2.5, 0), rng.uniform(-6, 6));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cull_predicate(pts[i++ & 1023], dv, pose, k, 0.05, 5.0));
  }
}
BENCHMARK(BM_CullPredicate);

BENCHMARK_MAIN();
