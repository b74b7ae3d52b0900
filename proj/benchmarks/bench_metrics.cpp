#include <benchmark/benchmark.h>

#include <random>

#include "rblb/metrics.hpp"

namespace {

rblb::Tensor random_image(std::mt19937_64& eng, int extent) {
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> values(static_cast<std::size_t>(3) * extent * extent);
  for (auto& v : values) v = dist(eng);
  return rblb::Tensor::from_data(rblb::Shape{1, 3, extent, extent}, std::move(values));
}

void BM_Psnr(benchmark::State& state) {
  std::mt19937_64 eng(7);
  const auto a = random_image(eng, static_cast<int>(state.range(0)));
  const auto b = random_image(eng, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rblb::psnr(a, b));
  }
}

void BM_Ssim(benchmark::State& state) {
  std::mt19937_64 eng(8);
  const auto a = random_image(eng, static_cast<int>(state.range(0)));
  const auto b = random_image(eng, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rblb::ssim(a, b));
  }
}

}  // namespace

BENCHMARK(BM_Psnr)->Arg(128)->Arg(512);
BENCHMARK(BM_Ssim)->Arg(128)->Arg(512);
