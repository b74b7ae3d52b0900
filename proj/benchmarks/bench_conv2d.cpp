#include <benchmark/benchmark.h>

#include <random>

#include "rblb/ops.hpp"

namespace {

rblb::Tensor random_tensor(std::mt19937_64& eng, const rblb::Shape& s, bool requires_grad) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> values(static_cast<std::size_t>(s.numel()));
  for (auto& v : values) v = dist(eng);
  return rblb::Tensor::from_data(s, std::move(values), requires_grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const int extent = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  std::mt19937_64 eng(1);
  const rblb::Tensor x = random_tensor(eng, rblb::Shape{4, channels, extent, extent}, false);
  const rblb::Tensor w =
      random_tensor(eng, rblb::Shape{channels, channels, 3, 3}, false);
  const rblb::Tensor b = random_tensor(eng, rblb::Shape{1, channels, 1, 1}, false);

  for (auto _ : state) {
    rblb::Tape tape;
    auto out = rblb::conv2d(tape, x, w, b);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 4LL * channels * channels * extent * extent * 9);
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int extent = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  std::mt19937_64 eng(2);
  rblb::Tensor x = random_tensor(eng, rblb::Shape{4, channels, extent, extent}, true);
  rblb::Tensor w = random_tensor(eng, rblb::Shape{channels, channels, 3, 3}, true);
  rblb::Tensor b = random_tensor(eng, rblb::Shape{1, channels, 1, 1}, true);

  for (auto _ : state) {
    rblb::Tape tape;
    auto out = rblb::conv2d(tape, x, w, b);
    auto loss = rblb::reduce_mean(tape, rblb::mul(tape, out, out), rblb::MeanOver::All);
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    tape.backward(loss);
    benchmark::DoNotOptimize(x.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * 4LL * channels * channels * extent * extent * 27);
}

}  // namespace

BENCHMARK(BM_Conv2dForward)->Args({32, 16})->Args({64, 16})->Args({32, 64});
BENCHMARK(BM_Conv2dForwardBackward)->Args({32, 16})->Args({64, 16});
