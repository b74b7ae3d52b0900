#include <benchmark/benchmark.h>

#include <random>

#include "rblb/blur.hpp"
#include "rblb/models.hpp"
#include "rblb/ops.hpp"

namespace {

rblb::Tensor random_image(std::mt19937_64& eng, const rblb::Shape& s) {
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> values(static_cast<std::size_t>(s.numel()));
  for (auto& v : values) v = dist(eng);
  return rblb::Tensor::from_data(s, std::move(values));
}

void BM_DbganGeneratorForward(benchmark::State& state) {
  const int extent = static_cast<int>(state.range(0));
  const rblb::NetworkSpec spec = rblb::NetworkSpec::dbgan_generator(rblb::ScalePreset::Desk);
  rblb::ParamStore params = rblb::init_params(spec, 1);
  params.set_requires_grad(false);
  std::mt19937_64 eng(3);
  const rblb::Tensor blurry = random_image(eng, rblb::Shape{1, 3, extent, extent});

  for (auto _ : state) {
    rblb::Tape tape;
    auto out = rblb::dbgan_generator_forward(tape, blurry, params, spec);
    benchmark::DoNotOptimize(out.values().data());
  }
}

void BM_BganGeneratorForward(benchmark::State& state) {
  const int extent = static_cast<int>(state.range(0));
  const rblb::NetworkSpec spec = rblb::NetworkSpec::bgan_generator(rblb::ScalePreset::Desk);
  rblb::ParamStore params = rblb::init_params(spec, 2);
  params.set_requires_grad(false);
  std::mt19937_64 eng(4);
  const rblb::Tensor sharp = random_image(eng, rblb::Shape{1, 3, extent, extent});
  const rblb::Tensor noise = rblb::make_noise_map(9, 4, extent, extent).to_tensor();

  for (auto _ : state) {
    rblb::Tape tape;
    auto out = rblb::bgan_generator_forward(tape, sharp, noise, params, spec);
    benchmark::DoNotOptimize(out.values().data());
  }
}

void BM_DiscriminatorForward(benchmark::State& state) {
  const int extent = static_cast<int>(state.range(0));
  const rblb::NetworkSpec spec = rblb::NetworkSpec::discriminator(rblb::ScalePreset::Desk);
  rblb::ParamStore params = rblb::init_params(spec, 5);
  params.set_requires_grad(false);
  std::mt19937_64 eng(6);
  const rblb::Tensor image = random_image(eng, rblb::Shape{4, 3, extent, extent});

  for (auto _ : state) {
    rblb::Tape tape;
    auto out = rblb::discriminator_forward(tape, image, params, spec);
    benchmark::DoNotOptimize(out.logits.values().data());
  }
}

}  // namespace

BENCHMARK(BM_DbganGeneratorForward)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_BganGeneratorForward)->Arg(32)->Arg(64);
BENCHMARK(BM_DiscriminatorForward)->Arg(32)->Arg(64);
