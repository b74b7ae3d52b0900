#include "rblb/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "rblb/ops.hpp"
#include "rblb/random.hpp"

namespace rblb {

namespace {

constexpr float kInitStd = 0.01f;
constexpr int kKernel = 3;
constexpr int kImageChannels = 3;

std::string kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::BganGenerator: return "bgan_generator";
    case NetKind::DbganGenerator: return "dbgan_generator";
    case NetKind::Discriminator: return "discriminator";
  }
  throw std::logic_error("unknown NetKind");
}

NetKind kind_from_name(const std::string& name) {
  if (name == "bgan_generator") return NetKind::BganGenerator;
  if (name == "dbgan_generator") return NetKind::DbganGenerator;
  if (name == "discriminator") return NetKind::Discriminator;
  throw std::invalid_argument("unknown network kind: " + name);
}

int disc_stage_out(int base, int stage) { return std::min(base << stage, base * 8); }

}  // namespace

NetworkSpec NetworkSpec::bgan_generator(ScalePreset preset) {
  NetworkSpec s;
  s.kind = NetKind::BganGenerator;
  s.preset = preset;
  s.num_resblocks = preset == ScalePreset::Paper ? 9 : 4;
  s.channels = preset == ScalePreset::Paper ? 64 : 16;
  s.convs_per_resblock = 5;
  s.noise_channels = 4;
  return s;
}

NetworkSpec NetworkSpec::dbgan_generator(ScalePreset preset) {
  NetworkSpec s;
  s.kind = NetKind::DbganGenerator;
  s.preset = preset;
  s.num_resblocks = preset == ScalePreset::Paper ? 16 : 4;
  s.channels = preset == ScalePreset::Paper ? 64 : 16;
  s.convs_per_resblock = 5;
  return s;
}

NetworkSpec NetworkSpec::discriminator(ScalePreset preset) {
  NetworkSpec s;
  s.kind = NetKind::Discriminator;
  s.preset = preset;
  s.channels = preset == ScalePreset::Paper ? 64 : 16;
  s.disc_depth = preset == ScalePreset::Paper ? 5 : 3;
  return s;
}

void NetworkSpec::validate() const {
  if (kind == NetKind::Discriminator) {
    if (disc_depth < 1) throw std::invalid_argument("NetworkSpec: disc_depth must be >= 1");
    if (channels < 1) throw std::invalid_argument("NetworkSpec: channels must be >= 1");
    return;
  }
  if (num_resblocks < 1) throw std::invalid_argument("NetworkSpec: num_resblocks must be >= 1");
  if (channels < 1) throw std::invalid_argument("NetworkSpec: channels must be >= 1");
  if (convs_per_resblock < 1) {
    throw std::invalid_argument("NetworkSpec: convs_per_resblock must be >= 1");
  }
  if (kind == NetKind::BganGenerator && noise_channels < 1) {
    throw std::invalid_argument("NetworkSpec: bgan generator needs noise channels");
  }
}

std::uint64_t NetworkSpec::hash() const {
  const std::string repr = kind_name(kind) + "|" + std::to_string(num_resblocks) + "|" +
                           std::to_string(channels) + "|" + std::to_string(convs_per_resblock) +
                           "|" + std::to_string(noise_channels) + "|" +
                           std::to_string(disc_depth);
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : repr) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json NetworkSpec::to_json() const {
  return nlohmann::json{{"kind", kind_name(kind)},
                        {"num_resblocks", num_resblocks},
                        {"channels", channels},
                        {"convs_per_resblock", convs_per_resblock},
                        {"noise_channels", noise_channels},
                        {"disc_depth", disc_depth},
                        {"scale_preset", preset == ScalePreset::Paper ? "paper" : "desk"}};
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.num_resblocks = j.at("num_resblocks").get<int>();
  s.channels = j.at("channels").get<int>();
  s.convs_per_resblock = j.at("convs_per_resblock").get<int>();
  s.noise_channels = j.at("noise_channels").get<int>();
  s.disc_depth = j.at("disc_depth").get<int>();
  s.preset = j.at("scale_preset").get<std::string>() == "paper" ? ScalePreset::Paper
                                                                : ScalePreset::Desk;
  s.validate();
  return s;
}

namespace {

void add_conv(ParamStore& store, std::mt19937_64& eng, const std::string& path, int cout, int cin,
              int k, bool with_bias = true) {
  store.insert(path + ".weight",
               Tensor::from_data(Shape{cout, cin, k, k},
                                 rng::normal(eng, static_cast<std::size_t>(cout) * cin * k * k,
                                             0.0f, kInitStd),
                                 true));
  if (with_bias) {
    store.insert(path + ".bias", Tensor::zeros(Shape{1, cout, 1, 1}, true));
  }
}

}  // namespace

ParamStore init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamStore store;
  store.creation_seed = seed;
  store.spec_hash = spec.hash();
  auto eng = rng::engine(seed);

  if (spec.kind == NetKind::Discriminator) {
    int cin = kImageChannels;
    for (int i = 0; i < spec.disc_depth; ++i) {
      const int cout = disc_stage_out(spec.channels, i);
      add_conv(store, eng, "stage" + std::to_string(i), cout, cin, kKernel);
      cin = cout;
    }
    add_conv(store, eng, "fc", 1, cin, 1);
    return store;
  }

  const int in_ch =
      kImageChannels + (spec.kind == NetKind::BganGenerator ? spec.noise_channels : 0);
  add_conv(store, eng, "head", spec.channels, in_ch, kKernel);
  for (int i = 0; i < spec.num_resblocks; ++i) {
    for (int j = 0; j < spec.convs_per_resblock; ++j) {
      add_conv(store, eng, "res" + std::to_string(i) + ".conv" + std::to_string(j),
               spec.channels, spec.channels, kKernel);
    }
  }
  if (spec.kind == NetKind::DbganGenerator) {
    // Long-skip projection (1x1, no bias); part of the residual branch so
    // zeroing residual parameters reduces the net to its head/tail stack.
    add_conv(store, eng, "skip", spec.channels, spec.channels, 1, /*with_bias=*/false);
  }
  add_conv(store, eng, "tail0", spec.channels, spec.channels, kKernel);
  add_conv(store, eng, "tail1", kImageChannels, spec.channels, kKernel);
  return store;
}

Tensor resblock_forward(Tape& tape, const Tensor& x, const ParamStore& params,
                        const std::string& prefix, int convs_per_block) {
  Tensor h = x;
  for (int j = 0; j < convs_per_block; ++j) {
    if (j > 0) h = relu(tape, h);
    const std::string base = prefix + ".conv" + std::to_string(j);
    h = conv2d(tape, h, params.at(base + ".weight"), params.at(base + ".bias"));
  }
  return add(tape, x, h);
}

namespace {

Tensor generator_forward(Tape& tape, const Tensor& input, const ParamStore& params,
                         const NetworkSpec& spec) {
  Tensor h = relu(tape, conv2d(tape, input, params.at("head.weight"), params.at("head.bias")));
  Tensor r = h;
  for (int i = 0; i < spec.num_resblocks; ++i) {
    r = resblock_forward(tape, r, params, "res" + std::to_string(i), spec.convs_per_resblock);
  }
  if (spec.kind == NetKind::DbganGenerator) {
    r = add(tape, r, conv2d(tape, h, params.at("skip.weight"), Tensor{}));
  }
  Tensor t = relu(tape, conv2d(tape, r, params.at("tail0.weight"), params.at("tail0.bias")));
  return sigmoid(tape, conv2d(tape, t, params.at("tail1.weight"), params.at("tail1.bias")));
}

}  // namespace

Tensor bgan_generator_forward(Tape& tape, const Tensor& sharp, const Tensor& noise,
                              const ParamStore& params, const NetworkSpec& spec) {
  if (spec.kind != NetKind::BganGenerator) {
    throw std::invalid_argument("bgan_generator_forward: spec is not a bgan generator");
  }
  const Shape ss = sharp.shape(), ns = noise.shape();
  if (ss.c != kImageChannels) {
    throw std::invalid_argument("bgan_generator_forward: sharp input must have 3 channels, got " +
                                ss.str());
  }
  if (ns.n != ss.n || ns.h != ss.h || ns.w != ss.w) {
    throw std::invalid_argument("bgan_generator_forward: noise " + ns.str() +
                                " does not match sharp " + ss.str());
  }
  if (ns.c != spec.noise_channels) {
    throw std::invalid_argument("bgan_generator_forward: noise has " + std::to_string(ns.c) +
                                " channels, spec expects " + std::to_string(spec.noise_channels));
  }
  return generator_forward(tape, concat_channels(tape, sharp, noise), params, spec);
}

Tensor dbgan_generator_forward(Tape& tape, const Tensor& blurry, const ParamStore& params,
                               const NetworkSpec& spec) {
  if (spec.kind != NetKind::DbganGenerator) {
    throw std::invalid_argument("dbgan_generator_forward: spec is not a dbgan generator");
  }
  if (blurry.shape().c != kImageChannels) {
    throw std::invalid_argument("dbgan_generator_forward: input must have 3 channels, got " +
                                blurry.shape().str());
  }
  return generator_forward(tape, blurry, params, spec);
}

std::vector<float> DiscriminatorOutput::probabilities() const {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(logits.numel()));
  for (float v : logits.values()) out.push_back(1.0f / (1.0f + std::exp(-v)));
  return out;
}

DiscriminatorOutput discriminator_forward(Tape& tape, const Tensor& image,
                                          const ParamStore& params, const NetworkSpec& spec) {
  if (spec.kind != NetKind::Discriminator) {
    throw std::invalid_argument("discriminator_forward: spec is not a discriminator");
  }
  const Shape s = image.shape();
  if (s.c != kImageChannels) {
    throw std::invalid_argument("discriminator_forward: input must have 3 channels, got " +
                                s.str());
  }
  const int min_extent = 1 << spec.disc_depth;
  if (s.h < min_extent || s.w < min_extent) {
    throw std::invalid_argument("discriminator_forward: input " + s.str() +
                                " too small for " + std::to_string(spec.disc_depth) +
                                " stride-2 stages");
  }
  Tensor h = image;
  for (int i = 0; i < spec.disc_depth; ++i) {
    const std::string base = "stage" + std::to_string(i);
    h = relu(tape, conv2d(tape, h, params.at(base + ".weight"), params.at(base + ".bias"),
                          Conv2dOpts{Padding::ReflectSame, 2}));
  }
  Tensor pooled = mean_spatial(tape, h);
  Tensor logits = conv2d(tape, pooled, params.at("fc.weight"), params.at("fc.bias"));
  return DiscriminatorOutput{logits};
}

}  // namespace rblb
