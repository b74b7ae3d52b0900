#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rblb/param_store.hpp"
#include "rblb/tensor.hpp"

namespace rblb {

enum class NetKind { BganGenerator, DbganGenerator, Discriminator };
enum class ScalePreset { Paper, Desk };

/// Architecture description. The paper preset records the full-size
/// networks; the desk preset shrinks depth and width but keeps the topology.
struct NetworkSpec {
  NetKind kind = NetKind::DbganGenerator;
  int num_resblocks = 0;
  int channels = 0;
  int convs_per_resblock = 5;
  int noise_channels = 0;  // bgan generator only
  int disc_depth = 0;      // discriminator only
  ScalePreset preset = ScalePreset::Desk;

  static NetworkSpec bgan_generator(ScalePreset preset);
  static NetworkSpec dbgan_generator(ScalePreset preset);
  static NetworkSpec discriminator(ScalePreset preset);

  void validate() const;
  std::uint64_t hash() const;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

/// All weights drawn from N(0, 0.01^2), biases zero; deterministic per seed.
ParamStore init_params(const NetworkSpec& spec, std::uint64_t seed);

/// x + F(x) with F a convs_per_block conv stack, ReLU between convolutions
/// and none after the last. Parameters live at prefix + ".conv<j>.{weight,bias}".
Tensor resblock_forward(Tape& tape, const Tensor& x, const ParamStore& params,
                        const std::string& prefix, int convs_per_block);

/// Head conv over concat(sharp, noise), resblock chain, two tail convs,
/// sigmoid output of the same size as the sharp input.
Tensor bgan_generator_forward(Tape& tape, const Tensor& sharp, const Tensor& noise,
                              const ParamStore& params, const NetworkSpec& spec);

/// Same generator family without the noise channels, plus a projected long
/// skip from the head activation to the tail convs.
Tensor dbgan_generator_forward(Tape& tape, const Tensor& blurry, const ParamStore& params,
                               const NetworkSpec& spec);

struct DiscriminatorOutput {
  Tensor logits;  // N x 1 x 1 x 1, pre-sigmoid
  std::vector<float> probabilities() const;
};

/// Strided conv stack (disc_depth stages, stride 2), global spatial mean,
/// affine head to one logit per batch item.
DiscriminatorOutput discriminator_forward(Tape& tape, const Tensor& image,
                                          const ParamStore& params, const NetworkSpec& spec);

}  // namespace rblb
