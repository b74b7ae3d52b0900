#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rblb/blur.hpp"
#include "rblb/losses.hpp"
#include "rblb/models.hpp"
#include "rblb/optimizer.hpp"

namespace rblb {

enum class Stage { Bgan, Dbgan, DbganPlus };
enum class AblationVariant { DbganMinus, Dbgan, DbganPlus };

std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);
std::string ablation_name(AblationVariant variant);
AblationVariant ablation_from_name(const std::string& name);

struct TrainConfig {
  Stage stage = Stage::Dbgan;
  AblationVariant ablation = AblationVariant::Dbgan;
  int batch_size = 4;
  int crop = 128;
  float lr_start = 1e-4f;
  float lr_end = 1e-6f;
  int anneal_patience = 3;
  int anneal_window = 50;
  std::int64_t max_steps = 1000;
  std::int64_t ckpt_every = 0;  // 0 = final checkpoint only
  std::uint64_t seed = 0;
  LossWeights weights;
  float mix_ratio = 0.5f;  // dbgan_plus only
  ContentMode content_mode = ContentMode::Mse;
  bool desk_scale = true;
  std::string sharp_dir;
  std::string blurry_dir;
  std::string paired_manifest;
  std::string bgan_checkpoint;  // dbgan_plus only
  std::string out_dir = "out";
  std::string resume_from;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  /// Hash of the trajectory-defining fields (stage, ablation, batch/crop,
  /// learning-rate plan, weights, mix ratio, content mode, seed, scale).
  /// Paths, max_steps and checkpoint cadence are excluded so a run can be
  /// extended or relocated and still resume.
  std::uint64_t config_hash() const;

  ScalePreset preset() const { return desk_scale ? ScalePreset::Desk : ScalePreset::Paper; }
  NetworkSpec generator_spec() const;
  NetworkSpec discriminator_spec() const;
  std::uint64_t feat_seed() const;
};

/// The three ablation rows differ only by their documented flags.
TrainConfig make_ablation_config(const TrainConfig& base, AblationVariant variant);

struct Batch {
  Tensor inputs;                // N x 3 x crop x crop
  Tensor targets;               // paired stages only
  Tensor real_blurry;           // bgan stage only: unpaired real-blurry sample
  std::vector<NoiseMap> noise;  // bgan stage only, one per item

  enum class Source { RealPair, BganGenerated };
  std::vector<Source> provenance;
};

struct Dataset {
  std::vector<Tensor> sharp;
  std::vector<Tensor> blurry;
  std::vector<std::pair<Tensor, Tensor>> pairs;  // (blurry, sharp)

  static Dataset load(const TrainConfig& config);
};

/// Random crop plus independent horizontal/vertical flips per item,
/// deterministic in (config.seed, step_seed). The bgan stage additionally
/// draws a fresh per-item noise map and an independent real-blurry sample.
Batch make_batch(const Dataset& dataset, const TrainConfig& config, std::uint64_t step_seed);

struct TrainState {
  NetworkSpec g_spec;
  NetworkSpec d_spec;
  ParamStore generator;
  ParamStore discriminator;
  ParamStore feat;
  OptimizerState g_opt;
  OptimizerState d_opt;
  float lr = 0.0f;
  std::int64_t step = 0;

  // Windowed-loss annealing bookkeeping.
  double window_sum = 0.0;
  std::int64_t window_count = 0;
  double best_window = 0.0;
  bool has_best = false;
  int bad_windows = 0;
  bool stopped = false;

  // Frozen blur generator for the dbgan_plus stage.
  bool has_bgan = false;
  NetworkSpec bgan_spec;
  ParamStore bgan_generator;
};

TrainState init_train_state(const TrainConfig& config);

struct StepReports {
  LossReport d_update;
  LossReport g_update;
  std::string variant;  // adversarial-loss variant actually applied
};

/// One discriminator update (relativistic, mirrored) followed by one
/// generator update of perceptual + beta * RBL.
StepReports train_bgan_step(TrainState& state, const Batch& batch, const TrainConfig& config);

/// One discriminator update then one generator update of perceptual +
/// alpha * content + beta * RDBL (standard adversarial loss under the
/// dbgan_minus ablation).
StepReports train_dbgan_step(TrainState& state, const Batch& batch, const TrainConfig& config);

/// Each item is a fresh (BGAN(sharp, noise), sharp) pair with probability
/// config.mix_ratio, otherwise a real pair from the paired pool.
Batch mix_synthetic_batch(const Dataset& dataset, const ParamStore& bgan_params,
                          const NetworkSpec& bgan_spec, const TrainConfig& config,
                          std::uint64_t step_seed);

struct TrainResult {
  std::string final_checkpoint;
  std::string metrics_csv;
  std::int64_t steps_run = 0;
  float final_lr = 0.0f;
};

/// Full loop: batches, stage steps, metrics CSV, lr annealing, periodic and
/// final checkpoints. Deterministic: identical (config, data) runs produce
/// bit-identical checkpoints.
TrainResult run_training(const TrainConfig& config);

/// Checkpoint writer/reader used by run_training; exposed for tools/tests.
void save_train_checkpoint(const std::string& path, const TrainState& state,
                           const TrainConfig& config);
TrainState load_train_checkpoint(const std::string& path, const TrainConfig& config);

}  // namespace rblb
