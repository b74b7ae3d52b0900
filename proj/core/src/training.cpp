#include "rblb/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>

#include "rblb/checkpoint.hpp"
#include "rblb/image_io.hpp"
#include "rblb/ops.hpp"
#include "rblb/random.hpp"

namespace fs = std::filesystem;

namespace rblb {

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Bgan: return "bgan";
    case Stage::Dbgan: return "dbgan";
    case Stage::DbganPlus: return "dbgan_plus";
  }
  throw std::logic_error("unknown Stage");
}

Stage stage_from_name(const std::string& name) {
  if (name == "bgan") return Stage::Bgan;
  if (name == "dbgan") return Stage::Dbgan;
  if (name == "dbgan_plus" || name == "dbgan-plus") return Stage::DbganPlus;
  throw std::invalid_argument("unknown stage: " + name);
}

std::string ablation_name(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::DbganMinus: return "dbgan_minus";
    case AblationVariant::Dbgan: return "dbgan";
    case AblationVariant::DbganPlus: return "dbgan_plus";
  }
  throw std::logic_error("unknown AblationVariant");
}

AblationVariant ablation_from_name(const std::string& name) {
  if (name == "dbgan_minus" || name == "dbgan-minus") return AblationVariant::DbganMinus;
  if (name == "dbgan") return AblationVariant::Dbgan;
  if (name == "dbgan_plus" || name == "dbgan-plus") return AblationVariant::DbganPlus;
  throw std::invalid_argument("unknown ablation: " + name);
}

void TrainConfig::validate() const {
  weights.validate();
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (crop < 32) throw std::invalid_argument("TrainConfig: crop must be >= 32");
  if (!(lr_end <= lr_start)) throw std::invalid_argument("TrainConfig: lr_end must be <= lr_start");
  if (lr_start <= 0.0f) throw std::invalid_argument("TrainConfig: lr_start must be > 0");
  if (anneal_patience < 1) throw std::invalid_argument("TrainConfig: anneal_patience must be >= 1");
  if (anneal_window < 1) throw std::invalid_argument("TrainConfig: anneal_window must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("TrainConfig: max_steps must be >= 0");
  if (mix_ratio < 0.0f || mix_ratio > 1.0f) {
    throw std::invalid_argument("TrainConfig: mix_ratio must be in [0, 1]");
  }
  if (stage == Stage::DbganPlus && ablation != AblationVariant::DbganPlus) {
    throw std::invalid_argument("TrainConfig: the dbgan_plus stage is the dbgan_plus ablation");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"stage", stage_name(stage)},
                        {"ablation", ablation_name(ablation)},
                        {"batch_size", batch_size},
                        {"crop", crop},
                        {"lr_start", lr_start},
                        {"lr_end", lr_end},
                        {"anneal_patience", anneal_patience},
                        {"anneal_window", anneal_window},
                        {"max_steps", max_steps},
                        {"ckpt_every", ckpt_every},
                        {"seed", seed},
                        {"alpha", weights.alpha},
                        {"beta", weights.beta},
                        {"mix_ratio", mix_ratio},
                        {"content_mode", content_mode == ContentMode::Mse ? "mse" : "l1"},
                        {"desk_scale", desk_scale},
                        {"sharp_dir", sharp_dir},
                        {"blurry_dir", blurry_dir},
                        {"paired_manifest", paired_manifest},
                        {"bgan_checkpoint", bgan_checkpoint},
                        {"out_dir", out_dir},
                        {"resume_from", resume_from}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto get = [&j](const char* key, auto fallback) {
    using T = decltype(fallback);
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  };
  if (j.contains("stage")) c.stage = stage_from_name(j.at("stage").get<std::string>());
  if (j.contains("ablation")) c.ablation = ablation_from_name(j.at("ablation").get<std::string>());
  c.batch_size = get("batch_size", c.batch_size);
  c.crop = get("crop", c.crop);
  c.lr_start = get("lr_start", c.lr_start);
  c.lr_end = get("lr_end", c.lr_end);
  c.anneal_patience = get("anneal_patience", c.anneal_patience);
  c.anneal_window = get("anneal_window", c.anneal_window);
  c.max_steps = get("max_steps", c.max_steps);
  c.ckpt_every = get("ckpt_every", c.ckpt_every);
  c.seed = get("seed", c.seed);
  c.weights.alpha = get("alpha", c.weights.alpha);
  c.weights.beta = get("beta", c.weights.beta);
  c.mix_ratio = get("mix_ratio", c.mix_ratio);
  if (j.contains("content_mode")) {
    const auto mode = j.at("content_mode").get<std::string>();
    if (mode != "mse" && mode != "l1") {
      throw std::invalid_argument("TrainConfig: unknown content_mode " + mode);
    }
    c.content_mode = mode == "mse" ? ContentMode::Mse : ContentMode::L1;
  }
  c.desk_scale = get("desk_scale", c.desk_scale);
  c.sharp_dir = get("sharp_dir", c.sharp_dir);
  c.blurry_dir = get("blurry_dir", c.blurry_dir);
  c.paired_manifest = get("paired_manifest", c.paired_manifest);
  c.bgan_checkpoint = get("bgan_checkpoint", c.bgan_checkpoint);
  c.out_dir = get("out_dir", c.out_dir);
  c.resume_from = get("resume_from", c.resume_from);
  return c;
}

std::uint64_t TrainConfig::config_hash() const {
  nlohmann::json j{{"stage", stage_name(stage)},
                   {"ablation", ablation_name(ablation)},
                   {"batch_size", batch_size},
                   {"crop", crop},
                   {"lr_start", lr_start},
                   {"lr_end", lr_end},
                   {"anneal_patience", anneal_patience},
                   {"anneal_window", anneal_window},
                   {"seed", seed},
                   {"alpha", weights.alpha},
                   {"beta", weights.beta},
                   {"mix_ratio", mix_ratio},
                   {"content_mode", content_mode == ContentMode::Mse ? "mse" : "l1"},
                   {"desk_scale", desk_scale}};
  const std::string repr = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : repr) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

NetworkSpec TrainConfig::generator_spec() const {
  return stage == Stage::Bgan ? NetworkSpec::bgan_generator(preset())
                              : NetworkSpec::dbgan_generator(preset());
}

NetworkSpec TrainConfig::discriminator_spec() const {
  return NetworkSpec::discriminator(preset());
}

std::uint64_t TrainConfig::feat_seed() const { return rng::mix(seed, 0xfea7ULL); }

TrainConfig make_ablation_config(const TrainConfig& base, AblationVariant variant) {
  TrainConfig c = base;
  c.ablation = variant;
  switch (variant) {
    case AblationVariant::DbganMinus:
    case AblationVariant::Dbgan:
      c.stage = Stage::Dbgan;
      c.bgan_checkpoint.clear();
      break;
    case AblationVariant::DbganPlus:
      c.stage = Stage::DbganPlus;
      break;
  }
  return c;
}

Dataset Dataset::load(const TrainConfig& config) {
  Dataset data;
  auto load_dir = [](const std::string& dir, const char* what) {
    if (dir.empty() || !fs::is_directory(dir)) {
      throw std::runtime_error(std::string("Dataset: missing ") + what + " directory: " + dir);
    }
    std::vector<Tensor> images;
    for (const auto& path : list_pngs(dir)) images.push_back(load_png(path));
    if (images.empty()) {
      throw std::runtime_error(std::string("Dataset: no PNG files in ") + dir);
    }
    return images;
  };

  if (config.stage == Stage::Bgan) {
    data.sharp = load_dir(config.sharp_dir, "sharp");
    data.blurry = load_dir(config.blurry_dir, "real-blurry");
    return data;
  }

  if (config.paired_manifest.empty() || !fs::is_regular_file(config.paired_manifest)) {
    throw std::runtime_error("Dataset: missing paired manifest: " + config.paired_manifest);
  }
  std::ifstream in(config.paired_manifest);
  nlohmann::json manifest;
  in >> manifest;
  const fs::path base = fs::path(config.paired_manifest).parent_path();
  for (const auto& pair : manifest.at("pairs")) {
    auto resolve = [&base](const std::string& p) {
      const fs::path path(p);
      return path.is_absolute() ? path.string() : (base / path).string();
    };
    data.pairs.emplace_back(load_png(resolve(pair.at("blurry").get<std::string>())),
                            load_png(resolve(pair.at("sharp").get<std::string>())));
  }
  if (data.pairs.empty()) {
    throw std::runtime_error("Dataset: manifest has no pairs: " + config.paired_manifest);
  }
  return data;
}

namespace {

struct CropPlan {
  std::size_t index = 0;
  int x0 = 0;
  int y0 = 0;
  bool flip_h = false;
  bool flip_v = false;
};

// The pool index is drawn first so the crop window can adapt to that
// image's size.
CropPlan draw_crop_plan(std::mt19937_64& eng, std::size_t pool_size,
                        const std::function<Shape(std::size_t)>& shape_of, int crop) {
  CropPlan plan;
  plan.index = std::uniform_int_distribution<std::size_t>(0, pool_size - 1)(eng);
  const Shape image = shape_of(plan.index);
  if (image.h < crop || image.w < crop) {
    throw std::invalid_argument("make_batch: image " + image.str() +
                                " smaller than crop " + std::to_string(crop));
  }
  plan.x0 = std::uniform_int_distribution<int>(0, image.w - crop)(eng);
  plan.y0 = std::uniform_int_distribution<int>(0, image.h - crop)(eng);
  plan.flip_h = std::uniform_real_distribution<float>(0.0f, 1.0f)(eng) < 0.5f;
  plan.flip_v = std::uniform_real_distribution<float>(0.0f, 1.0f)(eng) < 0.5f;
  return plan;
}

// Copies a flipped crop of src (1x3xHxW) into dst at batch position item.
void copy_crop(const Tensor& src, const CropPlan& plan, int crop, float* dst_base,
               std::size_t item) {
  const Shape s = src.shape();
  const auto values = src.values();
  const std::size_t src_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t dst_plane = static_cast<std::size_t>(crop) * crop;
  float* dst = dst_base + item * 3 * dst_plane;
  for (int c = 0; c < 3; ++c) {
    const float* sp = values.data() + static_cast<std::size_t>(c) * src_plane;
    float* dp = dst + static_cast<std::size_t>(c) * dst_plane;
    for (int y = 0; y < crop; ++y) {
      const int sy = plan.y0 + (plan.flip_v ? crop - 1 - y : y);
      const float* row = sp + static_cast<std::size_t>(sy) * s.w;
      for (int x = 0; x < crop; ++x) {
        const int sx = plan.x0 + (plan.flip_h ? crop - 1 - x : x);
        dp[static_cast<std::size_t>(y) * crop + x] = row[sx];
      }
    }
  }
}

constexpr std::uint64_t kMixBatchTag = 0x6d6978ULL;  // distinct stream per purpose

}  // namespace

Batch make_batch(const Dataset& dataset, const TrainConfig& config, std::uint64_t step_seed) {
  const int crop = config.crop;
  const std::size_t n = static_cast<std::size_t>(config.batch_size);
  const std::size_t plane = static_cast<std::size_t>(crop) * crop;
  const std::uint64_t base = rng::mix(config.seed, step_seed);

  Batch batch;
  std::vector<float> inputs(n * 3 * plane);

  if (config.stage == Stage::Bgan) {
    if (dataset.sharp.empty()) throw std::invalid_argument("make_batch: empty sharp pool");
    if (dataset.blurry.empty()) {
      throw std::invalid_argument("make_batch: missing real-blurry pool for the bgan stage");
    }
    std::vector<float> reals(n * 3 * plane);
    for (std::size_t i = 0; i < n; ++i) {
      auto eng = rng::engine(rng::mix(base, i));
      const CropPlan sharp_plan = draw_crop_plan(
          eng, dataset.sharp.size(),
          [&dataset](std::size_t idx) { return dataset.sharp[idx].shape(); }, crop);
      copy_crop(dataset.sharp[sharp_plan.index], sharp_plan, crop, inputs.data(), i);

      const CropPlan blur_plan = draw_crop_plan(
          eng, dataset.blurry.size(),
          [&dataset](std::size_t idx) { return dataset.blurry[idx].shape(); }, crop);
      copy_crop(dataset.blurry[blur_plan.index], blur_plan, crop, reals.data(), i);

      batch.noise.push_back(make_noise_map(eng(), 4, crop, crop));
      batch.provenance.push_back(Batch::Source::RealPair);
    }
    batch.inputs = Tensor::from_data(Shape{static_cast<int>(n), 3, crop, crop}, std::move(inputs));
    batch.real_blurry =
        Tensor::from_data(Shape{static_cast<int>(n), 3, crop, crop}, std::move(reals));
    return batch;
  }

  if (dataset.pairs.empty()) throw std::invalid_argument("make_batch: empty paired pool");
  std::vector<float> targets(n * 3 * plane);
  for (std::size_t i = 0; i < n; ++i) {
    auto eng = rng::engine(rng::mix(base, i));
    const CropPlan plan = draw_crop_plan(
        eng, dataset.pairs.size(),
        [&dataset](std::size_t idx) { return dataset.pairs[idx].first.shape(); }, crop);
    const auto& [blurry, sharp] = dataset.pairs[plan.index];
    if (!(blurry.shape() == sharp.shape())) {
      throw std::invalid_argument("make_batch: pair images have different shapes");
    }
    copy_crop(blurry, plan, crop, inputs.data(), i);
    copy_crop(sharp, plan, crop, targets.data(), i);
    batch.provenance.push_back(Batch::Source::RealPair);
  }
  batch.inputs = Tensor::from_data(Shape{static_cast<int>(n), 3, crop, crop}, std::move(inputs));
  batch.targets = Tensor::from_data(Shape{static_cast<int>(n), 3, crop, crop}, std::move(targets));
  return batch;
}

Batch mix_synthetic_batch(const Dataset& dataset, const ParamStore& bgan_params,
                          const NetworkSpec& bgan_spec, const TrainConfig& config,
                          std::uint64_t step_seed) {
  if (dataset.pairs.empty()) {
    throw std::invalid_argument("mix_synthetic_batch: empty paired pool");
  }
  const int crop = config.crop;
  const std::size_t n = static_cast<std::size_t>(config.batch_size);
  const std::size_t plane = static_cast<std::size_t>(crop) * crop;
  const std::uint64_t base = rng::mix(rng::mix(config.seed, step_seed), kMixBatchTag);

  Batch batch;
  std::vector<float> inputs(n * 3 * plane);
  std::vector<float> targets(n * 3 * plane);
  for (std::size_t i = 0; i < n; ++i) {
    auto eng = rng::engine(rng::mix(base, i));
    const CropPlan plan = draw_crop_plan(
        eng, dataset.pairs.size(),
        [&dataset](std::size_t idx) { return dataset.pairs[idx].first.shape(); }, crop);
    const bool synthetic =
        std::uniform_real_distribution<float>(0.0f, 1.0f)(eng) < config.mix_ratio;
    const auto& [blurry, sharp] = dataset.pairs[plan.index];
    copy_crop(sharp, plan, crop, targets.data(), i);
    if (synthetic) {
      std::vector<float> sharp_crop(3 * plane);
      copy_crop(sharp, plan, crop, sharp_crop.data(), 0);
      Tensor sharp_item = Tensor::from_data(Shape{1, 3, crop, crop}, std::move(sharp_crop));
      const NoiseMap noise = make_noise_map(eng(), bgan_spec.noise_channels, crop, crop);
      Tape scratch;
      Tensor generated =
          bgan_generator_forward(scratch, sharp_item, noise.to_tensor(), bgan_params, bgan_spec);
      std::copy_n(generated.values().data(), 3 * plane, inputs.data() + i * 3 * plane);
      batch.provenance.push_back(Batch::Source::BganGenerated);
    } else {
      copy_crop(blurry, plan, crop, inputs.data(), i);
      batch.provenance.push_back(Batch::Source::RealPair);
    }
  }
  batch.inputs = Tensor::from_data(Shape{static_cast<int>(n), 3, crop, crop}, std::move(inputs));
  batch.targets = Tensor::from_data(Shape{static_cast<int>(n), 3, crop, crop}, std::move(targets));
  return batch;
}

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState state;
  state.g_spec = config.generator_spec();
  state.d_spec = config.discriminator_spec();
  state.generator = init_params(state.g_spec, rng::mix(config.seed, 0x47ULL));
  state.discriminator = init_params(state.d_spec, rng::mix(config.seed, 0x44ULL));
  state.feat = make_feature_extractor(config.feat_seed());
  state.lr = config.lr_start;
  state.best_window = std::numeric_limits<double>::infinity();

  if (config.stage == Stage::DbganPlus) {
    if (config.bgan_checkpoint.empty()) {
      throw std::runtime_error("init_train_state: dbgan_plus needs a trained BGAN checkpoint");
    }
    const Checkpoint ckpt = load_checkpoint(config.bgan_checkpoint);
    state.bgan_spec = NetworkSpec::bgan_generator(config.preset());
    state.bgan_generator = checked_store(ckpt, "generator", state.bgan_spec);
    state.bgan_generator.set_requires_grad(false);
    state.has_bgan = true;
  }
  return state;
}

namespace {

LossReport d_update_report(float loss) {
  LossReport report;
  report.stage = LossStage::DUpdate;
  report.adversarial = loss;
  report.total = loss;
  return report;
}

}  // namespace

StepReports train_bgan_step(TrainState& state, const Batch& batch, const TrainConfig& config) {
  if (!batch.real_blurry.defined()) {
    throw std::invalid_argument("train_bgan_step: batch has no real-blurry pool sample");
  }
  if (batch.noise.size() != static_cast<std::size_t>(batch.inputs.shape().n)) {
    throw std::invalid_argument("train_bgan_step: batch is missing per-item noise maps");
  }
  const Tensor noise = stack_noise_maps(batch.noise);

  // Discriminator update on detached fakes.
  Tensor fake_images;
  {
    Tape scratch;
    fake_images = detach(
        bgan_generator_forward(scratch, batch.inputs, noise, state.generator, state.g_spec));
  }
  float d_loss_value = 0.0f;
  {
    Tape tape;
    Tensor real_logits =
        discriminator_forward(tape, batch.real_blurry, state.discriminator, state.d_spec).logits;
    Tensor fake_logits =
        discriminator_forward(tape, fake_images, state.discriminator, state.d_spec).logits;
    Tensor d_loss = relativistic_loss(tape, real_logits, fake_logits, AdvRole::Discriminator);
    state.discriminator.zero_grads();
    tape.backward(d_loss);
    optimizer_step(state.discriminator, state.d_opt, state.lr);
    d_loss_value = d_loss.item();
  }

  // Generator update: perceptual against the sharp inputs plus beta * RBL.
  LossReport g_report;
  {
    Tape tape;
    Tensor generated =
        bgan_generator_forward(tape, batch.inputs, noise, state.generator, state.g_spec);
    Tensor perc = perceptual_loss(tape, generated, batch.inputs, state.feat);
    Tensor real_logits =
        discriminator_forward(tape, batch.real_blurry, state.discriminator, state.d_spec).logits;
    Tensor fake_logits =
        discriminator_forward(tape, generated, state.discriminator, state.d_spec).logits;
    Tensor rbl = relativistic_loss(tape, real_logits, fake_logits, AdvRole::Generator);
    Tensor total = add(tape, perc, mul_scalar(tape, rbl, config.weights.beta));
    state.generator.zero_grads();
    state.discriminator.zero_grads();
    tape.backward(total);
    optimizer_step(state.generator, state.g_opt, state.lr);
    g_report = combined_bgan_loss(perc.item(), rbl.item(), config.weights);
  }
  return StepReports{d_update_report(d_loss_value), g_report, "rbl"};
}

StepReports train_dbgan_step(TrainState& state, const Batch& batch, const TrainConfig& config) {
  if (!batch.targets.defined()) {
    throw std::invalid_argument("train_dbgan_step: batch is unpaired (no sharp targets)");
  }
  const bool relativistic = config.ablation != AblationVariant::DbganMinus;

  Tensor fake_images;
  {
    Tape scratch;
    fake_images =
        detach(dbgan_generator_forward(scratch, batch.inputs, state.generator, state.g_spec));
  }
  float d_loss_value = 0.0f;
  {
    Tape tape;
    Tensor real_logits =
        discriminator_forward(tape, batch.targets, state.discriminator, state.d_spec).logits;
    Tensor fake_logits =
        discriminator_forward(tape, fake_images, state.discriminator, state.d_spec).logits;
    Tensor d_loss = relativistic
                        ? relativistic_loss(tape, real_logits, fake_logits, AdvRole::Discriminator)
                        : standard_adv_loss(tape, real_logits, fake_logits, AdvRole::Discriminator);
    state.discriminator.zero_grads();
    tape.backward(d_loss);
    optimizer_step(state.discriminator, state.d_opt, state.lr);
    d_loss_value = d_loss.item();
  }

  LossReport g_report;
  {
    Tape tape;
    Tensor generated = dbgan_generator_forward(tape, batch.inputs, state.generator, state.g_spec);
    Tensor perc = perceptual_loss(tape, generated, batch.targets, state.feat);
    Tensor content = content_loss(tape, generated, batch.targets, config.content_mode);
    Tensor fake_logits =
        discriminator_forward(tape, generated, state.discriminator, state.d_spec).logits;
    Tensor adv;
    if (relativistic) {
      Tensor real_logits =
          discriminator_forward(tape, batch.targets, state.discriminator, state.d_spec).logits;
      adv = relativistic_loss(tape, real_logits, fake_logits, AdvRole::Generator);
    } else {
      adv = standard_adv_loss(tape, Tensor{}, fake_logits, AdvRole::Generator);
    }
    Tensor total = add(tape, perc,
                       add(tape, mul_scalar(tape, content, config.weights.alpha),
                           mul_scalar(tape, adv, config.weights.beta)));
    state.generator.zero_grads();
    state.discriminator.zero_grads();
    tape.backward(total);
    optimizer_step(state.generator, state.g_opt, state.lr);
    g_report = combined_dbgan_loss(perc.item(), content.item(), adv.item(), config.weights);
  }
  return StepReports{d_update_report(d_loss_value), g_report,
                     relativistic ? "rdbl" : "standard_adv"};
}

namespace {

constexpr int kCheckpointFormat = 1;

void store_optimizer_arrays(Checkpoint& ckpt, const std::string& name,
                            const OptimizerState& opt) {
  for (const auto& [path, m] : opt.first_moment) {
    ckpt.arrays["opt/" + name + "/" + path + "/m"] = {
        Shape{1, 1, 1, static_cast<int>(m.size())}, m};
  }
  for (const auto& [path, v] : opt.second_moment) {
    ckpt.arrays["opt/" + name + "/" + path + "/v"] = {
        Shape{1, 1, 1, static_cast<int>(v.size())}, v};
  }
}

void load_optimizer_arrays(const Checkpoint& ckpt, const std::string& name, OptimizerState& opt) {
  const std::string prefix = "opt/" + name + "/";
  for (const auto& [key, entry] : ckpt.arrays) {
    if (!key.starts_with(prefix)) continue;
    const std::string rest = key.substr(prefix.size());
    if (rest.size() < 2) continue;
    const std::string param = rest.substr(0, rest.size() - 2);
    if (rest.ends_with("/m")) {
      opt.first_moment[param] = entry.second;
    } else if (rest.ends_with("/v")) {
      opt.second_moment[param] = entry.second;
    }
  }
}

}  // namespace

void save_train_checkpoint(const std::string& path, const TrainState& state,
                           const TrainConfig& config) {
  Checkpoint ckpt;
  ckpt.stores["generator"] = state.generator;
  ckpt.stores["discriminator"] = state.discriminator;
  if (state.has_bgan) ckpt.stores["bgan_generator"] = state.bgan_generator;

  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  ckpt.metadata = nlohmann::json{
      {"format", kCheckpointFormat},
      {"stage", stage_name(config.stage)},
      {"ablation", ablation_name(config.ablation)},
      {"step", state.step},
      {"seed", config.seed},
      {"lr", state.lr},
      {"loss_weights", {{"alpha", config.weights.alpha}, {"beta", config.weights.beta}}},
      {"config_hash", std::string(hash_hex)},
      {"feat_seed", config.feat_seed()},
      {"specs",
       {{"generator", state.g_spec.to_json()}, {"discriminator", state.d_spec.to_json()}}},
      {"opt",
       {{"generator", {{"step_count", state.g_opt.step_count}}},
        {"discriminator", {{"step_count", state.d_opt.step_count}}}}},
      {"anneal",
       {{"window_sum", state.window_sum},
        {"window_count", state.window_count},
        {"best_window", state.has_best ? state.best_window : 0.0},
        {"has_best", state.has_best},
        {"bad_windows", state.bad_windows},
        {"stopped", state.stopped}}}};
  store_optimizer_arrays(ckpt, "generator", state.g_opt);
  store_optimizer_arrays(ckpt, "discriminator", state.d_opt);
  save_checkpoint(path, ckpt);
}

TrainState load_train_checkpoint(const std::string& path, const TrainConfig& config) {
  config.validate();
  const Checkpoint ckpt = load_checkpoint(path);

  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  const std::string stored = ckpt.metadata.value("config_hash", std::string());
  if (stored != hash_hex) {
    throw std::runtime_error("resume: checkpoint was produced by a different config (hash " +
                             stored + " vs " + hash_hex + ")");
  }

  TrainState state;
  state.g_spec = config.generator_spec();
  state.d_spec = config.discriminator_spec();
  state.generator = checked_store(ckpt, "generator", state.g_spec);
  state.discriminator = checked_store(ckpt, "discriminator", state.d_spec);
  state.generator.set_requires_grad(true);
  state.discriminator.set_requires_grad(true);
  state.feat = make_feature_extractor(ckpt.metadata.at("feat_seed").get<std::uint64_t>());
  state.step = ckpt.metadata.at("step").get<std::int64_t>();
  state.lr = ckpt.metadata.at("lr").get<float>();

  const auto& anneal = ckpt.metadata.at("anneal");
  state.window_sum = anneal.at("window_sum").get<double>();
  state.window_count = anneal.at("window_count").get<std::int64_t>();
  state.has_best = anneal.at("has_best").get<bool>();
  state.best_window =
      state.has_best ? anneal.at("best_window").get<double>() : std::numeric_limits<double>::infinity();
  state.bad_windows = anneal.at("bad_windows").get<int>();
  state.stopped = anneal.at("stopped").get<bool>();

  state.g_opt.step_count = ckpt.metadata.at("opt").at("generator").at("step_count").get<std::int64_t>();
  state.d_opt.step_count =
      ckpt.metadata.at("opt").at("discriminator").at("step_count").get<std::int64_t>();
  load_optimizer_arrays(ckpt, "generator", state.g_opt);
  load_optimizer_arrays(ckpt, "discriminator", state.d_opt);

  if (config.stage == Stage::DbganPlus) {
    state.bgan_spec = NetworkSpec::bgan_generator(config.preset());
    state.bgan_generator = checked_store(ckpt, "bgan_generator", state.bgan_spec);
    state.bgan_generator.set_requires_grad(false);
    state.has_bgan = true;
  }
  return state;
}

TrainResult run_training(const TrainConfig& config) {
  config.validate();
  const Dataset dataset = Dataset::load(config);
  fs::create_directories(config.out_dir);

  TrainState state;
  const bool resuming = !config.resume_from.empty();
  if (resuming) {
    state = load_train_checkpoint(config.resume_from, config);
  } else {
    state = init_train_state(config);
  }

  const std::string csv_path = (fs::path(config.out_dir) / "metrics.csv").string();
  std::ofstream csv;
  if (resuming && fs::exists(csv_path)) {
    csv.open(csv_path, std::ios::app);
  } else {
    csv.open(csv_path, std::ios::trunc);
    csv << "step,stage,lr,perceptual,content,adversarial,total\n";
  }
  if (!csv) throw std::runtime_error("run_training: cannot open " + csv_path);
  csv.precision(9);

  auto ckpt_path = [&config](std::int64_t step) {
    return (fs::path(config.out_dir) /
            ("ckpt_" + stage_name(config.stage) + "_" + std::to_string(step) + ".rblb"))
        .string();
  };

  auto write_row = [&csv, &state](std::int64_t step, const LossReport& report) {
    csv << step << "," << loss_stage_name(report.stage) << "," << state.lr << ","
        << report.perceptual << "," << report.content << "," << report.adversarial << ","
        << report.total << "\n";
  };

  while (state.step < config.max_steps && !state.stopped) {
    Batch batch;
    if (config.stage == Stage::DbganPlus) {
      batch = mix_synthetic_batch(dataset, state.bgan_generator, state.bgan_spec, config,
                                  static_cast<std::uint64_t>(state.step));
    } else {
      batch = make_batch(dataset, config, static_cast<std::uint64_t>(state.step));
    }

    StepReports reports;
    if (config.stage == Stage::Bgan) {
      reports = train_bgan_step(state, batch, config);
    } else {
      reports = train_dbgan_step(state, batch, config);
    }
    write_row(state.step, reports.d_update);
    write_row(state.step, reports.g_update);
    state.step += 1;

    // Windowed-mean annealing: drop the lr by 10x after anneal_patience
    // windows without improvement; at the floor, stop instead.
    state.window_sum += reports.g_update.total;
    state.window_count += 1;
    if (state.window_count >= config.anneal_window) {
      const double mean = state.window_sum / static_cast<double>(state.window_count);
      if (!state.has_best || mean < state.best_window) {
        state.best_window = mean;
        state.has_best = true;
        state.bad_windows = 0;
      } else {
        state.bad_windows += 1;
        if (state.bad_windows >= config.anneal_patience) {
          if (state.lr > config.lr_end) {
            state.lr = std::max(state.lr * 0.1f, config.lr_end);
            state.bad_windows = 0;
          } else {
            state.stopped = true;
          }
        }
      }
      state.window_sum = 0.0;
      state.window_count = 0;
    }

    if (config.ckpt_every > 0 && state.step % config.ckpt_every == 0 &&
        state.step < config.max_steps) {
      save_train_checkpoint(ckpt_path(state.step), state, config);
    }
  }

  const std::string final_path = ckpt_path(state.step);
  save_train_checkpoint(final_path, state, config);
  csv.flush();
  return TrainResult{final_path, csv_path, state.step, state.lr};
}

}  // namespace rblb
