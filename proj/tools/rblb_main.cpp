#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rblb/blur.hpp"
#include "rblb/checkpoint.hpp"
#include "rblb/gradcheck_suite.hpp"
#include "rblb/image_io.hpp"
#include "rblb/metrics.hpp"
#include "rblb/models.hpp"
#include "rblb/ops.hpp"
#include "rblb/random.hpp"
#include "rblb/training.hpp"

namespace fs = std::filesystem;

namespace {

struct BlurArgs {
  std::string mode = "average";
  std::string input;
  std::string output;
  int window = 7;
  float gamma = 2.2f;
  int kernel_length = 5;
  float kernel_angle = -1.0f;  // < 0: per-image random angle
  float noise_std = 0.0f;
  std::uint64_t seed = 0;
};

int run_blur(const BlurArgs& args) {
  fs::create_directories(args.output);
  nlohmann::json manifest{{"sequence", args.input},
                          {"window", args.window},
                          {"gamma", args.gamma},
                          {"mode", args.mode},
                          {"pairs", nlohmann::json::array()}};
  const auto frames = rblb::list_pngs(args.input);
  if (frames.empty()) {
    throw std::runtime_error("blur: no PNG frames in " + args.input);
  }

  auto emit_pair = [&](int index, const rblb::Tensor& blurry, const rblb::Tensor& sharp) {
    char name[32];
    std::snprintf(name, sizeof(name), "blurry_%04d.png", index);
    const std::string blurry_name = name;
    std::snprintf(name, sizeof(name), "sharp_%04d.png", index);
    const std::string sharp_name = name;
    rblb::save_png((fs::path(args.output) / blurry_name).string(), blurry);
    rblb::save_png((fs::path(args.output) / sharp_name).string(), sharp);
    manifest["pairs"].push_back({{"blurry", blurry_name}, {"sharp", sharp_name}});
  };

  if (args.mode == "average") {
    if (args.window < 1) throw std::runtime_error("blur: window must be >= 1");
    const rblb::CrfParams crf{args.gamma};
    int index = 0;
    for (std::size_t start = 0; start + args.window <= frames.size();
         start += static_cast<std::size_t>(args.window)) {
      std::vector<rblb::Tensor> window_frames;
      for (int i = 0; i < args.window; ++i) {
        window_frames.push_back(rblb::load_png(frames[start + i]));
      }
      const rblb::Tensor blurry = rblb::average_blur(window_frames, crf);
      const rblb::Tensor& sharp = window_frames[static_cast<std::size_t>(args.window) / 2];
      emit_pair(index++, blurry, sharp);
    }
    if (index == 0) {
      throw std::runtime_error("blur: sequence shorter than one window of " +
                               std::to_string(args.window) + " frames");
    }
  } else if (args.mode == "kernel") {
    int index = 0;
    for (const auto& path : frames) {
      const rblb::Tensor sharp = rblb::load_png(path);
      const std::uint64_t image_seed = rblb::rng::mix(args.seed, static_cast<std::uint64_t>(index));
      float angle = args.kernel_angle;
      if (angle < 0.0f) {
        auto eng = rblb::rng::engine(rblb::rng::mix(image_seed, 0xa51eULL));
        angle = std::uniform_real_distribution<float>(0.0f, 180.0f)(eng);
      }
      const rblb::BlurKernelSpec spec =
          rblb::gen_linear_kernel(args.kernel_length, angle, args.noise_std);
      emit_pair(index, rblb::kernel_blur(sharp, spec, image_seed), sharp);
      ++index;
    }
  } else {
    throw std::runtime_error("blur: unknown mode " + args.mode);
  }

  std::ofstream out(fs::path(args.output) / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("blur: cannot write manifest");
  std::cout << "wrote " << manifest["pairs"].size() << " pair(s) to " << args.output << "\n";
  return 0;
}

int run_deblur(const std::string& checkpoint, const std::string& input,
               const std::string& output) {
  const rblb::Checkpoint ckpt = rblb::load_checkpoint(checkpoint);
  const rblb::NetworkSpec spec =
      rblb::NetworkSpec::from_json(ckpt.metadata.at("specs").at("generator"));
  if (spec.kind != rblb::NetKind::DbganGenerator) {
    throw std::runtime_error("deblur: checkpoint does not hold a deblur generator");
  }
  const rblb::ParamStore& params = rblb::checked_store(ckpt, "generator", spec);

  fs::create_directories(output);
  const auto inputs = rblb::list_pngs(input);
  if (inputs.empty()) throw std::runtime_error("deblur: no PNG files in " + input);
  for (const auto& path : inputs) {
    const rblb::Tensor blurry = rblb::load_png(path);
    rblb::Tape tape;  // parameters are frozen, so nothing records
    const rblb::Tensor restored = rblb::dbgan_generator_forward(tape, blurry, params, spec);
    rblb::save_png((fs::path(output) / fs::path(path).filename()).string(), restored);
  }
  std::cout << "deblurred " << inputs.size() << " image(s) into " << output << "\n";
  return 0;
}

int run_eval(const std::string& input, const std::string& target, const std::string& csv,
             double peak) {
  const rblb::EvalSummary summary = rblb::evaluate_dirs(input, target, peak);
  if (!csv.empty()) rblb::write_eval_csv(csv, summary);
  std::printf("images: %zu  mean PSNR: %.4f dB  mean SSIM: %.6f\n", summary.rows.size(),
              summary.aggregate.psnr_db, summary.aggregate.ssim);
  return 0;
}

int run_gradcheck(std::uint64_t seed, int instances) {
  const auto cases = rblb::run_gradcheck_suite(seed, instances);
  for (const auto& c : cases) {
    std::printf("%-28s max rel err %.3e (tol %.0e) %s\n", c.name.c_str(),
                static_cast<double>(c.worst), static_cast<double>(c.tolerance),
                c.passed ? "ok" : "FAIL");
  }
  return rblb::all_passed(cases) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rblb: blur-then-deblur GAN pipeline"};
  app.require_subcommand(1);

  BlurArgs blur_args;
  auto* blur_cmd = app.add_subcommand("blur", "Synthesize blurry/sharp training pairs");
  blur_cmd->add_option("--mode", blur_args.mode, "average | kernel")
      ->check(CLI::IsMember({"average", "kernel"}));
  blur_cmd->add_option("--input", blur_args.input, "Directory of PNG frames")->required();
  blur_cmd->add_option("--output", blur_args.output, "Output directory")->required();
  blur_cmd->add_option("--window", blur_args.window, "Frames per average (M)");
  blur_cmd->add_option("--gamma", blur_args.gamma, "CRF gamma");
  blur_cmd->add_option("--kernel-length", blur_args.kernel_length, "Line PSF length (odd)");
  blur_cmd->add_option("--kernel-angle", blur_args.kernel_angle,
                       "Line PSF angle in degrees (omit for per-image random)");
  blur_cmd->add_option("--noise-std", blur_args.noise_std, "Additive Gaussian noise std");
  blur_cmd->add_option("--seed", blur_args.seed, "RNG seed");

  std::string train_config_path;
  rblb::TrainConfig cli_cfg;
  std::string stage_str, ablation_str;
  auto* train_cmd = app.add_subcommand("train", "Run one training stage");
  train_cmd->add_option("--config", train_config_path, "JSON config file");
  auto* stage_opt = train_cmd->add_option("--stage", stage_str, "bgan | dbgan | dbgan-plus");
  auto* ablation_opt =
      train_cmd->add_option("--ablation", ablation_str, "dbgan-minus | dbgan | dbgan-plus");
  auto* seed_opt = train_cmd->add_option("--seed", cli_cfg.seed, "RNG seed");
  auto* steps_opt = train_cmd->add_option("--max-steps", cli_cfg.max_steps, "Step budget");
  auto* batch_opt = train_cmd->add_option("--batch-size", cli_cfg.batch_size, "Mini-batch size");
  auto* crop_opt = train_cmd->add_option("--crop", cli_cfg.crop, "Training crop size");
  auto* lr_start_opt = train_cmd->add_option("--lr-start", cli_cfg.lr_start, "Initial lr");
  auto* lr_end_opt = train_cmd->add_option("--lr-end", cli_cfg.lr_end, "Final lr floor");
  auto* alpha_opt = train_cmd->add_option("--alpha", cli_cfg.weights.alpha, "Content weight");
  auto* beta_opt = train_cmd->add_option("--beta", cli_cfg.weights.beta, "Adversarial weight");
  auto* mix_opt = train_cmd->add_option("--mix-ratio", cli_cfg.mix_ratio,
                                        "Synthetic fraction (dbgan-plus)");
  auto* sharp_opt = train_cmd->add_option("--sharp-dir", cli_cfg.sharp_dir, "Sharp pool (bgan)");
  auto* blurry_opt =
      train_cmd->add_option("--blurry-dir", cli_cfg.blurry_dir, "Real-blurry pool (bgan)");
  auto* manifest_opt = train_cmd->add_option("--paired-manifest", cli_cfg.paired_manifest,
                                             "Pair manifest (dbgan stages)");
  auto* bgan_ckpt_opt = train_cmd->add_option("--bgan-checkpoint", cli_cfg.bgan_checkpoint,
                                              "Trained BGAN checkpoint (dbgan-plus)");
  auto* out_opt = train_cmd->add_option("--out", cli_cfg.out_dir, "Output directory");
  auto* resume_opt = train_cmd->add_option("--resume", cli_cfg.resume_from, "Resume checkpoint");
  auto* ckpt_every_opt =
      train_cmd->add_option("--ckpt-every", cli_cfg.ckpt_every, "Checkpoint cadence");
  bool paper_scale = false;
  auto* paper_flag = train_cmd->add_flag("--paper-scale", paper_scale,
                                         "Use the full-size architecture preset");

  std::string deblur_ckpt, deblur_in, deblur_out;
  auto* deblur_cmd = app.add_subcommand("deblur", "Restore a directory of blurry PNGs");
  deblur_cmd->add_option("--checkpoint", deblur_ckpt, "DBGAN checkpoint")->required();
  deblur_cmd->add_option("--input", deblur_in, "Blurry input directory")->required();
  deblur_cmd->add_option("--output", deblur_out, "Restored output directory")->required();

  std::string eval_in, eval_target, eval_csv;
  double eval_peak = 1.0;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM against a target directory");
  eval_cmd->add_option("--input", eval_in, "Output/restored directory")->required();
  eval_cmd->add_option("--target", eval_target, "Ground-truth directory")->required();
  eval_cmd->add_option("--csv", eval_csv, "Per-image metrics CSV path");
  eval_cmd->add_option("--peak", eval_peak, "PSNR peak value (1.0 or 255)");

  std::uint64_t gradcheck_seed = 0;
  int gradcheck_instances = 20;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Run the finite-difference suites");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "RNG seed");
  gradcheck_cmd->add_option("--instances", gradcheck_instances, "Random instances per case");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*blur_cmd) return run_blur(blur_args);
    if (*train_cmd) {
      rblb::TrainConfig cfg;
      if (!train_config_path.empty()) {
        std::ifstream in(train_config_path);
        if (!in) throw std::runtime_error("train: cannot open config " + train_config_path);
        nlohmann::json j;
        in >> j;
        cfg = rblb::TrainConfig::from_json(j);
      }
      // CLI flags override file values.
      if (*stage_opt) cfg.stage = rblb::stage_from_name(stage_str);
      if (*ablation_opt) cfg.ablation = rblb::ablation_from_name(ablation_str);
      if (*seed_opt) cfg.seed = cli_cfg.seed;
      if (*steps_opt) cfg.max_steps = cli_cfg.max_steps;
      if (*batch_opt) cfg.batch_size = cli_cfg.batch_size;
      if (*crop_opt) cfg.crop = cli_cfg.crop;
      if (*lr_start_opt) cfg.lr_start = cli_cfg.lr_start;
      if (*lr_end_opt) cfg.lr_end = cli_cfg.lr_end;
      if (*alpha_opt) cfg.weights.alpha = cli_cfg.weights.alpha;
      if (*beta_opt) cfg.weights.beta = cli_cfg.weights.beta;
      if (*mix_opt) cfg.mix_ratio = cli_cfg.mix_ratio;
      if (*sharp_opt) cfg.sharp_dir = cli_cfg.sharp_dir;
      if (*blurry_opt) cfg.blurry_dir = cli_cfg.blurry_dir;
      if (*manifest_opt) cfg.paired_manifest = cli_cfg.paired_manifest;
      if (*bgan_ckpt_opt) cfg.bgan_checkpoint = cli_cfg.bgan_checkpoint;
      if (*out_opt) cfg.out_dir = cli_cfg.out_dir;
      if (*resume_opt) cfg.resume_from = cli_cfg.resume_from;
      if (*ckpt_every_opt) cfg.ckpt_every = cli_cfg.ckpt_every;
      if (*paper_flag) cfg.desk_scale = !paper_scale;
      const rblb::TrainResult result = rblb::run_training(cfg);
      std::cout << "trained " << result.steps_run << " step(s); final lr " << result.final_lr
                << "; checkpoint " << result.final_checkpoint << "\n";
      return 0;
    }
    if (*deblur_cmd) return run_deblur(deblur_ckpt, deblur_in, deblur_out);
    if (*eval_cmd) return run_eval(eval_in, eval_target, eval_csv, eval_peak);
    if (*gradcheck_cmd) return run_gradcheck(gradcheck_seed, gradcheck_instances);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
