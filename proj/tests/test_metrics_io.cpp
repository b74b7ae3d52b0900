#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "rblb/image_io.hpp"
#include "rblb/metrics.hpp"
#include "test_util.hpp"

using namespace rblb;

namespace {

Tensor random_image(std::uint64_t seed, const Shape& s) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> values(static_cast<std::size_t>(s.numel()));
  for (auto& v : values) v = dist(eng);
  return Tensor::from_data(s, std::move(values));
}

void write_gray_png(const std::string& path, int extent) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, extent, extent, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(extent), 128);
  for (int y = 0; y < extent; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

TEST_CASE("psnr closed forms") {
  const Tensor x = random_image(70, Shape{1, 3, 8, 8});
  CHECK(psnr(x, x) == 100.0);

  Tensor shifted = Tensor::from_data(x.shape(),
                                     std::vector<float>(x.values().begin(), x.values().end()));
  for (auto& v : shifted.values_mut()) v += 0.1f;
  CHECK(psnr(shifted, x) == doctest::Approx(20.0).epsilon(1e-5));

  // 8-bit domain: MSE of 100 against peak 255.
  Tensor a = Tensor::zeros(Shape{1, 1, 2, 2});
  Tensor b = Tensor::full(Shape{1, 1, 2, 2}, 10.0f);
  CHECK(psnr(a, b, 255.0) == doctest::Approx(28.13).epsilon(0.0005));

  CHECK_THROWS_AS(psnr(x, Tensor::zeros(Shape{1, 3, 4, 4})), std::invalid_argument);
}

TEST_CASE("psnr is symmetric and decreases with noise amplitude") {
  const Tensor x = random_image(71, Shape{1, 3, 16, 16});
  std::mt19937_64 eng(72);
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
  std::vector<float> noise(static_cast<std::size_t>(x.numel()));
  for (auto& v : noise) v = unit(eng);

  double previous = 1e9;
  for (float amplitude : {0.01f, 0.02f, 0.05f, 0.1f, 0.2f}) {
    std::vector<float> corrupted(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < corrupted.size(); ++i) corrupted[i] += amplitude * noise[i];
    const Tensor y = Tensor::from_data(x.shape(), std::move(corrupted));
    const double forward = psnr(x, y);
    CHECK(forward == doctest::Approx(psnr(y, x)).epsilon(1e-12));
    CHECK(forward < previous);
    previous = forward;
  }
}

TEST_CASE("ssim closed forms and symmetry") {
  const Tensor x = random_image(73, Shape{1, 3, 16, 16});
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-6));

  // Mid-contrast pattern against its negative.
  std::vector<float> pattern(static_cast<std::size_t>(3) * 16 * 16);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    pattern[i] = 0.5f + 0.35f * std::sin(static_cast<float>(i) * 0.37f);
  }
  const Tensor p = Tensor::from_data(Shape{1, 3, 16, 16}, pattern);
  std::vector<float> inverted(pattern.size());
  for (std::size_t i = 0; i < pattern.size(); ++i) inverted[i] = 1.0f - pattern[i];
  const Tensor q = Tensor::from_data(Shape{1, 3, 16, 16}, std::move(inverted));
  CHECK(ssim(p, q) < 0.5);

  const Tensor y = random_image(74, Shape{1, 3, 16, 16});
  CHECK(std::fabs(ssim(x, y) - ssim(y, x)) <= 1e-9);

  CHECK_THROWS_AS(ssim(Tensor::zeros(Shape{1, 3, 4, 4}), Tensor::zeros(Shape{1, 3, 4, 4})),
                  std::invalid_argument);
}

TEST_CASE("png byte mapping and idempotent round trip") {
  testutil::TempDir dir("png");
  const std::string path = dir.str() + "/img.png";

  Tensor img = Tensor::zeros(Shape{1, 3, 2, 2});
  auto v = img.values_mut();
  v[0] = 0.0f;   // byte 0
  v[1] = 1.0f;   // byte 255
  v[2] = 0.5f;   // 127.5 rounds half away from zero to 128
  v[3] = 0.25f;  // 63.75 -> 64
  for (std::size_t i = 4; i < v.size(); ++i) v[i] = 0.75f;
  save_png(path, img);

  const Tensor loaded = load_png(path);
  REQUIRE(loaded.shape() == img.shape());
  CHECK(loaded.values()[0] == 0.0f);
  CHECK(loaded.values()[1] == 1.0f);
  CHECK(loaded.values()[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
  CHECK(loaded.values()[3] == doctest::Approx(64.0 / 255.0).epsilon(1e-7));

  // save -> load is stable once quantized.
  const std::string path2 = dir.str() + "/img2.png";
  save_png(path2, loaded);
  const Tensor again = load_png(path2);
  for (std::size_t i = 0; i < again.values().size(); ++i) {
    CHECK(again.values()[i] == loaded.values()[i]);
  }
}

TEST_CASE("png loader rejects unsupported inputs") {
  testutil::TempDir dir("png_bad");
  const std::string not_png = dir.str() + "/fake.png";
  std::ofstream out(not_png, std::ios::binary);
  out << "definitely not a png";
  out.close();
  CHECK_THROWS(load_png(not_png));

  const std::string gray = dir.str() + "/gray.png";
  write_gray_png(gray, 8);
  CHECK_THROWS_WITH_AS(load_png(gray), doctest::Contains("8-bit RGB"), std::runtime_error);

  CHECK_THROWS_AS(save_png(dir.str() + "/bad.png", Tensor::zeros(Shape{1, 1, 4, 4})),
                  std::invalid_argument);
  CHECK_THROWS(save_png("/nonexistent_dir_zzz/img.png", Tensor::zeros(Shape{1, 3, 2, 2})));
}

TEST_CASE("evaluate_dirs aggregates the per-image rows") {
  testutil::TempDir dir("eval");
  const std::string out_dir = dir.sub("out");
  const std::string target_dir = dir.sub("target");
  for (int i = 0; i < 4; ++i) {
    const Tensor target = testutil::smooth_image(80 + i, 16, 16);
    Tensor output = target.detached();
    if (i % 2 == 1) {
      for (auto& v : output.values_mut()) {
        v = std::clamp(v + 0.05f, 0.0f, 1.0f);
      }
    }
    const std::string name = "img_" + std::to_string(i) + ".png";
    save_png(out_dir + "/" + name, output);
    save_png(target_dir + "/" + name, target);
  }

  const EvalSummary summary = evaluate_dirs(out_dir, target_dir);
  REQUIRE(summary.rows.size() == 4);
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const auto& row : summary.rows) {
    psnr_sum += row.metrics.psnr_db;
    ssim_sum += row.metrics.ssim;
  }
  CHECK(std::fabs(summary.aggregate.psnr_db - psnr_sum / 4.0) <= 1e-9);
  CHECK(std::fabs(summary.aggregate.ssim - ssim_sum / 4.0) <= 1e-9);

  const std::string csv = dir.str() + "/metrics.csv";
  write_eval_csv(csv, summary);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "image,psnr_db,ssim");
}
