#include "rblb/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "rblb/image_io.hpp"

namespace rblb {

namespace {

constexpr double kPsnrCap = 100.0;
constexpr int kWindow = 8;

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

int env_threads() {
  const char* raw = std::getenv("RBLB_THREADS");
  if (!raw) return 0;
  const int v = std::atoi(raw);
  return v < 0 ? 0 : v;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  check_same_shape(a, b, "psnr");
  const auto av = a.values(), bv = b.values();
  double mse = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    mse += d * d;
  }
  mse /= static_cast<double>(av.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Tensor& a, const Tensor& b, double peak) {
  check_same_shape(a, b, "ssim");
  const Shape s = a.shape();
  if (s.h < kWindow || s.w < kWindow) {
    throw std::invalid_argument("ssim: image " + s.str() + " smaller than the " +
                                std::to_string(kWindow) + "x" + std::to_string(kWindow) +
                                " window");
  }
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const auto av = a.values(), bv = b.values();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;

  double total = 0.0;
  std::int64_t windows = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* pa = av.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      const float* pb = bv.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (int wy = 0; wy + kWindow <= s.h; wy += kWindow) {
        for (int wx = 0; wx + kWindow <= s.w; wx += kWindow) {
          double sum_a = 0.0, sum_b = 0.0, sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
          for (int y = 0; y < kWindow; ++y) {
            const float* ra = pa + static_cast<std::size_t>(wy + y) * s.w + wx;
            const float* rb = pb + static_cast<std::size_t>(wy + y) * s.w + wx;
            for (int x = 0; x < kWindow; ++x) {
              const double va = ra[x], vb = rb[x];
              sum_a += va;
              sum_b += vb;
              sum_aa += va * va;
              sum_bb += vb * vb;
              sum_ab += va * vb;
            }
          }
          const double count = kWindow * kWindow;
          const double mu_a = sum_a / count;
          const double mu_b = sum_b / count;
          const double var_a = sum_aa / count - mu_a * mu_a;
          const double var_b = sum_bb / count - mu_b * mu_b;
          const double cov = sum_ab / count - mu_a * mu_b;
          const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
          const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
          total += num / den;
          ++windows;
        }
      }
    }
  }
  return total / static_cast<double>(windows);
}

MetricResult evaluate_pair(const Tensor& output, const Tensor& target, double peak) {
  return MetricResult{psnr(output, target, peak), ssim(output, target, peak)};
}

EvalSummary evaluate_dirs(const std::string& output_dir, const std::string& target_dir,
                          double peak) {
  namespace fs = std::filesystem;
  const auto outputs = list_pngs(output_dir);
  if (outputs.empty()) {
    throw std::runtime_error("evaluate_dirs: no PNG files in " + output_dir);
  }

  EvalSummary summary;
  summary.rows.resize(outputs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      for (std::size_t i = next.fetch_add(1); i < outputs.size(); i = next.fetch_add(1)) {
        const fs::path out_path(outputs[i]);
        const fs::path target_path = fs::path(target_dir) / out_path.filename();
        if (!fs::exists(target_path)) {
          throw std::runtime_error("evaluate_dirs: no target for " +
                                   out_path.filename().string());
        }
        const Tensor out_img = load_png(out_path.string());
        const Tensor target_img = load_png(target_path.string());
        summary.rows[i] = EvalRow{out_path.filename().string(),
                                  evaluate_pair(out_img, target_img, peak)};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const int threads = env_threads();
  if (threads > 1) {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(summary.rows.begin(), summary.rows.end(),
            [](const EvalRow& a, const EvalRow& b) { return a.name < b.name; });
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const auto& row : summary.rows) {
    psnr_sum += row.metrics.psnr_db;
    ssim_sum += row.metrics.ssim;
  }
  summary.aggregate.psnr_db = psnr_sum / static_cast<double>(summary.rows.size());
  summary.aggregate.ssim = ssim_sum / static_cast<double>(summary.rows.size());
  return summary;
}

void write_eval_csv(const std::string& path, const EvalSummary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_eval_csv: cannot open " + path);
  out << "image,psnr_db,ssim\n";
  out.precision(17);
  for (const auto& row : summary.rows) {
    out << row.name << "," << row.metrics.psnr_db << "," << row.metrics.ssim << "\n";
  }
  out << "aggregate," << summary.aggregate.psnr_db << "," << summary.aggregate.ssim << "\n";
  if (!out) throw std::runtime_error("write_eval_csv: write failed for " + path);
}

}  // namespace rblb
