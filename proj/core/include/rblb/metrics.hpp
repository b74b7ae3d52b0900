#pragma once

#include <string>
#include <vector>

#include "rblb/tensor.hpp"

namespace rblb {

struct MetricResult {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// 10 * log10(peak^2 / MSE); exact matches report the 100 dB sentinel.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean over non-overlapping 8x8 windows and channels of the standard
/// luminance/contrast/structure product (population moments, uniform
/// windows). c1 = (0.01*peak)^2, c2 = (0.03*peak)^2.
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

MetricResult evaluate_pair(const Tensor& output, const Tensor& target, double peak = 1.0);

struct EvalRow {
  std::string name;
  MetricResult metrics;
};

struct EvalSummary {
  std::vector<EvalRow> rows;  // sorted by name
  MetricResult aggregate;     // mean of rows
};

/// Evaluates matching file names between the two directories; worker count
/// comes from RBLB_THREADS (0 or unset = single-threaded). Rows are sorted
/// before aggregation so the result is order-independent.
EvalSummary evaluate_dirs(const std::string& output_dir, const std::string& target_dir,
                          double peak = 1.0);

void write_eval_csv(const std::string& path, const EvalSummary& summary);

}  // namespace rblb
