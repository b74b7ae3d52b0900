#include "rblb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rblb {

float finite_diff_check(const ScalarFn& f, const Tensor& x, float eps) {
  if (!(eps > 0.0f)) throw std::invalid_argument("finite_diff_check: eps must be > 0");

  Tensor probe = x.detached(true);
  Tape tape;
  Tensor loss = f(tape, probe);
  if (loss.numel() != 1) {
    throw std::invalid_argument("finite_diff_check: f must be scalar-valued, got " +
                                loss.shape().str());
  }
  if (!tape.empty() && loss.requires_grad()) {
    tape.backward(loss);
  }
  std::vector<float> ad(probe.numel(), 0.0f);
  if (probe.has_grad()) {
    const auto g = probe.grad();
    ad.assign(g.begin(), g.end());
  }

  auto eval = [&f](const Tensor& t) {
    Tape scratch;
    Tensor y = f(scratch, t.detached(false));
    return static_cast<double>(y.item());
  };

  const auto xv = x.values();
  std::vector<float> fd(xv.size());
  Tensor work = x.detached(false);
  auto wv = work.values_mut();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const float x0 = xv[i];
    const float xp = x0 + eps;
    const float xm = x0 - eps;
    wv[i] = xp;
    const double fp = eval(work);
    wv[i] = xm;
    const double fm = eval(work);
    wv[i] = x0;
    // Use the realized step, not the nominal one, to cancel rounding in x+-eps.
    const double h = static_cast<double>(xp) - static_cast<double>(xm);
    fd[i] = static_cast<float>((fp - fm) / h);
  }

  double denom = 1.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    denom = std::max(denom, static_cast<double>(std::fabs(fd[i])));
    denom = std::max(denom, static_cast<double>(std::fabs(ad[i])));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(fd[i]) - ad[i]) / denom);
  }
  return static_cast<float>(worst);
}

}  // namespace rblb
