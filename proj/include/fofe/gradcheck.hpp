#ifndef FOFE_GRADCHECK_HPP
#define FOFE_GRADCHECK_HPP

#include <functional>
#include <string>

#include "fofe/nn.hpp"
#include "fofe/rng.hpp"

namespace fofe {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  std::int64_t elements_checked = 0;
};

// Central finite differences against the analytic gradients produced by
// `loss_fn`, which must recompute the full forward+backward (filling
// params' grad buffers) as a deterministic function of the current
// parameter values.  Runs every element, or a seeded subsample when the
// model exceeds max_checks elements.
//
// The error metric |a - n| / max(min(|a|, |n|), floor) is deliberately
// harsh: a gradient off by a factor of two scores 1.0 regardless of its
// magnitude, while matching gradients score ~1e-9 at 64-bit.
inline GradCheckReport gradcheck(const std::function<double()>& loss_fn,
                                 ParamStore<double>& params, double step,
                                 std::int64_t max_checks = 10000,
                                 std::uint64_t subsample_seed = 1) {
  params.zero_grads();
  const double base_loss = loss_fn();
  ensure_finite_scalar(base_loss, "gradcheck loss");

  // Snapshot the analytic gradients before perturbing anything.
  std::vector<Mat<double>> analytic;
  analytic.reserve(params.size());
  std::int64_t total_elements = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    analytic.push_back(params[i].grad);
    total_elements += params[i].grad.size();
  }

  const bool subsample = total_elements > max_checks;
  Rng rng(subsample_seed);
  const double keep_prob =
      subsample ? static_cast<double>(max_checks) / static_cast<double>(total_elements) : 1.0;

  GradCheckReport report;
  constexpr double kFloor = 1e-6;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Mat<double>& value = params[pi].value;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        if (subsample && rng.next_double() >= keep_prob) continue;
        const double saved = value(r, c);
        value(r, c) = saved + step;
        params.zero_grads();
        const double loss_plus = loss_fn();
        value(r, c) = saved - step;
        params.zero_grads();
        const double loss_minus = loss_fn();
        value(r, c) = saved;
        ensure_finite_scalar(loss_plus, "gradcheck loss");
        ensure_finite_scalar(loss_minus, "gradcheck loss");

        const double numeric = (loss_plus - loss_minus) / (2.0 * step);
        const double a = analytic[pi](r, c);
        const double denom = std::max(std::min(std::abs(a), std::abs(numeric)), kFloor);
        const double err = std::abs(a - numeric) / denom;
        ++report.elements_checked;
        if (err > report.max_rel_error) {
          report.max_rel_error = err;
          report.worst_param = params[pi].name;
          report.worst_row = r;
          report.worst_col = c;
        }
      }
    }
  }

  // Leave the store in the analytic state it started from.
  params.zero_grads();
  loss_fn();
  return report;
}

}  // namespace fofe

#endif  // FOFE_GRADCHECK_HPP
