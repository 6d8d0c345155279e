#pragma once

// Central finite-difference oracle for gradnet graphs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mfgvo/gradnet.hpp"

namespace mfgvo::testing {

struct GradCheckResult {
  double worst_excess = 0.0;  // max of |a - n| - tolerance; <= 0 means pass
  double worst_relative = 0.0;
  std::size_t checked = 0;
  bool ok() const { return worst_excess <= 0.0; }
};

/// Compares analytic gradients of `loss(leaves)` against central differences
/// with step `h`. A component passes when
///   |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|) + abs_floor.
inline GradCheckResult gradcheck(
    std::vector<gradnet::Tensor>& leaves,
    const std::function<gradnet::Tensor(const std::vector<gradnet::Tensor>&)>& loss,
    double h = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-8) {
  for (auto& t : leaves) t.zero_grad();
  loss(leaves).backward();
  GradCheckResult res;
  res.worst_excess = -INFINITY;
  for (auto& leaf : leaves) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto vals = leaf.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double up = loss(leaves).item();
      vals[i] = saved - h;
      const double down = loss(leaves).item();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double diff = std::abs(analytic[i] - numeric);
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
      res.worst_excess = std::max(res.worst_excess, diff - (rel_tol * scale + abs_floor));
      if (scale > 0) res.worst_relative = std::max(res.worst_relative, diff / scale);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace mfgvo::testing
