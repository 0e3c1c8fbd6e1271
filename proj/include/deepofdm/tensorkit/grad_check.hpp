#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "deepofdm/tensorkit/layers.hpp"

namespace deepofdm::tk {

struct GradCheckOptions {
  double epsilon = 1e-4;
  int samples = 100;
  std::uint64_t seed = 1;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped_kinks = 0;
};

/// Compares backprop against central differences on a random sample of
/// scalar parameters. The loss is sum(out * R) for a fixed random R.
/// Parameters whose perturbation flips any ReLU pattern are skipped.
GradCheckReport grad_check(const std::function<Var<double>()>& forward, const std::vector<Var<double>>& params,
                           const GradCheckOptions& opts = {});

/// Network variant; batch norm runs in inference mode unless `training`.
GradCheckReport grad_check(Network<double>& net, const Tensor<double>& input, const GradCheckOptions& opts = {},
                           bool training = false);

}  // namespace deepofdm::tk
