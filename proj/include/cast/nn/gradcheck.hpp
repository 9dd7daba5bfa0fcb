#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cast/nn/tape.hpp"

namespace cast::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double max_abs_error = 0.0;
  double loss = 0.0;             // loss at the unperturbed parameters
  std::vector<double> rel_errors;  // one per sampled coordinate
  std::vector<double> analytic;    // matching reverse-mode values

  // Smallest gradient change central differences can resolve: one ulp of the
  // loss spread over the 2*eps step.
  double resolution(double eps) const;
  std::size_t count_above(double tol) const;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double fraction = 0.01;  // share of coordinates sampled per parameter
  std::size_t min_coords = 10;
  std::uint64_t seed = 1;
};

// Compares reverse-mode gradients of `build_loss` against central differences
// on a random coordinate sample. Relative error: |a-n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const std::function<Var(Tape<double>&)>& build_loss, ParamSet<double>& params,
                           const GradCheckOptions& opts = {});

}  // namespace cast::nn
