#pragma once

#include <functional>
#include <string>

#include "ota/params.hpp"

namespace ota {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int coords_checked = 0;
  std::string worst_coord;  // "name[i]"
  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Compares tape gradients of loss_fn against central finite differences on a
// sampled coordinate subset. loss_fn must be a deterministic function of the
// current parameter values (re-seed any internal randomness per call) and is
// invoked with a tape (once, for analytic grads) and without (for the
// +/- h evaluations).
GradCheckReport grad_check(ParamStore& params,
                           const std::function<Tensor(GradTape*)>& loss_fn,
                           double h = 1e-5, int max_coords_per_tensor = 8,
                           uint64_t seed = 0);

}  // namespace ota
