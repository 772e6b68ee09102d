#include "ota/gradcheck.hpp"

#include <cmath>

namespace ota {

GradCheckReport grad_check(ParamStore& params,
                           const std::function<Tensor(GradTape*)>& loss_fn, double h,
                           int max_coords_per_tensor, uint64_t seed) {
  params.zero_grads();
  GradTape tape;
  Tensor loss = loss_fn(&tape);
  if (!loss.all_finite()) throw ValueError("grad_check: non-finite loss at base point");
  tape.backward(loss);

  // snapshot analytic grads before perturbing
  std::vector<std::vector<double>> analytic(params.count());
  for (size_t i = 0; i < params.count(); ++i) analytic[i] = params.tensor(i).grad();

  RngStream rng(seed, "grad_check");
  GradCheckReport report;
  for (size_t i = 0; i < params.count(); ++i) {
    Tensor& t = params.tensor(i);
    const int64_t n = t.size();
    std::vector<int64_t> coords;
    if (n <= max_coords_per_tensor) {
      for (int64_t j = 0; j < n; ++j) coords.push_back(j);
    } else {
      for (int c = 0; c < max_coords_per_tensor; ++c)
        coords.push_back(static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n))));
    }
    for (int64_t j : coords) {
      const double orig = t[j];
      t[j] = orig + h;
      const double fp = loss_fn(nullptr)[0];
      t[j] = orig - h;
      const double fm = loss_fn(nullptr)[0];
      t[j] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw ValueError("grad_check: non-finite loss at " + params.name(i) + "[" +
                         std::to_string(j) + "]");
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i][static_cast<size_t>(j)];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_coord = params.name(i) + "[" + std::to_string(j) + "]";
      }
    }
  }
  return report;
}

}  // namespace ota
