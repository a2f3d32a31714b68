#ifndef CIRN_GRADCHECK_HPP
#define CIRN_GRADCHECK_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "tensor.hpp"

namespace cirn {

struct GradCheckReport {
  bool pass = true;
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  std::size_t coords_checked = 0;
};

// Central-difference check of d(loss)/d(x) against the recorded backward
// rules. `forward` must rebuild the graph from x's current values and return
// the scalar loss. Meant for 64-bit element mode.
template <typename T>
inline GradCheckReport grad_check(
    const std::function<typename Tensor<T>::Ptr()>& forward, typename Tensor<T>::Ptr x,
    T h, T tol, std::size_t max_coords = 0) {
  auto loss = forward();
  if (loss->numel() != 1) throw DimensionError("grad_check: loss must be scalar");
  x->zero_grad();
  backward<T>(loss);
  x->ensure_grad();
  std::vector<T> analytic = x->grad;

  GradCheckReport rep;
  std::size_t n = x->numel();
  std::size_t stride = 1;
  if (max_coords > 0 && n > max_coords) stride = (n + max_coords - 1) / max_coords;
  for (std::size_t i = 0; i < n; i += stride) {
    T saved = x->value[i];
    x->value[i] = saved + h;
    T fplus = forward()->value[0];
    x->value[i] = saved - h;
    T fminus = forward()->value[0];
    x->value[i] = saved;
    if (!std::isfinite(static_cast<double>(fplus)) ||
        !std::isfinite(static_cast<double>(fminus)))
      throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(i));
    T numeric = (fplus - fminus) / (T(2) * h);
    T a = analytic[i];
    double denom = std::max(1.0, std::max(std::fabs(static_cast<double>(a)),
                                          std::fabs(static_cast<double>(numeric))));
    double rel = std::fabs(static_cast<double>(a - numeric)) / denom;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_coord = i;
    }
    ++rep.coords_checked;
  }
  rep.pass = rep.max_rel_error <= static_cast<double>(tol);
  return rep;
}

}  // namespace cirn

#endif
