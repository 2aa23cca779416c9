#pragma once

#include <cmath>

namespace pourbench::numerics {

namespace detail {

template <typename F>
double simpson_recurse(const F& f, double a, double b, double fa, double fm,
                       double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b].
///
/// The absolute tolerance is derived from `rel_tol` and a coarse first
/// estimate of the integral, so the result is accurate to roughly `rel_tol`
/// relative. The subdivision is a pure function of f, so results are
/// reproducible bit for bit.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol = 1e-8,
                        int max_depth = 40) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double scale = std::abs(whole) > 0.0 ? std::abs(whole) : 1.0;
  return detail::simpson_recurse(f, a, b, fa, fm, fb, whole, rel_tol * scale,
                                 max_depth);
}

}  // namespace pourbench::numerics
