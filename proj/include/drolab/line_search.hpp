#pragma once

#include <cmath>
#include <utility>

namespace drolab {

struct ScalarMinimum {
  double x = 0.0;
  double f = 0.0;
  int evaluations = 0;
};

/// Golden-section search for a unimodal f on [lo, hi].
///
/// Both endpoints are evaluated, so a minimizer pinned to an end of the
/// interval is reported exactly at that end. Stops when the bracket is
/// narrower than x_tol or after max_iter contractions; returns the best point
/// evaluated.
template <class F>
ScalarMinimum golden_section_minimize(F&& f, double lo, double hi, double x_tol, int max_iter = 400) {
  constexpr double inv_phi = 0.6180339887498948482;
  ScalarMinimum best{lo, f(lo), 1};
  auto consider = [&](double x, double fx) {
    ++best.evaluations;
    if (fx < best.f) {
      best.x = x;
      best.f = fx;
    }
  };
  if (hi <= lo) return best;
  consider(hi, f(hi));

  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  consider(c, fc);
  consider(d, fd);
  for (int it = 0; it < max_iter && (b - a) > x_tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
  }
  return best;
}

}  // namespace drolab
