#pragma once

// Exact rejection sampling for the tilted-gamma-reciprocal densities that the
// weight-vector update needs: f(t) proportional to Gamma(t)^{-r} t^{s-1}
// exp(-c t) on (0, inf).  For r >= 1 the log-density is strictly concave
// (psi'(t) > 1/t^2 gives (log f)'' < -(r + s - 1)/t^2 < 0), vanishes at both
// ends, and has a unique interior mode even when c <= 0, so a piecewise-
// exponential hull built from tangents at mode +/- one curvature scale plus a
// flat cap at the mode is a valid envelope.

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "hfdp/common.hpp"

namespace hfdp {

struct TiltedGammaDensity {
  int r = 1;        // power on 1/Gamma(t)
  double shape = 1; // s
  double c = 0;     // linear tilt; any sign when r >= 1

  double logf(double t) const {
    return -r * std::lgamma(t) + (shape - 1.0) * std::log(t) - c * t;
  }
  double dlogf(double t) const {
    return -r * boost::math::digamma(t) + (shape - 1.0) / t - c;
  }
  double d2logf(double t) const {
    return -r * boost::math::trigamma(t) - (shape - 1.0) / (t * t);
  }

  void validate() const {
    if (r < 1) throw invalid_input("tilted gamma density needs r >= 1");
    if (!(shape > 0.0)) throw invalid_input("tilted gamma density needs shape > 0");
    if (!std::isfinite(c)) throw invalid_input("tilted gamma density needs finite c");
  }

  // unique root of dlogf via bracketing + bisection
  double mode() const {
    validate();
    double lo = 1.0, hi = 1.0;
    for (int i = 0; i < 2000 && dlogf(lo) <= 0.0; ++i) lo *= 0.25;
    for (int i = 0; i < 2000 && dlogf(hi) >= 0.0; ++i) hi *= 4.0;
    if (!(dlogf(lo) > 0.0) || !(dlogf(hi) < 0.0))
      throw numerical_degeneracy("mode bracketing failed for the weight density", -1, -1);
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (dlogf(mid) > 0.0 ? lo : hi) = mid;
      if ((hi - lo) < 1e-14 * hi) break;
    }
    return 0.5 * (lo + hi);
  }
};

// One exact draw by rejection under the three-piece exponential hull.
inline double sample_tilted_gamma(const TiltedGammaDensity& f, Rng& rng, int attribute = -1,
                                  int cluster = -1, int max_proposals = 10000) {
  const double m = f.mode();
  const double curv = -f.d2logf(m);
  const double s = 1.0 / std::sqrt(curv);
  const double l0 = f.logf(m);

  double x1 = m - s;
  if (!(x1 > 0.0)) x1 = 0.5 * m;
  const double x2 = m + s;
  const double d1 = f.dlogf(x1);   // > 0 left of the mode
  const double d2 = f.dlogf(x2);   // < 0 right of the mode
  if (!(d1 > 0.0) || !(d2 < 0.0))
    throw numerical_degeneracy("envelope tangents degenerate", attribute, cluster);
  const double f1 = f.logf(x1), f2 = f.logf(x2);

  // tangent lines cross the flat cap at these abscissae
  const double xa = x1 + (l0 - f1) / d1;
  const double xb = x2 + (l0 - f2) / d2;

  // piece masses relative to exp(l0)
  const double tail1 = std::exp(-d1 * xa);  // envelope value at 0 relative to the cap
  const double w1 = (1.0 - tail1) / d1;
  const double w2 = xb - xa;
  const double w3 = 1.0 / (-d2);
  const double total = w1 + w2 + w3;

  for (int it = 0; it < max_proposals; ++it) {
    double pick = uniform01(rng) * total;
    double x, hull;
    if (pick < w1) {
      double u = uniform01(rng);
      x = xa + std::log(u + (1.0 - u) * tail1) / d1;
      hull = l0 + d1 * (x - xa);
    } else if (pick < w1 + w2) {
      x = xa + uniform01(rng) * (xb - xa);
      hull = l0;
    } else {
      x = xb - std::log(1.0 - uniform01(rng)) / (-d2);
      hull = l0 + d2 * (x - xb);
    }
    if (!(x > 0.0) || !std::isfinite(x)) continue;
    if (std::log(uniform01(rng)) < f.logf(x) - hull) return x;
  }
  throw numerical_degeneracy("rejection sampler stalled", attribute, cluster);
}

}  // namespace hfdp
