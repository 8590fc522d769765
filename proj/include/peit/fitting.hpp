#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "peit/errors.hpp"

// Deterministic least-squares fits used to reduce simulated time series:
// exponential relaxation (cooling curves), sin^2 Rabi lineshapes
// (sideband oscillations), and a through-origin slope (thermometry
// calibration).  No randomness anywhere; identical inputs give identical
// fits bit-for-bit.

namespace peit {

struct ExpFit {
  double rate = 0.0;      // W in y = floor + amplitude e^{-W t}
  double floor = 0.0;
  double amplitude = 0.0;
  double residual_rms = 0.0;
  bool heating = false;   // fitted rate <= 0
};

namespace detail {

// Least squares of y on [1, e^{-w t}]; returns (floor, amplitude, ss_res).
struct ExpProjection {
  double c0 = 0.0, c1 = 0.0, ss = 0.0;
};

inline ExpProjection project_exponential(const std::vector<double>& t,
                                         const std::vector<double>& y,
                                         double w) {
  const size_t n = t.size();
  double s_e = 0.0, s_ee = 0.0, s_y = 0.0, s_ey = 0.0;
  std::vector<double> e(n);
  for (size_t i = 0; i < n; ++i) {
    e[i] = std::exp(-w * (t[i] - t[0])); // shift guards overflow for w < 0
    s_e += e[i];
    s_ee += e[i] * e[i];
    s_y += y[i];
    s_ey += e[i] * y[i];
  }
  const double det = n * s_ee - s_e * s_e;
  ExpProjection p;
  if (std::abs(det) < 1e-300) {
    p.c0 = s_y / n;
    p.c1 = 0.0;
  } else {
    p.c0 = (s_ee * s_y - s_e * s_ey) / det;
    p.c1 = (n * s_ey - s_e * s_y) / det;
  }
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - p.c0 - p.c1 * e[i];
    p.ss += r * r;
  }
  return p;
}

} // namespace detail

// Fit y = floor + amplitude e^{-rate (t - t0)} by scanning the rate on a
// log grid and polishing with golden-section search.  A positive w_seed
// narrows the scan around the expected rate.  When the series trends
// upward the scan runs over negative rates and the result is flagged.
inline ExpFit fit_exponential(const std::vector<double>& t,
                              const std::vector<double>& y,
                              double w_seed = 0.0) {
  if (t.size() != y.size() || t.size() < 4)
    throw DomainError("exponential fit needs >= 4 samples");
  const double span = t.back() - t.front();
  if (span <= 0.0) throw DomainError("time grid must increase");

  // rising or falling? compare the first and last tenth
  const size_t tenth = std::max<size_t>(1, t.size() / 10);
  double head = 0.0, tail = 0.0;
  for (size_t i = 0; i < tenth; ++i) {
    head += y[i];
    tail += y[y.size() - 1 - i];
  }
  const bool rising = tail > head;

  double w_lo = w_seed > 0.0 ? w_seed / 8.0 : 0.05 / span;
  double w_hi = w_seed > 0.0 ? w_seed * 8.0 : 50.0 / span;
  const int n_grid = w_seed > 0.0 ? 200 : 400;

  double best_w = w_lo, best_ss = std::numeric_limits<double>::infinity();
  std::vector<double> ws(n_grid);
  const double log_lo = std::log(w_lo), log_hi = std::log(w_hi);
  for (int i = 0; i < n_grid; ++i) {
    double w = std::exp(log_lo + (log_hi - log_lo) * i / (n_grid - 1.0));
    if (rising) w = -w;
    ws[i] = w;
    const double ss = detail::project_exponential(t, y, w).ss;
    if (ss < best_ss) {
      best_ss = ss;
      best_w = w;
    }
  }

  // golden-section polish between the grid neighbors of the minimum
  const auto it = std::find(ws.begin(), ws.end(), best_w);
  const size_t idx = static_cast<size_t>(it - ws.begin());
  double a = ws[idx > 0 ? idx - 1 : idx];
  double b = ws[idx + 1 < ws.size() ? idx + 1 : idx];
  if (a > b) std::swap(a, b);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = detail::project_exponential(t, y, x1).ss;
  double f2 = detail::project_exponential(t, y, x2).ss;
  for (int i = 0; i < 90 && b - a > 1e-14 * std::max(1.0, std::abs(b)); ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = detail::project_exponential(t, y, x1).ss;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = detail::project_exponential(t, y, x2).ss;
    }
  }
  const double w_fin = 0.5 * (a + b);
  const auto p = detail::project_exponential(t, y, w_fin);

  ExpFit fit;
  fit.rate = w_fin;
  // coefficients were fitted against e^{-w (t - t0)}; shift the floor and
  // amplitude back to absolute time
  fit.floor = p.c0;
  fit.amplitude = p.c1 * std::exp(w_fin * t[0]);
  fit.residual_rms = std::sqrt(p.ss / t.size());
  fit.heating = w_fin <= 0.0;
  return fit;
}

struct SinSqFit {
  double amplitude = 0.0; // A in y = A sin^2(nu t / 2)
  double frequency = 0.0; // chosen nu
  double score = 0.0;     // explained sum of squares at the chosen nu
};

// Through-origin amplitude of A sin^2(nu t/2) over a frequency grid,
// keeping the nu that explains the most signal.
inline SinSqFit fit_sinsq_amplitude(const std::vector<double>& t,
                                    const std::vector<double>& y,
                                    double nu_lo, double nu_hi, int n_nu) {
  if (t.size() != y.size() || t.empty())
    throw DomainError("sin^2 fit needs matching nonempty series");
  if (n_nu < 2 || nu_hi <= nu_lo) throw DomainError("bad frequency grid");

  SinSqFit best;
  double best_score = -1.0;
  for (int i = 0; i < n_nu; ++i) {
    const double nu = nu_lo + (nu_hi - nu_lo) * i / (n_nu - 1.0);
    double s_sy = 0.0, s_ss = 0.0;
    for (size_t k = 0; k < t.size(); ++k) {
      const double s = std::sin(0.5 * nu * t[k]);
      const double s2 = s * s;
      s_sy += s2 * y[k];
      s_ss += s2 * s2;
    }
    if (s_ss <= 0.0) continue;
    const double score = s_sy * s_sy / s_ss; // explained sum of squares
    if (score > best_score) {
      best_score = score;
      best.amplitude = s_sy / s_ss;
      best.frequency = nu;
      best.score = score;
    }
  }
  return best;
}

struct OriginFit {
  double slope = 0.0;
  double r_squared = 0.0;
  double stderr_slope = 0.0;
};

// Slope of y = slope * x through the origin, with R^2 against the mean
// model of y.
inline OriginFit fit_through_origin(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DomainError("origin fit needs >= 2 matching samples");
  double s_xy = 0.0, s_xx = 0.0, s_y = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    s_xy += x[i] * y[i];
    s_xx += x[i] * x[i];
    s_y += y[i];
  }
  if (s_xx <= 0.0) throw DomainError("origin fit needs nonzero x");
  OriginFit fit;
  fit.slope = s_xy / s_xx;
  const double mean = s_y / y.size();
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    ss_res += std::pow(y[i] - fit.slope * x[i], 2);
    ss_tot += std::pow(y[i] - mean, 2);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (x.size() > 1)
    fit.stderr_slope = std::sqrt(ss_res / (x.size() - 1.0) / s_xx);
  return fit;
}

} // namespace peit
