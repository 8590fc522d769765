#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "peit/errors.hpp"
#include "peit/fitting.hpp"
#include "peit/hilbert.hpp"

// Multi-ion sideband thermometry.  N ions share one motional mode; a
// global beam drives the first red or blue sideband with per-ion signed
// couplings.  The exchange dynamics is solved exactly by diagonalizing
// the (real symmetric) sideband Hamiltonian once per setup, batching all
// Fock initial states through the same eigenbasis.  Occupations are then
// read off a two-sideband asymmetry after a collective correction factor
// calibrated against thermal states.

namespace peit {

enum class Sideband { red, blue };

enum class UpObservable {
  mean_fraction, // mean excited fraction across ions (default)
  any_ion        // probability that at least one ion is excited
};

struct ThermometrySetup {
  std::string label;
  int ion_count = 1;
  std::vector<double> etas; // signed per-ion Lamb-Dicke couplings
  double rabi = 1.0;
  int fock_dim = 24;
  int samples = 800;
  double window_periods = 2.05; // probe window, units of pi/g
  int nu_points = 500;
  double nu_lo_frac = 0.6; // fit grid bounds, units of 2g
  double nu_hi_frac = 3.0;
  UpObservable observable = UpObservable::mean_fraction;

  void validate() const {
    if (ion_count < 1 || ion_count > 10)
      throw ConfigError("ion count must be in [1, 10]");
    if (static_cast<int>(etas.size()) != ion_count)
      throw ConfigError("need one Lamb-Dicke coupling per ion");
    if (rabi <= 0.0) throw ConfigError("Rabi frequency must be > 0");
    if (fock_dim < 3) throw ConfigError("Fock truncation must be >= 3");
    if (samples < 16) throw ConfigError("need at least 16 time samples");
    if (nu_points < 2) throw ConfigError("need at least 2 grid frequencies");
    if (!(nu_lo_frac > 0.0 && nu_hi_frac > nu_lo_frac))
      throw ConfigError("fit grid bounds must satisfy 0 < lo < hi");
    double norm2 = 0.0;
    for (double e : etas) norm2 += e * e;
    if (norm2 <= 0.0) throw ConfigError("all couplings are zero");
  }

  // collective exchange rate; the root-sum-square coupling sets the
  // oscillation scale of the all-down manifold
  double collective_g() const {
    double norm2 = 0.0;
    for (double e : etas) norm2 += e * e;
    return 0.5 * rabi * std::sqrt(norm2);
  }
};

struct SidebandSignal {
  Sideband sideband = Sideband::blue;
  std::vector<double> times;
  std::vector<double> p_up;               // selected observable
  std::vector<double> p_any;              // at least one ion excited
  std::vector<std::vector<double>> p_ion; // per-ion excitation [ion][time]
  double norm_drift = 0.0;
  double tail = 0.0;             // largest top-two-Fock weight over time
  double weight_truncation = 0.0; // thermal weight lost to truncation
};

namespace detail {

// per-Fock-initial-state reduced signals; rows index the initial Fock
// level, columns the time grid
struct SidebandBatch {
  std::vector<double> times;
  Eigen::MatrixXd p_mean;
  Eigen::MatrixXd p_any;
  Eigen::MatrixXd tail;
  std::vector<Eigen::MatrixXd> p_ion;
  double norm_drift = 0.0;
};

inline SidebandBatch propagate_sideband(const ThermometrySetup& setup,
                                        Sideband sideband) {
  setup.validate();
  const int n_ions = setup.ion_count;
  const int n_spin = 1 << n_ions;
  const int d = setup.fock_dim;
  const int dim = n_spin * d;
  if (dim > 8192)
    throw DimensionCapExceeded("thermometry dimension " +
                               std::to_string(dim) + " exceeds cap 8192");

  // basis index = spin * d + fock; blue couples |s, n> -> |s + bit, n + 1>,
  // red couples |s, n> -> |s + bit, n - 1>; all couplings real
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int s = 0; s < n_spin; ++s)
    for (int j = 0; j < n_ions; ++j) {
      if (s & (1 << j)) continue;
      const int s_up = s | (1 << j);
      const double c = 0.5 * setup.rabi * setup.etas[j];
      for (int n = 0; n < d; ++n) {
        if (sideband == Sideband::blue) {
          if (n + 1 >= d) continue;
          const double v = c * std::sqrt(n + 1.0);
          h(s_up * d + n + 1, s * d + n) += v;
          h(s * d + n, s_up * d + n + 1) += v;
        } else {
          if (n - 1 < 0) continue;
          const double v = c * std::sqrt(static_cast<double>(n));
          h(s_up * d + n - 1, s * d + n) += v;
          h(s * d + n, s_up * d + n - 1) += v;
        }
      }
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success)
    throw SolverFailure("sideband Hamiltonian eigendecomposition", 0.0);
  const Eigen::MatrixXd& v = es.eigenvectors();
  const Eigen::VectorXd& energy = es.eigenvalues();

  // initial states |all down, n>: basis indices 0..d-1
  const Eigen::MatrixXd c0 = v.topRows(d).transpose();

  const double g = setup.collective_g();
  const double t_max = setup.window_periods * M_PI / g;
  const int n_t = setup.samples + 1; // include t = 0

  // observable weights per basis state
  Eigen::VectorXd w_mean(dim), w_any(dim), w_tail(dim);
  std::vector<Eigen::VectorXd> w_ion(n_ions, Eigen::VectorXd(dim));
  for (int i = 0; i < dim; ++i) {
    const unsigned s = static_cast<unsigned>(i / d);
    const int n = i % d;
    w_mean(i) = std::popcount(s) / static_cast<double>(n_ions);
    w_any(i) = s != 0 ? 1.0 : 0.0;
    w_tail(i) = n >= d - 2 ? 1.0 : 0.0;
    for (int j = 0; j < n_ions; ++j)
      w_ion[j](i) = (s >> j) & 1u ? 1.0 : 0.0;
  }

  SidebandBatch batch;
  batch.times.resize(n_t);
  batch.p_mean.resize(d, n_t);
  batch.p_any.resize(d, n_t);
  batch.tail.resize(d, n_t);
  batch.p_ion.assign(n_ions, Eigen::MatrixXd(d, n_t));

  Eigen::MatrixXd pre(dim, d), pim(dim, d), are(dim, d), aim(dim, d);
  Eigen::MatrixXd prob(dim, d);
  for (int k = 0; k < n_t; ++k) {
    const double t = t_max * k / setup.samples;
    batch.times[k] = t;
    const Eigen::ArrayXd phase = energy.array() * (-t);
    pre = c0.array().colwise() * phase.cos();
    pim = c0.array().colwise() * phase.sin();
    are.noalias() = v * pre;
    aim.noalias() = v * pim;
    prob = are.array().square() + aim.array().square();
    batch.p_mean.col(k) = prob.transpose() * w_mean;
    batch.p_any.col(k) = prob.transpose() * w_any;
    batch.tail.col(k) = prob.transpose() * w_tail;
    for (int j = 0; j < n_ions; ++j)
      batch.p_ion[j].col(k) = prob.transpose() * w_ion[j];
    const double drift =
        (prob.colwise().sum().array() - 1.0).abs().maxCoeff();
    batch.norm_drift = std::max(batch.norm_drift, drift);
  }
  return batch;
}

inline SidebandSignal mix_signal(const ThermometrySetup& setup,
                                 Sideband sideband,
                                 const SidebandBatch& batch,
                                 const Eigen::VectorXd& weights,
                                 double weight_truncation) {
  SidebandSignal sig;
  sig.sideband = sideband;
  sig.times = batch.times;
  sig.norm_drift = batch.norm_drift;
  sig.weight_truncation = weight_truncation;
  const int n_t = static_cast<int>(batch.times.size());
  Eigen::VectorXd mean = batch.p_mean.transpose() * weights;
  Eigen::VectorXd any = batch.p_any.transpose() * weights;
  Eigen::VectorXd tail = batch.tail.transpose() * weights;
  sig.p_any.assign(any.data(), any.data() + n_t);
  sig.tail = tail.maxCoeff();
  const Eigen::VectorXd& sel =
      setup.observable == UpObservable::mean_fraction ? mean : any;
  sig.p_up.assign(sel.data(), sel.data() + n_t);
  sig.p_ion.resize(setup.ion_count);
  for (int j = 0; j < setup.ion_count; ++j) {
    Eigen::VectorXd pj = batch.p_ion[j].transpose() * weights;
    sig.p_ion[j].assign(pj.data(), pj.data() + n_t);
  }
  return sig;
}

} // namespace detail

// signal for a single initial Fock level n0
inline SidebandSignal sideband_signal(const ThermometrySetup& setup,
                                      Sideband sideband, int n0) {
  if (n0 < 0 || n0 >= setup.fock_dim)
    throw DomainError("initial Fock level outside truncation");
  detail::SidebandBatch batch = detail::propagate_sideband(setup, sideband);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(setup.fock_dim);
  w(n0) = 1.0;
  return detail::mix_signal(setup, sideband, batch, w, 0.0);
}

// signal for a thermal initial mode state, weights renormalized over the
// truncated ladder
inline SidebandSignal thermal_signal(const ThermometrySetup& setup,
                                     Sideband sideband, double nbar) {
  if (nbar < 0.0) throw DomainError("occupation must be >= 0");
  detail::SidebandBatch batch = detail::propagate_sideband(setup, sideband);
  Eigen::VectorXd w = thermal_weights(setup.fock_dim, nbar);
  return detail::mix_signal(setup, sideband, batch, w,
                            thermal_truncation_error(setup.fock_dim, nbar));
}

// amplitude of the best-matching A sin^2(nu t / 2) template over the
// setup's frequency grid
inline SinSqFit sideband_amplitude(const ThermometrySetup& setup,
                                   const SidebandSignal& signal) {
  const double g2 = 2.0 * setup.collective_g();
  return fit_sinsq_amplitude(signal.times, signal.p_up,
                             setup.nu_lo_frac * g2, setup.nu_hi_frac * g2,
                             setup.nu_points);
}

struct NbarEstimate {
  double nbar = 0.0;
  bool saturated = false; // blue response at or below red: no estimate
};

// two-sideband asymmetry: nbar = factor * A_red / (A_blue - A_red)
inline NbarEstimate asymmetry_estimate(double p_blue, double p_red,
                                       double factor) {
  if (factor <= 0.0) throw DomainError("correction factor must be > 0");
  NbarEstimate est;
  if (p_red <= 0.0) return est; // cold limit: no red response
  if (p_blue <= p_red) {
    est.nbar = std::numeric_limits<double>::infinity();
    est.saturated = true;
    return est;
  }
  est.nbar = factor * p_red / (p_blue - p_red);
  return est;
}

struct CorrectionFactor {
  std::string label;
  double value = 1.0;
  double r_squared = 1.0;
  double fit_uncertainty = 0.0;
  std::vector<double> nbar_grid;
  std::vector<double> asymmetries;   // raw A_r / (A_b - A_r) per grid point
  std::vector<double> blue_nu;       // fitted template frequencies
  std::vector<double> red_nu;
  double tail = 0.0;
  double norm_drift = 0.0;
  double weight_truncation = 0.0;
};

inline const std::vector<double>& default_nbar_grid() {
  static const std::vector<double> grid = {0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  return grid;
}

// calibrate factor = nbar / raw asymmetry as a through-origin slope over a
// grid of thermal occupations
inline CorrectionFactor correction_factor(
    const ThermometrySetup& setup,
    const std::vector<double>& nbar_grid = default_nbar_grid()) {
  setup.validate();
  if (nbar_grid.size() < 2)
    throw ConfigError("need at least 2 occupations to calibrate");

  detail::SidebandBatch blue =
      detail::propagate_sideband(setup, Sideband::blue);
  detail::SidebandBatch red = detail::propagate_sideband(setup, Sideband::red);

  CorrectionFactor cf;
  cf.label = setup.label;
  cf.nbar_grid = nbar_grid;
  cf.norm_drift = std::max(blue.norm_drift, red.norm_drift);

  for (double nbar : nbar_grid) {
    if (nbar <= 0.0) throw DomainError("calibration occupations must be > 0");
    Eigen::VectorXd w = thermal_weights(setup.fock_dim, nbar);
    const double trunc = thermal_truncation_error(setup.fock_dim, nbar);
    SidebandSignal sb =
        detail::mix_signal(setup, Sideband::blue, blue, w, trunc);
    SidebandSignal sr = detail::mix_signal(setup, Sideband::red, red, w, trunc);
    cf.tail = std::max({cf.tail, sb.tail, sr.tail});
    cf.weight_truncation = std::max(cf.weight_truncation, trunc);

    SinSqFit fb = sideband_amplitude(setup, sb);
    SinSqFit fr = sideband_amplitude(setup, sr);
    cf.blue_nu.push_back(fb.frequency);
    cf.red_nu.push_back(fr.frequency);
    if (fb.amplitude <= fr.amplitude)
      throw SolverFailure("blue sideband response not above red", 0.0);
    cf.asymmetries.push_back(fr.amplitude / (fb.amplitude - fr.amplitude));
  }

  OriginFit fit = fit_through_origin(cf.asymmetries, cf.nbar_grid);
  cf.value = fit.slope;
  cf.r_squared = fit.r_squared;
  cf.fit_uncertainty = fit.stderr_slope;
  return cf;
}

struct PiTimeProbe {
  double time = 0.0;
  double p_blue = 0.0;
  double p_red = 0.0;
};

// fixed-time variant: probe both sidebands at the blue signal's first
// local maximum (kept for comparison; the amplitude fit is the default)
inline PiTimeProbe pi_time_probe(const ThermometrySetup& setup, double nbar) {
  SidebandSignal sb = thermal_signal(setup, Sideband::blue, nbar);
  SidebandSignal sr = thermal_signal(setup, Sideband::red, nbar);
  size_t k_max = sb.p_up.size() - 1;
  for (size_t k = 1; k + 1 < sb.p_up.size(); ++k)
    if (sb.p_up[k] >= sb.p_up[k - 1] && sb.p_up[k] > sb.p_up[k + 1]) {
      k_max = k;
      break;
    }
  PiTimeProbe probe;
  probe.time = sb.times[k_max];
  probe.p_blue = sb.p_up[k_max];
  probe.p_red = sr.p_up[k_max];
  return probe;
}

} // namespace peit
