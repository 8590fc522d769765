#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "peit/errors.hpp"
#include "peit/evolve.hpp"
#include "peit/fitting.hpp"
#include "peit/hilbert.hpp"
#include "peit/rates.hpp"

// Cooling-model builders and trajectory analysis: the bare three-level
// single-mode model, dressed-basis multimode models (one ion with two
// modes, two ions sharing two modes), exponential rate extraction, and
// steady-state absorption profiles.

namespace peit {

struct CoolingConfig {
  LaserTone driving;
  std::vector<LaserTone> probes; // one per addressed mode group
  double mismatch = 0.0;         // resonance offset, alternating +/- per tone
  AtomParams atom;

  void validate() const {
    driving.validate();
    atom.validate();
    if (probes.empty()) throw ConfigError("at least one probe tone required");
    for (const auto& p : probes) p.validate();
  }

  // dressed-state reduction assumes probes much weaker than the driving
  bool regime_warning() const {
    for (const auto& p : probes)
      if (p.rabi > 0.3 * driving.rabi) return true;
    return false;
  }

  double probe_detuning(size_t l) const {
    return probes.at(l).detuning + (l % 2 == 0 ? mismatch : -mismatch);
  }
};

struct ModeFit {
  double w = 0.0;
  double n_ss = 0.0;
  double amplitude = 0.0;
  double residual_rms = 0.0;
  bool heating = false;
};

struct CoolingRun {
  std::string description;
  std::vector<double> times;
  std::vector<std::vector<double>> nbar; // [mode][sample]
  std::vector<ModeFit> fits;
  HygieneReport hygiene;
  double dt = 0.0;
  long long steps = 0;
};

namespace detail {

inline Mat thermal_product_state(const HilbertLayout& layout,
                                 int ground_index, double nbar) {
  const int dim = layout.total_dim();
  Mat rho = Mat::Zero(dim, dim);
  std::vector<Eigen::VectorXd> weights;
  for (size_t f = 1; f < layout.factors.size(); ++f)
    weights.push_back(thermal_weights(layout.factors[f], nbar));
  for (int i = 0; i < dim; ++i) {
    int rest = i;
    std::vector<int> idx(layout.factors.size());
    for (int f = static_cast<int>(layout.factors.size()) - 1; f >= 0; --f) {
      idx[f] = rest % layout.factors[f];
      rest /= layout.factors[f];
    }
    if (idx[0] != ground_index) continue;
    double w = 1.0;
    for (size_t f = 1; f < layout.factors.size(); ++f)
      w *= weights[f - 1](idx[f]);
    rho(i, i) = w;
  }
  return rho;
}

// exp(i s x) for Hermitian x = a + a^dag, via eigendecomposition
inline Mat displacement_exponential(const Mat& x, double s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(x);
  Vec phases(x.rows());
  for (int i = 0; i < x.rows(); ++i)
    phases(i) = std::exp(cplx(0.0, s * es.eigenvalues()(i)));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

} // namespace detail

// Bare three-level ion (g, r, e) with one motional mode coupled through
// first-order sidebands on both optical transitions, plus the
// recoil-broadened decay channels.  Level order: g = 0, r = 1, e = 2.
inline QuantumModel build_single_mode_model(const CoolingConfig& config,
                                            double mode_frequency,
                                            double eta_g, double eta_r,
                                            int fock_dim, double nbar0 = 0.0,
                                            bool exact_displacement = false) {
  config.validate();
  if (config.probes.size() != 1)
    throw ConfigError("single-mode model takes exactly one probe tone");
  if (mode_frequency <= 0.0) throw DomainError("mode frequency must be > 0");
  if (nbar0 < 0.0) throw DomainError("initial occupation must be >= 0");
  const int d = fock_dim > 0 ? fock_dim : suggested_truncation(nbar0);

  QuantumModel model;
  model.layout.factors = {3, d};
  model.layout.is_fock = {false, true};
  model.layout.density_cap = 4096;
  model.layout.validate();

  Operators ops = build_operators(model.layout);
  const SpMat x = ops.quadrature(1);
  auto proj = [&](int i, int j) { return ops.transition(0, i, j); };
  const int g = 0, r = 1, e = 2;

  const double omega_g = config.probes[0].rabi;
  const double delta_g = config.probe_detuning(0);
  const double omega_r = config.driving.rabi;
  const double delta_r = config.driving.detuning;
  const double delta_gr = delta_g - delta_r;
  const double cphi_g = config.probes[0].axis_projection[0];
  const double cphi_r = config.driving.axis_projection[0];

  SpMat h = SpMat(-delta_g * proj(e, e)) + SpMat(-delta_gr * proj(r, r)) +
            SpMat(mode_frequency * ops.number(1));
  if (exact_displacement) {
    // carrier and sideband combined: (Omega/2) e^{i eta cphi x} |e><j| + h.c.
    const Mat xd = Mat(x);
    const Mat dg = detail::displacement_exponential(xd, eta_g * cphi_g);
    const Mat dr = detail::displacement_exponential(xd, eta_r * cphi_r);
    SpMat vg = SpMat((0.5 * omega_g) * (Mat(proj(e, g)) * dg).sparseView());
    SpMat vr = SpMat((0.5 * omega_r) * (Mat(proj(e, r)) * dr).sparseView());
    h += SpMat(vg + SpMat(vg.adjoint()));
    h += SpMat(vr + SpMat(vr.adjoint()));
  } else {
    h += SpMat((0.5 * omega_g) * SpMat(proj(e, g) + proj(g, e)));
    h += SpMat((0.5 * omega_r) * SpMat(proj(e, r) + proj(r, e)));
    SpMat vg = SpMat(cplx(0.0, eta_g * cphi_g * 0.5 * omega_g) *
                     SpMat(proj(e, g) * x));
    SpMat vr = SpMat(cplx(0.0, eta_r * cphi_r * 0.5 * omega_r) *
                     SpMat(proj(e, r) * x));
    h += SpMat(vg + SpMat(vg.adjoint()));
    h += SpMat(vr + SpMat(vr.adjoint()));
  }
  model.hamiltonian_terms.push_back({h, 0.0});

  // recoil dissipator to O(eta^2): direct decay plus sideband-recoil jumps
  const double gam_g = config.atom.gamma_g, gam_r = config.atom.gamma_r;
  const double alpha = config.atom.alpha;
  model.jump_operators.push_back({proj(g, e), gam_g});
  model.jump_operators.push_back({proj(r, e), gam_r});
  model.jump_operators.push_back(
      {SpMat(eta_g * SpMat(proj(g, e) * x)), gam_g * alpha});
  model.jump_operators.push_back(
      {SpMat(eta_r * SpMat(proj(r, e) * x)), gam_r * alpha});

  model.initial_state = detail::thermal_product_state(model.layout, g, nbar0);
  return model;
}

// Dressed two-level ion (|g>, |+>) with two motional modes and one probe
// tone per mode.  The default keeps every tone coupled to every mode with
// the cross couplings oscillating at the tone splitting; resonant_only
// drops the off-resonant pairs and leaves a static model.
inline QuantumModel build_2d_model(const CoolingConfig& config,
                                   std::array<double, 2> mode_freqs,
                                   std::array<double, 2> etas,
                                   std::array<int, 2> fock_dims,
                                   double nbar0,
                                   bool resonant_only = false) {
  config.validate();
  if (config.probes.size() != 2)
    throw ConfigError("two-mode model takes exactly two probe tones");
  for (double w : mode_freqs)
    if (w <= 0.0) throw DomainError("mode frequencies must be > 0");
  for (int d : fock_dims)
    if (d < 2) throw DomainError("Fock truncation must be >= 2");
  if (config.driving.detuning <= 0.0)
    throw RegimeViolation(
        "dressed reduction requires blue-detuned driving (Delta_r > 0)");

  const DressedState ds = make_dressed(config.driving, config.atom);
  const double sin_phi = std::sin(ds.mixing_angle);
  const double gamma_plus = ds.effective_linewidth;
  const double delta_ac = ds.ac_stark;

  QuantumModel model;
  model.layout.factors = {2, fock_dims[0], fock_dims[1]};
  model.layout.is_fock = {false, true, true};
  model.layout.density_cap = 4096;
  model.layout.validate();

  Operators ops = build_operators(model.layout);
  const SpMat raise = ops.transition(0, 1, 0); // |+><g|
  const SpMat lower = ops.transition(0, 0, 1);
  std::array<SpMat, 2> a = {ops.destroy(1), ops.destroy(2)};
  std::array<SpMat, 2> quad = {ops.quadrature(1), ops.quadrature(2)};
  std::array<SpMat, 2> num = {ops.number(1), ops.number(2)};

  std::array<double, 2> dgr{}, omega_plus{};
  for (int l = 0; l < 2; ++l) {
    dgr[l] = config.probe_detuning(l) - config.driving.detuning;
    omega_plus[l] = config.probes[l].rabi * sin_phi;
  }

  if (resonant_only) {
    // static frame: each tone keeps only its own mode's red sideband
    SpMat h(model.layout.total_dim(), model.layout.total_dim());
    for (int l = 0; l < 2; ++l) {
      const double m_l = delta_ac - dgr[l] - mode_freqs[l];
      const double g_l = etas[l] * omega_plus[l] / 2.0;
      h += SpMat(m_l * num[l]);
      SpMat c = SpMat(cplx(0.0, g_l) * SpMat(raise * a[l]));
      h += SpMat(c + SpMat(c.adjoint()));
    }
    model.hamiltonian_terms.push_back({h, 0.0});
  } else {
    // frame of tone 1: carrier plus both sidebands per tone; tone 2
    // oscillates at the tone splitting
    const double a_shift = delta_ac - dgr[0];
    SpMat h = SpMat(a_shift * ops.projector(0, 1));
    for (int k = 0; k < 2; ++k) h += SpMat(mode_freqs[k] * num[k]);
    for (int l = 0; l < 2; ++l) {
      SpMat m = SpMat((omega_plus[l] / 2.0) * raise);
      for (int k = 0; k < 2; ++k)
        m += SpMat(cplx(0.0, omega_plus[l] / 2.0 * etas[k]) *
                   SpMat(raise * quad[k]));
      const double nu =
          l == 0 ? 0.0
                 : config.probe_detuning(0) - config.probe_detuning(l);
      if (nu == 0.0)
        h += SpMat(m + SpMat(m.adjoint()));
      else
        model.hamiltonian_terms.push_back({m, nu});
    }
    model.hamiltonian_terms.insert(model.hamiltonian_terms.begin(), {h, 0.0});
  }

  model.jump_operators.push_back({lower, gamma_plus});
  model.initial_state = detail::thermal_product_state(model.layout, 0, nbar0);
  return model;
}

// Two dressed ions sharing two collective modes (in-phase and out-of-phase
// superpositions with amplitudes +-1/sqrt(2)), both probe tones hitting
// both ions.  Internal basis {gg, g+, +g, ++}.
inline QuantumModel build_two_ion_model(const CoolingConfig& config,
                                        std::array<double, 2> mode_freqs,
                                        std::array<double, 2> mode_etas,
                                        std::array<int, 2> fock_dims,
                                        double nbar0,
                                        bool resonant_only = false) {
  config.validate();
  if (config.probes.size() != 2)
    throw ConfigError("two-ion model takes exactly two probe tones");
  for (double w : mode_freqs)
    if (w <= 0.0) throw DomainError("mode frequencies must be > 0");
  for (int d : fock_dims)
    if (d < 2) throw DomainError("Fock truncation must be >= 2");
  if (config.driving.detuning <= 0.0)
    throw RegimeViolation(
        "dressed reduction requires blue-detuned driving (Delta_r > 0)");

  const DressedState ds = make_dressed(config.driving, config.atom);
  const double sin_phi = std::sin(ds.mixing_angle);
  const double gamma_plus = ds.effective_linewidth;
  const double delta_ac = ds.ac_stark;

  QuantumModel model;
  model.layout.factors = {4, fock_dims[0], fock_dims[1]};
  model.layout.is_fock = {false, true, true};
  model.layout.density_cap = 4096;
  model.layout.validate();

  Operators ops = build_operators(model.layout);
  // per-ion raising inside {gg=0, g+=1, +g=2, ++=3}
  std::array<SpMat, 2> raise = {
      SpMat(ops.transition(0, 2, 0) + ops.transition(0, 3, 1)),
      SpMat(ops.transition(0, 1, 0) + ops.transition(0, 3, 2))};
  std::array<SpMat, 2> a = {ops.destroy(1), ops.destroy(2)};
  std::array<SpMat, 2> quad = {ops.quadrature(1), ops.quadrature(2)};
  std::array<SpMat, 2> num = {ops.number(1), ops.number(2)};
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const std::array<std::array<double, 2>, 2> b = {
      std::array<double, 2>{inv_sqrt2, inv_sqrt2},   // in phase
      std::array<double, 2>{inv_sqrt2, -inv_sqrt2}}; // out of phase

  std::array<double, 2> dgr{}, omega_plus{};
  for (int l = 0; l < 2; ++l) {
    dgr[l] = config.probe_detuning(l) - config.driving.detuning;
    omega_plus[l] = config.probes[l].rabi * sin_phi;
  }

  if (resonant_only) {
    SpMat h(model.layout.total_dim(), model.layout.total_dim());
    for (int l = 0; l < 2; ++l) {
      const double m_l = delta_ac - dgr[l] - mode_freqs[l];
      h += SpMat(m_l * num[l]);
      for (int j = 0; j < 2; ++j) {
        const double g_jl = mode_etas[l] * b[l][j] * omega_plus[l] / 2.0;
        SpMat c = SpMat(cplx(0.0, g_jl) * SpMat(raise[j] * a[l]));
        h += SpMat(c + SpMat(c.adjoint()));
      }
    }
    model.hamiltonian_terms.push_back({h, 0.0});
  } else {
    const double a_shift = delta_ac - dgr[0];
    SpMat n_plus = SpMat(ops.projector(0, 1) + ops.projector(0, 2)) +
                   SpMat(2.0 * ops.projector(0, 3));
    SpMat h = SpMat(a_shift * n_plus);
    for (int k = 0; k < 2; ++k) h += SpMat(mode_freqs[k] * num[k]);
    for (int l = 0; l < 2; ++l) {
      SpMat m(model.layout.total_dim(), model.layout.total_dim());
      for (int j = 0; j < 2; ++j) {
        m += SpMat((omega_plus[l] / 2.0) * raise[j]);
        for (int k = 0; k < 2; ++k)
          m += SpMat(cplx(0.0, omega_plus[l] / 2.0 * mode_etas[k] * b[k][j]) *
                     SpMat(raise[j] * quad[k]));
      }
      const double nu =
          l == 0 ? 0.0
                 : config.probe_detuning(0) - config.probe_detuning(l);
      if (nu == 0.0)
        h += SpMat(m + SpMat(m.adjoint()));
      else
        model.hamiltonian_terms.push_back({m, nu});
    }
    model.hamiltonian_terms.insert(model.hamiltonian_terms.begin(), {h, 0.0});
  }

  for (int j = 0; j < 2; ++j)
    model.jump_operators.push_back({SpMat(raise[j].adjoint()), gamma_plus});
  model.initial_state = detail::thermal_product_state(model.layout, 0, nbar0);
  return model;
}

// Evolve a cooling model, sample every mode's occupation, and fit
// n_ss + (n0 - n_ss) e^{-W t} per mode.  The fit runs twice: a full-window
// pass estimates W, then the reported fit uses only t >= 0.5/W_est to
// avoid the optical-pumping transient.
inline CoolingRun simulate_cooling(const QuantumModel& model, double t_max,
                                   int sample_count,
                                   const EvolveOptions& options = {}) {
  if (t_max <= 0.0) throw DomainError("t_max must be > 0");
  if (sample_count < 8) throw DomainError("need at least 8 samples");

  Operators ops = build_operators(model.layout);
  std::vector<SpMat> observables;
  std::vector<int> mode_factors;
  for (size_t f = 0; f < model.layout.factors.size(); ++f)
    if (f < model.layout.is_fock.size() && model.layout.is_fock[f]) {
      observables.push_back(ops.number(static_cast<int>(f)));
      mode_factors.push_back(static_cast<int>(f));
    }
  if (observables.empty())
    throw DomainError("model has no Fock factors to track");

  std::vector<double> grid(sample_count);
  for (int i = 0; i < sample_count; ++i)
    grid[i] = t_max * i / (sample_count - 1.0);

  EvolveResult ev = evolve(model, grid, observables, options);

  CoolingRun run;
  run.times = ev.times;
  run.nbar = ev.expectations;
  run.hygiene = ev.hygiene;
  run.dt = ev.dt;
  run.steps = ev.steps;

  for (size_t m = 0; m < run.nbar.size(); ++m) {
    const auto& y = run.nbar[m];
    ExpFit first = fit_exponential(run.times, y);
    ExpFit fit = first;
    if (!first.heating && first.rate > 0.0) {
      const double t_from = 0.5 / first.rate;
      std::vector<double> tw, yw;
      for (size_t i = 0; i < run.times.size(); ++i)
        if (run.times[i] >= t_from) {
          tw.push_back(run.times[i]);
          yw.push_back(y[i]);
        }
      if (tw.size() >= 8) fit = fit_exponential(tw, yw, first.rate);
    }
    ModeFit mf;
    mf.w = fit.rate;
    mf.n_ss = fit.floor;
    mf.amplitude = fit.amplitude;
    mf.residual_rms = fit.residual_rms;
    mf.heating = fit.heating;
    run.fits.push_back(mf);
  }
  return run;
}

struct AbsorptionProfile {
  std::vector<double> detunings;  // probe detuning grid
  std::vector<double> scattering; // gamma * <e>_ss
};

// Steady-state scattering rate of the bare three-level system versus
// probe detuning: the EIT null at Delta_g = Delta_r and the dressed-state
// peak near Delta_r + delta_ac.
inline AbsorptionProfile absorption_profile(const LaserTone& driving,
                                            const AtomParams& atom,
                                            const std::vector<double>& grid,
                                            double probe_rabi) {
  driving.validate();
  atom.validate();
  if (probe_rabi <= 0.0) throw DomainError("probe Rabi must be > 0");
  if (grid.empty()) throw DomainError("detuning grid is empty");

  AbsorptionProfile profile;
  profile.detunings = grid;
  profile.scattering.reserve(grid.size());

  HilbertLayout layout;
  layout.factors = {3};
  layout.is_fock = {false};
  Operators ops = build_operators(layout);
  auto proj = [&](int i, int j) { return ops.transition(0, i, j); };
  const int g = 0, r = 1, e = 2;

  for (double delta_g : grid) {
    QuantumModel model;
    model.layout = layout;
    SpMat h = SpMat(-delta_g * proj(e, e)) +
              SpMat(-(delta_g - driving.detuning) * proj(r, r)) +
              SpMat((0.5 * probe_rabi) * SpMat(proj(e, g) + proj(g, e))) +
              SpMat((0.5 * driving.rabi) * SpMat(proj(e, r) + proj(r, e)));
    model.hamiltonian_terms.push_back({h, 0.0});
    model.jump_operators.push_back({proj(g, e), atom.gamma_g});
    model.jump_operators.push_back({proj(r, e), atom.gamma_r});
    model.initial_state = Mat::Zero(3, 3);
    model.initial_state(g, g) = 1.0;

    const Mat rho = steady_state(model);
    profile.scattering.push_back(atom.gamma * rho(e, e).real());
  }
  return profile;
}

} // namespace peit
