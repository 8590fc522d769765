#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "peit/errors.hpp"
#include "peit/units.hpp"

// Analytic cooling and heating rates of a driven Lambda system coupled to
// one motional mode, to lowest order in the Lamb-Dicke expansion.  Level
// scheme: ground |g>, excited |e> (linewidth gamma), metastable |r>; probe
// g-e with Rabi Omega_g and detuning Delta_g, driving r-e with Omega_r and
// Delta_r; two-photon detuning Delta_gr = Delta_g - Delta_r.

namespace peit {

using cplx = std::complex<double>;

struct LaserTone {
  double rabi = 0.0;     // rad/us
  double detuning = 0.0; // rad/us
  // cos(phi) between the beam and each motional axis
  std::array<double, 3> axis_projection{1.0, 0.0, 0.0};

  void validate() const {
    if (rabi < 0.0) throw DomainError("rabi must be >= 0");
    for (double c : axis_projection)
      if (std::abs(c) > 1.0 + 1e-12)
        throw DomainError("axis projection must lie in [-1, 1]");
  }
};

struct AtomParams {
  double gamma = 0.0;   // total linewidth of |e>, rad/us
  double gamma_g = 0.0; // decay to |g>
  double gamma_r = 0.0; // decay to |r>
  double alpha = 1.0 / 3.0; // recoil second moment (1/3 = isotropic)

  static AtomParams balanced(double gamma, double alpha = 1.0 / 3.0) {
    return {gamma, 0.5 * gamma, 0.5 * gamma, alpha};
  }

  void validate() const {
    if (gamma <= 0.0) throw DomainError("gamma must be positive");
    if (gamma_g < 0.0 || gamma_r < 0.0)
      throw DomainError("branching rates must be >= 0");
    if (std::abs(gamma_g + gamma_r - gamma) > 1e-12 * gamma)
      throw DomainError("branching rates must sum to gamma");
    if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must be in [0,1]");
  }
};

// Exact ac Stark shift of the driving beam, and its far-detuned estimate.
inline double ac_stark_shift(const LaserTone& driving) {
  const double o = driving.rabi, d = driving.detuning;
  return 0.5 * (std::sqrt(o * o + d * d) - std::abs(d));
}

inline double ac_stark_shift_approx(const LaserTone& driving) {
  if (driving.detuning == 0.0)
    throw DomainError("approximate Stark shift needs a nonzero detuning");
  return driving.rabi * driving.rabi / (4.0 * std::abs(driving.detuning));
}

// Driving Rabi frequency that realizes a requested Stark shift (exact
// inverse of ac_stark_shift for blue detuning).
inline double driving_rabi_for_stark(double ac_stark, double detuning) {
  if (ac_stark < 0.0) throw DomainError("ac Stark shift must be >= 0");
  return 2.0 * std::sqrt(ac_stark * (std::abs(detuning) + ac_stark));
}

struct DressedState {
  double mixing_angle = 0.0;  // phi = arctan(|Omega_r|/Delta_r)/2
  double energy_plus = 0.0;   // E+- = (-Delta_r +- sqrt(Or^2+Dr^2))/2
  double energy_minus = 0.0;
  double ac_stark = 0.0;           // = E+ for blue-detuned driving
  double effective_linewidth = 0.0; // gamma_+ = gamma sin^2(phi)
};

inline DressedState make_dressed(const LaserTone& driving,
                                 const AtomParams& atom) {
  DressedState d;
  const double root = std::sqrt(driving.rabi * driving.rabi +
                                driving.detuning * driving.detuning);
  d.mixing_angle = 0.5 * std::atan2(std::abs(driving.rabi), driving.detuning);
  d.energy_plus = 0.5 * (-driving.detuning + root);
  d.energy_minus = 0.5 * (-driving.detuning - root);
  d.ac_stark = ac_stark_shift(driving);
  const double s = std::sin(d.mixing_angle);
  d.effective_linewidth = atom.gamma * s * s;
  return d;
}

// Response denominator f(x) = (Dg+x)(Dgr+x) - Or^2/4 + i (Dgr+x) gamma/2.
inline cplx char_function(double x, const LaserTone& probe,
                          const LaserTone& driving, const AtomParams& atom) {
  const double dg = probe.detuning;
  const double dgr = probe.detuning - driving.detuning;
  return {(dg + x) * (dgr + x) - 0.25 * driving.rabi * driving.rabi,
          0.5 * (dgr + x) * atom.gamma};
}

// The seven scattering amplitudes: carrier (t_s) plus three sideband
// pathways per direction.  cooling[] is evaluated at x = +omega (feeds
// A-), heating[] at x = -omega (feeds A+).
struct PathwayAmplitudes {
  cplx t_s{};
  std::array<cplx, 3> cooling{};
  std::array<cplx, 3> heating{};

  cplx cooling_sum() const { return cooling[0] + cooling[1] + cooling[2]; }
  cplx heating_sum() const { return heating[0] + heating[1] + heating[2]; }
};

inline PathwayAmplitudes transition_amplitudes(double mode_freq,
                                               const LaserTone& probe,
                                               const LaserTone& driving,
                                               const AtomParams& atom,
                                               double eta_g, double eta_r,
                                               int axis = 0) {
  if (mode_freq <= 0.0) throw DomainError("mode frequency must be positive");
  probe.validate();
  driving.validate();
  atom.validate();

  const double og = probe.rabi, orr = driving.rabi;
  const double dgr = probe.detuning - driving.detuning;
  const double cg = probe.axis_projection[axis];
  const double cr = driving.axis_projection[axis];

  const cplx f0 = char_function(0.0, probe, driving, atom);
  if (std::abs(f0) == 0.0)
    throw PoleError("f(0) = 0: probe sits on an undamped resonance");

  PathwayAmplitudes amp;
  amp.t_s = eta_g * 0.5 * og * dgr / f0;

  const cplx i(0.0, 1.0);
  auto side = [&](double x) -> std::array<cplx, 3> {
    const cplx fx = char_function(x, probe, driving, atom);
    if (std::abs(fx) == 0.0)
      throw PoleError("f(x) = 0: sideband sits on an undamped resonance");
    const cplx t1 = -i * eta_g * cg * 0.5 * og * (x + dgr) / fx;
    const cplx t2 =
        -i * eta_r * cr * 0.25 * orr * og * (0.5 * orr / f0) * ((x + dgr) / fx);
    const cplx t3 =
        i * eta_r * cr * 0.25 * orr * og * (dgr / f0) * (0.5 * orr / fx);
    return {t1, t2, t3};
  };
  amp.cooling = side(+mode_freq);
  amp.heating = side(-mode_freq);
  return amp;
}

struct RateReport {
  double a_plus = 0.0;  // heating coefficient, 1/us
  double a_minus = 0.0; // cooling coefficient, 1/us
  double w = 0.0;       // cooling rate A- - A+
  double n_ss = 0.0;    // steady phonon number A+/W; inf when divergent
  bool divergent = false; // W <= 0: no steady state
  PathwayAmplitudes per_pathway;
};

inline RateReport rates(double mode_freq, const LaserTone& probe,
                        const LaserTone& driving, const AtomParams& atom,
                        double eta_g, double eta_r, int axis = 0) {
  RateReport r;
  r.per_pathway =
      transition_amplitudes(mode_freq, probe, driving, atom, eta_g, eta_r, axis);

  const double carrier = atom.alpha * atom.gamma * std::norm(r.per_pathway.t_s);
  r.a_minus = carrier + atom.gamma * std::norm(r.per_pathway.cooling_sum());
  r.a_plus = carrier + atom.gamma * std::norm(r.per_pathway.heating_sum());
  r.w = r.a_minus - r.a_plus;
  if (r.w > 0.0) {
    r.n_ss = r.a_plus / r.w;
  } else {
    r.n_ss = std::numeric_limits<double>::infinity();
    r.divergent = true;
  }
  return r;
}

// Cooling condition: red sideband of the narrow dressed state,
// Delta_gr - delta_ac = -omega.
inline double optimal_probe_detuning(double mode_freq, double ac_stark,
                                     double driving_detuning) {
  if (ac_stark < 0.0) throw DomainError("ac Stark shift must be >= 0");
  return driving_detuning + ac_stark - mode_freq;
}

// Far-detuned limits: W ~ eta^2 Og^2/gamma and the EIT floor scaled by R.
// eta here is the two-photon Lamb-Dicke parameter (eta_g ~ eta_r = eta/2).
struct ApproxLimits {
  double w_approx = 0.0;
  double n_eit = 0.0;
  double r_factor = 1.0;
  double n_st = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  bool regime_ok = false; // |Delta_g| >> omega, |Delta_gr|, delta_ac
};

inline ApproxLimits approximate_limits(double mode_freq, const LaserTone& probe,
                                       const LaserTone& driving,
                                       const AtomParams& atom, double eta) {
  if (mode_freq <= 0.0) throw DomainError("mode frequency must be positive");
  atom.validate();
  const double dg = probe.detuning;
  if (dg == 0.0) throw DomainError("probe detuning must be nonzero");
  const double dac = ac_stark_shift(driving);
  const double ratio = dac / mode_freq;

  ApproxLimits lim;
  lim.eta1 = eta;
  const double branch = dg > 0.0 ? 1.0 - ratio : 1.0 + ratio;
  lim.r_factor = 1.0 + 4.0 * atom.alpha * branch * branch;
  lim.eta2 = eta * std::sqrt(lim.r_factor);
  lim.w_approx = lim.eta1 * lim.eta1 * probe.rabi * probe.rabi / atom.gamma;
  lim.n_eit = atom.gamma * atom.gamma / (16.0 * dg * dg);
  lim.n_st = lim.r_factor * lim.n_eit;

  const double dgr = std::abs(dg - driving.detuning);
  const double scale = std::max({mode_freq, dgr, dac});
  lim.regime_ok = std::abs(dg) >= 10.0 * scale;
  return lim;
}

// Heating contribution of each probe tone on a mode at omega: carrier and
// blue-sideband Lorentzians of the narrow dressed resonance.
struct MultiToneHeating {
  double total = 0.0;
  std::vector<double> per_tone;
};

inline MultiToneHeating multi_tone_heating(double mode_freq,
                                           const std::vector<LaserTone>& tones,
                                           const DressedState& dressed,
                                           const AtomParams& atom, double eta) {
  if (mode_freq <= 0.0) throw DomainError("mode frequency must be positive");
  if (dressed.effective_linewidth <= 0.0)
    throw DomainError("dressed linewidth must be positive");

  const double gp = dressed.effective_linewidth;
  const double dac = dressed.ac_stark;
  const double sin_phi = std::sin(dressed.mixing_angle);
  // E+ + E- = -Delta_r recovers the driving detuning
  const double dr = -(dressed.energy_plus + dressed.energy_minus);

  MultiToneHeating h;
  h.per_tone.reserve(tones.size());
  for (const LaserTone& tone : tones) {
    const double dglr = tone.detuning - dr;
    const double o_plus = tone.rabi * sin_phi;
    const double wc = dglr / mode_freq;                // carrier weight
    const double wb = (dglr - mode_freq) / mode_freq;  // blue-sideband weight
    const double carrier =
        atom.alpha * wc * wc /
        (std::pow(dglr - dac, 2) + 0.25 * gp * gp * wc * wc);
    const double blue =
        wb * wb /
        (std::pow(dglr - dac - mode_freq, 2) + 0.25 * gp * gp * wb * wb);
    const double a = gp * eta * eta * 0.25 * o_plus * o_plus * (carrier + blue);
    h.per_tone.push_back(a);
    h.total += a;
  }
  return h;
}

// Closed-form relaxation <n(t)> = n_ss + (n0 - n_ss) e^{-Wt}.
struct PhononTrajectory {
  std::vector<double> nbar;
  bool heating = false;
};

inline PhononTrajectory phonon_trajectory(double n0, const RateReport& report,
                                          const std::vector<double>& times) {
  PhononTrajectory traj;
  traj.heating = report.w <= 0.0;
  // In the heating regime the exponential diverges; report it as-is with
  // the asymptote replaced by the formal A+/W.
  const double nss = traj.heating ? report.a_plus / report.w : report.n_ss;
  traj.nbar.reserve(times.size());
  for (double t : times)
    traj.nbar.push_back(nss + (n0 - nss) * std::exp(-report.w * t));
  return traj;
}

// eta(omega) used for the single-mode frequency sweeps.
inline double probe_eta_rule(double omega) {
  return 0.29 / std::sqrt(rad_us_to_mhz(omega));
}

struct SweepPoint {
  double omega = 0.0;
  double eta = 0.0;
  double nss_parallel = 0.0;
  double w_parallel = 0.0;
  double nss_eit = 0.0;
  double w_eit = 0.0;
  bool parallel_divergent = false;
  bool eit_divergent = false;
};

// n_ss and W over a mode-frequency grid for two probe strategies: detuning
// following the cooling condition, and fixed at the EIT point Dg = Dr.
// The driving Rabi is derived from the requested Stark shift.
inline std::vector<SweepPoint> sweep_mode_frequency(
    const std::vector<double>& omega_grid, double ac_stark, LaserTone driving,
    double probe_rabi, const AtomParams& atom,
    const std::function<double(double)>& eta_rule = probe_eta_rule) {
  if (omega_grid.empty()) throw DomainError("frequency grid is empty");
  driving.rabi = driving_rabi_for_stark(ac_stark, driving.detuning);

  std::vector<SweepPoint> out;
  out.reserve(omega_grid.size());
  for (double w : omega_grid) {
    SweepPoint p;
    p.omega = w;
    p.eta = eta_rule(w);
    const double eta_beam = 0.5 * p.eta;

    LaserTone probe;
    probe.rabi = probe_rabi;
    probe.axis_projection = {1.0, 0.0, 0.0};

    probe.detuning = optimal_probe_detuning(w, ac_stark, driving.detuning);
    RateReport par = rates(w, probe, driving, atom, eta_beam, eta_beam);
    p.nss_parallel = par.n_ss;
    p.w_parallel = par.w;
    p.parallel_divergent = par.divergent;

    probe.detuning = driving.detuning;
    RateReport eit = rates(w, probe, driving, atom, eta_beam, eta_beam);
    p.nss_eit = eit.n_ss;
    p.w_eit = eit.w;
    p.eit_divergent = eit.divergent;

    out.push_back(p);
  }
  return out;
}

} // namespace peit
