#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "peit/rates.hpp"

using namespace peit;

namespace {

// Working point modeled on the 40Ca+ setup: far blue-detuned driving beam
// with a 2 MHz light shift, probe on the dressed red sideband.
LaserTone driving_330(double stark_mhz = 2.0) {
  LaserTone d;
  d.detuning = mhz_to_rad_us(330.0);
  d.rabi = driving_rabi_for_stark(mhz_to_rad_us(stark_mhz), d.detuning);
  d.axis_projection = {-1.0, 0.0, 0.0};
  return d;
}

AtomParams atom_207() { return AtomParams::balanced(mhz_to_rad_us(20.7)); }

} // namespace

TEST(Stark, ExactShiftAndInverse) {
  LaserTone d;
  d.rabi = 0.0;
  d.detuning = mhz_to_rad_us(330.0);
  EXPECT_EQ(ac_stark_shift(d), 0.0);

  // 51.54 MHz Rabi at 330 MHz detuning shifts the dark resonance by 2 MHz.
  d.rabi = mhz_to_rad_us(51.54);
  EXPECT_NEAR(rad_us_to_mhz(ac_stark_shift(d)), 2.0, 3e-4);

  // Resonant-strength driving: delta_ac = Dr (sqrt(2) - 1) / 2.
  d.rabi = d.detuning;
  EXPECT_NEAR(ac_stark_shift(d), d.detuning * (std::sqrt(2.0) - 1.0) / 2.0,
              1e-12);

  // driving_rabi_for_stark is the exact inverse.
  for (double s : {0.5, 2.0, 7.3}) {
    LaserTone t;
    t.detuning = mhz_to_rad_us(330.0);
    t.rabi = driving_rabi_for_stark(mhz_to_rad_us(s), t.detuning);
    EXPECT_NEAR(ac_stark_shift(t), mhz_to_rad_us(s), 1e-10);
  }

  // Far-detuned estimate approaches the exact value.
  LaserTone far;
  far.detuning = mhz_to_rad_us(500.0);
  far.rabi = mhz_to_rad_us(10.0);
  EXPECT_NEAR(ac_stark_shift_approx(far) / ac_stark_shift(far), 1.0, 1e-4);
  far.detuning = 0.0;
  EXPECT_THROW(ac_stark_shift_approx(far), DomainError);
}

TEST(Dressed, EnergiesAndLinewidth) {
  const LaserTone d = driving_330();
  const AtomParams atom = atom_207();
  const DressedState ds = make_dressed(d, atom);

  // Blue-detuned driving: the light shift is the upper dressed energy, and
  // the pair sums to -Delta_r.
  EXPECT_NEAR(ds.ac_stark, ds.energy_plus, 1e-10);
  EXPECT_NEAR(ds.energy_plus + ds.energy_minus, -d.detuning, 1e-9);

  // Exact algebraic identity: delta_ac (delta_ac + Delta_r) = Or^2 / 4.
  EXPECT_NEAR(ds.ac_stark * (ds.ac_stark + d.detuning),
              0.25 * d.rabi * d.rabi, 1e-6 * 0.25 * d.rabi * d.rabi);

  // Narrow dressed state inherits gamma sin^2(phi).
  const double s = std::sin(ds.mixing_angle);
  EXPECT_NEAR(ds.effective_linewidth, atom.gamma * s * s, 1e-12);
  EXPECT_LT(ds.effective_linewidth, 0.01 * atom.gamma);
}

TEST(CharFunction, FactorizesAndNulls) {
  LaserTone probe, driving = driving_330();
  probe.detuning = mhz_to_rad_us(2.0) + driving.detuning;
  AtomParams atom = atom_207();

  // gamma -> 0: f = (Dg+x)(Dgr+x) - Or^2/4, purely real.  char_function
  // itself does not validate, so gamma = 0 is reachable here.
  AtomParams cold;
  const cplx f = char_function(1.0, probe, driving, cold);
  const double dg = probe.detuning, dgr = probe.detuning - driving.detuning;
  EXPECT_NEAR(f.real(),
              (dg + 1.0) * (dgr + 1.0) - 0.25 * driving.rabi * driving.rabi,
              1e-6);
  EXPECT_EQ(f.imag(), 0.0);

  // Dgr + x = 0 kills the imaginary part at any gamma.
  EXPECT_EQ(char_function(-dgr, probe, driving, atom).imag(), 0.0);

  // On the cooling condition Dgr = delta_ac - omega, the real part of
  // f(+omega) vanishes by the exact Stark identity.
  const double w = mhz_to_rad_us(2.0);
  const double dac = ac_stark_shift(driving);
  probe.detuning = optimal_probe_detuning(w, dac, driving.detuning);
  const cplx fw = char_function(w, probe, driving, atom);
  EXPECT_LE(std::abs(fw.real()), 1e-6 * std::abs(fw));
}

TEST(Amplitudes, CarrierNullAtTwoPhotonResonance) {
  LaserTone probe, driving = driving_330();
  probe.rabi = mhz_to_rad_us(3.0);
  probe.detuning = driving.detuning; // Dgr = 0
  const auto amp = transition_amplitudes(mhz_to_rad_us(2.0), probe, driving,
                                         atom_207(), 0.05, 0.05);
  // Dark state: carrier scattering and the t3 pathway vanish identically.
  EXPECT_EQ(amp.t_s, cplx(0.0, 0.0));
  EXPECT_EQ(amp.cooling[2], cplx(0.0, 0.0));
  EXPECT_EQ(amp.heating[2], cplx(0.0, 0.0));
  // Sidebands survive: x +- omega is off the dark resonance.
  EXPECT_GT(std::abs(amp.cooling[0]), 0.0);
}

TEST(Amplitudes, VanishWithoutRecoil) {
  LaserTone probe, driving = driving_330();
  probe.rabi = mhz_to_rad_us(3.0);
  probe.detuning = driving.detuning + mhz_to_rad_us(1.0);
  const auto amp = transition_amplitudes(mhz_to_rad_us(2.0), probe, driving,
                                         atom_207(), 0.0, 0.0);
  EXPECT_EQ(std::abs(amp.t_s), 0.0);
  EXPECT_EQ(std::abs(amp.cooling_sum()), 0.0);
  EXPECT_EQ(std::abs(amp.heating_sum()), 0.0);
}

TEST(Amplitudes, CoolingDominatesOnCondition) {
  // Probe on the dressed red sideband: |sum t(+w)|^2 >> |sum t(-w)|^2.
  LaserTone probe, driving = driving_330();
  const double w = mhz_to_rad_us(2.0);
  probe.rabi = mhz_to_rad_us(3.0);
  probe.detuning =
      optimal_probe_detuning(w, ac_stark_shift(driving), driving.detuning);
  // Counterpropagating geometry: the driving beam carries axis projection
  // -1, so equal positive etas give opposing recoil kicks.
  const auto amp = transition_amplitudes(w, probe, driving, atom_207(),
                                         0.07, 0.07);
  EXPECT_GT(std::norm(amp.cooling_sum()), 100.0 * std::norm(amp.heating_sum()));
}

TEST(Rates, ZeroProbeAndScaling) {
  LaserTone probe, driving = driving_330();
  const double w = mhz_to_rad_us(2.0);
  probe.rabi = 0.0;
  probe.detuning =
      optimal_probe_detuning(w, ac_stark_shift(driving), driving.detuning);
  const auto r0 = rates(w, probe, driving, atom_207(), 0.05, 0.05);
  EXPECT_EQ(r0.a_minus, 0.0);
  EXPECT_EQ(r0.a_plus, 0.0);
  EXPECT_TRUE(r0.divergent);

  // All amplitudes are linear in Omega_g, so W scales as Omega_g^2.
  probe.rabi = mhz_to_rad_us(1.0);
  const auto r1 = rates(w, probe, driving, atom_207(), 0.05, 0.05);
  probe.rabi = mhz_to_rad_us(2.0);
  const auto r2 = rates(w, probe, driving, atom_207(), 0.05, 0.05);
  EXPECT_NEAR(r2.w / r1.w, 4.0, 1e-9);
  EXPECT_NEAR(r2.n_ss / r1.n_ss, 1.0, 1e-9);
}

TEST(Rates, WeakCouplingRateEstimate) {
  // On the cooling condition W ~ eta^2 Og^2 / gamma with eta the two-photon
  // Lamb-Dicke factor (eta_g = eta_r = eta / 2 for counterpropagating beams).
  LaserTone probe, driving = driving_330();
  const AtomParams atom = atom_207();
  const double w = mhz_to_rad_us(2.0);
  const double eta = 0.29 / std::sqrt(2.0);
  probe.rabi = mhz_to_rad_us(3.0);
  probe.detuning =
      optimal_probe_detuning(w, ac_stark_shift(driving), driving.detuning);
  const auto r =
      rates(w, probe, driving, atom, 0.5 * eta, 0.5 * eta);
  const double w_est = eta * eta * probe.rabi * probe.rabi / atom.gamma;
  EXPECT_NEAR(r.w / w_est, 1.0, 0.25);
}

TEST(Rates, EitFloorAtMatchedStark) {
  // delta_ac = omega puts the EIT point (Dg = Dr) on the cooling condition;
  // the steady phonon number is the gamma^2 / 16 Dg^2 floor.
  const double w = mhz_to_rad_us(2.0);
  LaserTone driving = driving_330(2.0);
  LaserTone probe;
  probe.rabi = mhz_to_rad_us(3.0);
  probe.detuning = driving.detuning;
  const AtomParams atom = atom_207();
  const double eta = 0.29 / std::sqrt(2.0);
  const auto r = rates(w, probe, driving, atom, 0.5 * eta, 0.5 * eta);
  const double floor =
      atom.gamma * atom.gamma / (16.0 * probe.detuning * probe.detuning);
  EXPECT_NEAR(r.n_ss / floor, 1.0, 0.25);
  EXPECT_NEAR(floor, 2.46e-4, 0.02e-4);
}

TEST(Rates, OptimalDetuningExamples) {
  EXPECT_NEAR(rad_us_to_mhz(optimal_probe_detuning(
                  mhz_to_rad_us(1.4), mhz_to_rad_us(1.2), mhz_to_rad_us(330))),
              329.8, 1e-12);
  EXPECT_NEAR(rad_us_to_mhz(optimal_probe_detuning(
                  mhz_to_rad_us(3.6), mhz_to_rad_us(2.0), mhz_to_rad_us(330))),
              328.4, 1e-12);
}

TEST(Limits, RecoilEnhancementFactor) {
  LaserTone probe, driving = driving_330();
  probe.rabi = mhz_to_rad_us(3.0);
  probe.detuning = mhz_to_rad_us(330.0);
  AtomParams atom = atom_207();

  // Matched Stark shift (delta_ac = omega) with blue probe: R = 1.
  const double w = ac_stark_shift(driving);
  auto lim = approximate_limits(w, probe, driving, atom, 0.2);
  EXPECT_NEAR(lim.r_factor, 1.0, 1e-9);
  EXPECT_NEAR(lim.n_st, lim.n_eit, 1e-12);

  // alpha = 0 removes the carrier recoil channel entirely.
  AtomParams flat = atom;
  flat.alpha = 0.0;
  lim = approximate_limits(0.5 * w, probe, driving, flat, 0.2);
  EXPECT_EQ(lim.r_factor, 1.0);

  // delta_ac / omega = 2 with alpha = 1/3: R = 1 + 4/3 = 7/3.
  lim = approximate_limits(0.5 * w, probe, driving, atom, 0.2);
  EXPECT_NEAR(lim.r_factor, 7.0 / 3.0, 1e-9);

  EXPECT_NEAR(lim.w_approx,
              0.2 * 0.2 * probe.rabi * probe.rabi / atom.gamma, 1e-9);
  EXPECT_NEAR(lim.eta2, 0.2 * std::sqrt(7.0 / 3.0), 1e-12);
}

TEST(MultiTone, AdditivityAndResonance) {
  const LaserTone driving = driving_330();
  const AtomParams atom = atom_207();
  const DressedState ds = make_dressed(driving, atom);
  const double w = mhz_to_rad_us(1.0);

  EXPECT_EQ(multi_tone_heating(w, {}, ds, atom, 0.1).total, 0.0);

  LaserTone t1;
  t1.rabi = mhz_to_rad_us(1.0);
  t1.detuning = driving.detuning + mhz_to_rad_us(3.0);
  const double single = multi_tone_heating(w, {t1}, ds, atom, 0.1).total;
  const auto twice = multi_tone_heating(w, {t1, t1}, ds, atom, 0.1);
  EXPECT_NEAR(twice.total, 2.0 * single, 1e-12);
  EXPECT_NEAR(twice.per_tone[0], twice.per_tone[1], 1e-15);

  // A tone sitting on the blue sideband of the dressed state dominates the
  // heating budget of a detuned ensemble.
  LaserTone hot = t1;
  hot.detuning = driving.detuning + ds.ac_stark + w;
  LaserTone cold1 = t1, cold2 = t1;
  cold1.detuning = driving.detuning + ds.ac_stark + 5.0 * w;
  cold2.detuning = driving.detuning + ds.ac_stark - 4.0 * w;
  const auto h = multi_tone_heating(w, {hot, cold1, cold2}, ds, atom, 0.1);
  EXPECT_GT(h.per_tone[0], 10.0 * h.per_tone[1]);
  EXPECT_GT(h.per_tone[0], 10.0 * h.per_tone[2]);
}

TEST(Trajectory, ClosedFormRelaxation) {
  RateReport r;
  r.w = 0.0183;
  r.n_ss = 0.1;
  r.a_plus = r.n_ss * r.w;
  r.a_minus = r.a_plus + r.w;
  const auto traj = phonon_trajectory(10.0, r, {0.0, 3.0 / r.w});
  EXPECT_FALSE(traj.heating);
  EXPECT_NEAR(traj.nbar[0], 10.0, 1e-12);
  EXPECT_NEAR(traj.nbar[1], 0.1 + 9.9 * std::exp(-3.0), 1e-12);

  RateReport bad = r;
  bad.w = -0.001;
  bad.a_minus = bad.a_plus + bad.w;
  EXPECT_TRUE(phonon_trajectory(1.0, bad, {0.0}).heating);
}

TEST(Sweep, StrategiesCoincideAtMatchedStark) {
  // At omega = delta_ac the cooling-condition detuning equals the EIT point,
  // so both strategy columns must agree to round-off.
  LaserTone driving;
  driving.detuning = mhz_to_rad_us(330.0);
  driving.axis_projection = {-1.0, 0.0, 0.0};
  const double stark = mhz_to_rad_us(2.0);
  const auto pts = sweep_mode_frequency({mhz_to_rad_us(2.0)}, stark, driving,
                                        mhz_to_rad_us(3.0), atom_207());
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_NEAR(pts[0].nss_parallel, pts[0].nss_eit,
              1e-12 * std::abs(pts[0].nss_eit));
  EXPECT_NEAR(pts[0].w_parallel, pts[0].w_eit,
              1e-12 * std::abs(pts[0].w_eit));
  EXPECT_NEAR(pts[0].eta, 0.29 / std::sqrt(2.0), 1e-12);
}

TEST(Validation, DomainErrors) {
  LaserTone probe, driving = driving_330();
  probe.rabi = -1.0;
  EXPECT_THROW(rates(1.0, probe, driving, atom_207(), 0.1, 0.1), DomainError);
  probe.rabi = 1.0;
  EXPECT_THROW(rates(-1.0, probe, driving, atom_207(), 0.1, 0.1), DomainError);
  EXPECT_THROW(driving_rabi_for_stark(-1.0, 330.0), DomainError);

  AtomParams bad;
  bad.gamma = 1.0;
  bad.gamma_g = 0.9;
  bad.gamma_r = 0.2;
  EXPECT_THROW(bad.validate(), DomainError);
}
