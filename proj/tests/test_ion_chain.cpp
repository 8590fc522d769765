#include <cmath>

#include <gtest/gtest.h>

#include "peit/ion_chain.hpp"

using namespace peit;

namespace {

ChainConfig chain(int n, double fz_mhz = 0.6, double fx_mhz = 1.706,
                  double fy_mhz = 1.754) {
  ChainConfig c;
  c.ion_count = n;
  c.omega_z = mhz_to_rad_us(fz_mhz);
  c.omega_x = mhz_to_rad_us(fx_mhz);
  c.omega_y = mhz_to_rad_us(fy_mhz);
  return c;
}

} // namespace

TEST(Equilibrium, TwoAndThreeIonsClosedForm) {
  // Two ions sit at +-(1/4)^(1/3); three at 0, +-(5/4)^(1/3).
  auto two = equilibrium_positions(chain(2));
  EXPECT_NEAR(two.positions[0], -0.6299605249474366, 1e-12);
  EXPECT_NEAR(two.positions[1], 0.6299605249474366, 1e-12);

  auto three = equilibrium_positions(chain(3));
  EXPECT_NEAR(three.positions[0], -1.0772173450159418, 1e-12);
  EXPECT_NEAR(three.positions[1], 0.0, 1e-12);
  EXPECT_NEAR(three.positions[2], 1.0772173450159418, 1e-12);
}

TEST(Equilibrium, FourIons) {
  auto four = equilibrium_positions(chain(4));
  EXPECT_NEAR(four.positions[0], -1.436801991924175, 1e-10);
  EXPECT_NEAR(four.positions[1], -0.454379280685671, 1e-10);
  EXPECT_NEAR(four.positions[2], 0.454379280685671, 1e-10);
  EXPECT_NEAR(four.positions[3], 1.436801991924175, 1e-10);
}

TEST(Equilibrium, ResidualAndSymmetry) {
  for (int n = 1; n <= 12; ++n) {
    auto sol = equilibrium_positions(chain(n));
    EXPECT_LE(sol.residual, 1e-10) << "n=" << n;
    for (int j = 0; j < n; ++j)
      EXPECT_NEAR(sol.positions[j], -sol.positions[n - 1 - j], 1e-9)
          << "n=" << n << " j=" << j;
    for (int j = 1; j < n; ++j)
      EXPECT_GT(sol.positions[j], sol.positions[j - 1]);
  }
}

TEST(Equilibrium, LengthScale) {
  // l = (e^2 / 4 pi eps0 M wz^2)^(1/3) for 40Ca+ at 600 kHz.
  auto sol = equilibrium_positions(chain(2));
  EXPECT_NEAR(sol.length_scale_um, 6.2541132447495285, 1e-9);
}

TEST(AxialModes, EigenvalueRatios) {
  auto two = axial_modes(chain(2));
  EXPECT_NEAR(two.frequencies[1] / two.frequencies[0], std::sqrt(3.0), 1e-9);

  auto three = axial_modes(chain(3));
  EXPECT_NEAR(three.frequencies[0], mhz_to_rad_us(0.6), 1e-9);
  EXPECT_NEAR(three.frequencies[1] / three.frequencies[0], std::sqrt(3.0),
              1e-9);
  EXPECT_NEAR(three.frequencies[2] / three.frequencies[0],
              std::sqrt(29.0 / 5.0), 1e-9);
}

TEST(AxialModes, FourIonSpectrumAndVectors) {
  auto m = axial_modes(chain(4));
  const double wz = mhz_to_rad_us(0.6);
  EXPECT_NEAR(m.frequencies[0] / wz, 1.0, 1e-9);
  EXPECT_NEAR(m.frequencies[1] / wz, std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(m.frequencies[2] / wz, std::sqrt(5.809937300562432), 1e-9);
  EXPECT_NEAR(m.frequencies[3] / wz, std::sqrt(9.308350249774904), 1e-9);

  // COM uniform, tilt tracks positions, quad and zigzag alternate;
  // sign convention: first non-negligible component positive.
  const double com[] = {0.5, 0.5, 0.5, 0.5};
  const double tilt[] = {0.674196814221216, 0.213210355503582,
                         -0.213210355503582, -0.674196814221216};
  const double quad[] = {0.5, -0.5, -0.5, 0.5};
  const double zigzag[] = {0.213210355503582, -0.674196814221216,
                           0.674196814221216, -0.213210355503582};
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(m.eigenvectors(j, 0), com[j], 1e-9);
    EXPECT_NEAR(m.eigenvectors(j, 1), tilt[j], 1e-9);
    EXPECT_NEAR(m.eigenvectors(j, 2), quad[j], 1e-9);
    EXPECT_NEAR(m.eigenvectors(j, 3), zigzag[j], 1e-9);
  }
}

TEST(AxialModes, Orthonormal) {
  for (int n = 2; n <= 8; ++n) {
    auto m = axial_modes(chain(n));
    Eigen::MatrixXd gram =
        m.eigenvectors.transpose() * m.eigenvectors;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(),
              1e-9)
        << "n=" << n;
  }
}

TEST(TransverseModes, FourIonRadialSpectrum) {
  auto mx = transverse_modes(chain(4), Axis::x);
  EXPECT_NEAR(rad_us_to_mhz(mx.frequencies[0]), 1.189509543904763, 1e-9);
  EXPECT_NEAR(rad_us_to_mhz(mx.frequencies[1]), 1.429911635695983, 1e-9);
  EXPECT_NEAR(rad_us_to_mhz(mx.frequencies[2]), 1.597008453327659, 1e-9);
  EXPECT_NEAR(rad_us_to_mhz(mx.frequencies[3]), 1.706, 1e-12);

  auto my = transverse_modes(chain(4), Axis::y);
  EXPECT_NEAR(rad_us_to_mhz(my.frequencies[0]), 1.257383376317866, 1e-9);
  EXPECT_NEAR(rad_us_to_mhz(my.frequencies[3]), 1.754, 1e-12);

  // Highest transverse mode is the COM at exactly the trap frequency.
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(mx.eigenvectors(j, 3), 0.5, 1e-9);
}

TEST(TransverseModes, TwoIonClosedForm) {
  auto m = transverse_modes(chain(2), Axis::x);
  const double wz = mhz_to_rad_us(0.6), wx = mhz_to_rad_us(1.706);
  EXPECT_NEAR(m.frequencies[0], std::sqrt(wx * wx - wz * wz), 1e-9);
  EXPECT_NEAR(m.frequencies[1], wx, 1e-12);
}

TEST(TransverseModes, ZigzagInstabilityDetected) {
  // Squeeze the radial confinement until the zigzag mode goes soft.
  EXPECT_THROW(transverse_modes(chain(4, 1.0, 1.1, 1.754), Axis::x),
               StructuralInstability);
  EXPECT_NO_THROW(transverse_modes(chain(4, 1.0, 2.5, 2.6), Axis::x));
}

TEST(LambDicke, SingleIonScaleAndScaling) {
  // 45 degree projection of the 729 nm wavevector on a 1.706 MHz mode.
  const double kproj = wavevector_rad_um(ca40_wavelength_nm) / std::sqrt(2.0);
  EXPECT_NEAR(kproj, 8.6172 / std::sqrt(2.0), 2e-4);

  auto m = transverse_modes(chain(1), Axis::x);
  auto eta = lamb_dicke_factors(m, kproj);
  EXPECT_NEAR(eta(0, 0), 0.05246166205181863, 1e-9);

  // eta scales as 1/sqrt(w).
  auto m2 = axial_modes(chain(1, 0.6 * 4.0));
  auto eta2 = lamb_dicke_factors(axial_modes(chain(1, 0.6)), kproj);
  EXPECT_NEAR(lamb_dicke_factors(m2, kproj)(0, 0) * 2.0, eta2(0, 0), 1e-12);
}

TEST(LambDicke, ModeNormAndComSharing) {
  const double kproj = wavevector_rad_um(ca40_wavelength_nm) / std::sqrt(2.0);
  auto m = transverse_modes(chain(4), Axis::x);
  auto eta = lamb_dicke_factors(m, kproj);

  for (int k = 0; k < 4; ++k) {
    // Root-sum-square over ions equals the single-ion factor at that
    // frequency: the chain redistributes but does not change the total.
    const double rss = eta.col(k).norm();
    EXPECT_NEAR(rss, lamb_dicke_single(kproj, ca40_mass_si, m.frequencies[k]),
                1e-12);
    // eta_jk * sqrt(w_k) / b_jk is a mode-independent constant.
    for (int j = 0; j < 4; ++j)
      EXPECT_NEAR(eta(j, k) * std::sqrt(m.frequencies[k]) /
                      m.eigenvectors(j, k),
                  kproj * std::sqrt(hbar_si / (2.0 * ca40_mass_si * 1e6)) * 1e6,
                  1e-12);
  }
  // COM factor is the single-ion one shared as 1/sqrt(N).
  EXPECT_NEAR(eta(0, 3),
              lamb_dicke_single(kproj, ca40_mass_si, m.frequencies[3]) / 2.0,
              1e-12);
}

TEST(LambDicke, TwoIonAxialCalibration) {
  // With the COM factor set to 0.24, the stretch factor is 0.24/3^(1/4).
  auto m = axial_modes(chain(2));
  const double scale_com =
      lamb_dicke_single(1.0, ca40_mass_si, m.frequencies[0]);
  const double kproj = 0.24 / scale_com; // mode-total eta = single-ion eta
  auto eta = lamb_dicke_factors(m, kproj);
  EXPECT_NEAR(eta.col(0).norm(), 0.24, 1e-12);
  EXPECT_NEAR(eta.col(1).norm(), 0.24 * std::pow(3.0, -0.25), 1e-12);
  EXPECT_NEAR(eta.col(1).norm(), 0.1823605645563822, 1e-9);
  // Stretch vector is antisymmetric: ions couple with opposite signs.
  EXPECT_NEAR(eta(0, 1), -eta(1, 1), 1e-12);
}

TEST(Config, Validation) {
  ChainConfig c;
  c.ion_count = 0;
  c.omega_z = 1.0;
  EXPECT_THROW(equilibrium_positions(c), DomainError);
  c.ion_count = 2;
  c.omega_z = -1.0;
  EXPECT_THROW(equilibrium_positions(c), DomainError);
  EXPECT_THROW(transverse_modes(chain(2), Axis::z), DomainError);
}
