#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peit/errors.hpp"
#include "peit/units.hpp"

// Normal modes of a linear ion chain in a harmonic trap.  Positions are
// solved in units of the Coulomb length l = (e^2 / 4 pi eps0 M wz^2)^(1/3);
// mode frequencies follow from the scaled Hessian, whose eigenvalues are
// mass- and frequency-independent.

namespace peit {

struct ChainConfig {
  int ion_count = 1;
  double mass_kg = ca40_mass_si;
  double omega_z = 0.0; // axial,      rad/us
  double omega_x = 0.0; // transverse, rad/us
  double omega_y = 0.0; // transverse, rad/us

  void validate() const {
    if (ion_count < 1) throw DomainError("ion_count must be >= 1");
    if (omega_z <= 0.0) throw DomainError("omega_z must be positive");
    if (mass_kg <= 0.0) throw DomainError("mass must be positive");
  }
};

struct EquilibriumSolution {
  std::vector<double> positions; // scaled by the Coulomb length, ascending
  double length_scale_um = 0.0;
  double residual = 0.0; // max |force| at the solution, scaled units
};

enum class Axis { x, y, z };

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    default: return "z";
  }
}

struct ModeStructure {
  Axis branch = Axis::z;
  std::vector<double> frequencies; // rad/us, ascending within the branch
  Eigen::MatrixXd eigenvectors;    // column k <-> frequencies[k]
  Eigen::MatrixXd lamb_dicke;      // eta_jk; empty until attached
};

namespace detail {

// Scaled axial force on each ion: F_i = -u_i + sum_j sgn(u_i-u_j)/(u_i-u_j)^2.
inline Eigen::VectorXd chain_force(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd f = -u;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = u[i] - u[j];
      f[i] += (d > 0 ? 1.0 : -1.0) / (d * d);
    }
  return f;
}

// Jacobian of the force (negative of the scaled axial Hessian).
inline Eigen::MatrixXd chain_force_jacobian(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd jac = -Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = u[i] - u[j];
      const double c = 2.0 / std::abs(d * d * d);
      jac(i, i) -= c;
      jac(i, j) += c;
    }
  return jac;
}

// Fix the overall sign of each eigenvector: first non-negligible component
// positive. Picking the largest component instead would tie-break on
// floating-point noise for symmetric chains.
inline void fix_eigenvector_signs(Eigen::MatrixXd& b) {
  for (int k = 0; k < b.cols(); ++k) {
    for (int i = 0; i < b.rows(); ++i) {
      if (std::abs(b(i, k)) <= 1e-9) continue;
      if (b(i, k) < 0.0) b.col(k) = -b.col(k);
      break;
    }
  }
}

} // namespace detail

inline EquilibriumSolution equilibrium_positions(const ChainConfig& config) {
  config.validate();
  const int n = config.ion_count;

  EquilibriumSolution sol;
  const double wz_si = config.omega_z * 1.0e6;
  sol.length_scale_um =
      std::cbrt(elem_charge_si * elem_charge_si /
                (4.0 * pi * eps0_si * config.mass_kg * wz_si * wz_si)) *
      1.0e6;

  if (n == 1) {
    sol.positions = {0.0};
    return sol;
  }

  // Damped Newton from a uniformly spaced guess; the empirical span
  // 0.6 N^0.56 keeps the start inside the basin for any N we care about.
  Eigen::VectorXd u(n);
  const double span = 0.6 * std::pow(n, 0.56);
  for (int i = 0; i < n; ++i)
    u[i] = span * (-1.0 + 2.0 * i / (n - 1.0));

  const double target = 1.0e-10;
  double res = detail::chain_force(u).cwiseAbs().maxCoeff();
  for (int iter = 0; iter < 200 && res > target; ++iter) {
    const Eigen::VectorXd f = detail::chain_force(u);
    const Eigen::VectorXd du = detail::chain_force_jacobian(u).lu().solve(f);
    double step = 1.0;
    for (int half = 0; half < 30; ++half) {
      const Eigen::VectorXd trial = u - step * du;
      const double trial_res = detail::chain_force(trial).cwiseAbs().maxCoeff();
      if (trial_res < res || half == 29) {
        u = trial;
        res = trial_res;
        break;
      }
      step *= 0.5;
    }
  }
  if (res > target)
    throw SolverFailure("equilibrium solve did not converge", res);

  std::sort(u.begin(), u.end());
  sol.positions.assign(u.begin(), u.end());
  sol.residual = res;
  return sol;
}

// Scaled axial Hessian; eigenvalues lambda give mode frequencies
// wz*sqrt(lambda) axially and sqrt(wt^2 - (lambda-1) wz^2 / 2) transversally.
inline Eigen::MatrixXd axial_hessian(const std::vector<double>& positions) {
  const int n = static_cast<int>(positions.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::abs(positions[i] - positions[j]);
      const double c = 2.0 / (d * d * d);
      a(i, i) += c;
      a(i, j) -= c;
    }
  return a;
}

inline ModeStructure axial_modes(const ChainConfig& config) {
  const EquilibriumSolution eq = equilibrium_positions(config);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      axial_hessian(eq.positions));

  ModeStructure m;
  m.branch = Axis::z;
  m.eigenvectors = es.eigenvectors(); // eigenvalues ascending -> freqs too
  detail::fix_eigenvector_signs(m.eigenvectors);
  m.frequencies.resize(config.ion_count);
  for (int k = 0; k < config.ion_count; ++k)
    m.frequencies[k] = config.omega_z * std::sqrt(es.eigenvalues()[k]);
  return m;
}

inline ModeStructure transverse_modes(const ChainConfig& config, Axis axis) {
  if (axis == Axis::z) throw DomainError("transverse axis must be x or y");
  const double wt = axis == Axis::x ? config.omega_x : config.omega_y;
  if (wt <= 0.0) throw DomainError("transverse frequency must be positive");

  const EquilibriumSolution eq = equilibrium_positions(config);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      axial_hessian(eq.positions));

  // Larger axial curvature softens the transverse branch, so frequencies
  // descend with lambda; reverse to keep them ascending.
  const int n = config.ion_count;
  ModeStructure m;
  m.branch = axis;
  m.frequencies.resize(n);
  m.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    const double lam = es.eigenvalues()[n - 1 - k];
    const double w2 = wt * wt - 0.5 * (lam - 1.0) * config.omega_z * config.omega_z;
    if (w2 <= 0.0)
      throw StructuralInstability(
          "linear chain unstable along " + std::string(axis_name(axis)) +
          ": zigzag threshold crossed at mode " + std::to_string(k));
    m.frequencies[k] = std::sqrt(w2);
    m.eigenvectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  detail::fix_eigenvector_signs(m.eigenvectors);
  return m;
}

// eta_jk = k_proj * sqrt(hbar / 2 M w_k) * b_jk for every ion j, mode k.
inline Eigen::MatrixXd lamb_dicke_factors(const ModeStructure& modes,
                                          double k_proj_rad_um,
                                          double mass_kg = ca40_mass_si) {
  const int n = static_cast<int>(modes.frequencies.size());
  Eigen::MatrixXd eta(n, n);
  for (int k = 0; k < n; ++k) {
    const double scale =
        lamb_dicke_single(k_proj_rad_um, mass_kg, modes.frequencies[k]);
    eta.col(k) = scale * modes.eigenvectors.col(k);
  }
  return eta;
}

} // namespace peit
