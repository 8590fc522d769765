#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "peit/errors.hpp"

// Composite Hilbert-space bookkeeping and operator construction.  States
// live on a tensor product of small factors (internal levels, Fock modes);
// operators are sparse and built by embedding local matrices.

namespace peit {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct HilbertLayout {
  std::vector<int> factors;  // local dimensions, slowest index first
  std::vector<bool> is_fock; // marks truncated oscillator factors
  int density_cap = 1024;    // max total dimension for density-matrix work
  int pure_cap = 8192;       // max total dimension for pure-state work

  int total_dim() const {
    int d = 1;
    for (int f : factors) d *= f;
    return d;
  }

  void validate(bool pure = false) const {
    if (factors.empty()) throw DomainError("layout has no factors");
    for (int f : factors)
      if (f < 2) throw DomainError("factor dimension must be >= 2");
    if (!is_fock.empty() && is_fock.size() != factors.size())
      throw DomainError("is_fock must match factors");
    const int cap = pure ? pure_cap : density_cap;
    if (total_dim() > cap)
      throw DimensionCapExceeded(
          "total dimension " + std::to_string(total_dim()) +
          " exceeds the configured cap " + std::to_string(cap));
  }

  // dimensions before and after factor f in the index ordering
  int dim_before(int f) const {
    return std::accumulate(factors.begin(), factors.begin() + f, 1,
                           std::multiplies<int>());
  }
  int dim_after(int f) const {
    return std::accumulate(factors.begin() + f + 1, factors.end(), 1,
                           std::multiplies<int>());
  }
};

// Operator factory bound to one layout.
class Operators {
 public:
  explicit Operators(HilbertLayout layout) : layout_(std::move(layout)) {
    if (layout_.factors.empty()) throw DomainError("layout has no factors");
  }

  const HilbertLayout& layout() const { return layout_; }

  SpMat identity() const {
    SpMat id(layout_.total_dim(), layout_.total_dim());
    id.setIdentity();
    return id;
  }

  // Embed a local operator acting on factor f.
  SpMat embed(int f, const Mat& local) const {
    check_factor(f);
    const int nf = layout_.factors[f];
    if (local.rows() != nf || local.cols() != nf)
      throw DomainError("local operator does not match factor dimension");
    const int pre = layout_.dim_before(f), post = layout_.dim_after(f);
    const int dim = layout_.total_dim();

    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(static_cast<size_t>(pre) * post * nf * nf);
    for (int p = 0; p < pre; ++p)
      for (int a = 0; a < nf; ++a)
        for (int b = 0; b < nf; ++b) {
          if (local(a, b) == cplx(0.0, 0.0)) continue;
          for (int q = 0; q < post; ++q)
            trips.emplace_back((p * nf + a) * post + q, (p * nf + b) * post + q,
                               local(a, b));
        }
    SpMat out(dim, dim);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  }

  SpMat destroy(int f) const {
    const int nf = dim_of(f);
    Mat a = Mat::Zero(nf, nf);
    for (int n = 1; n < nf; ++n) a(n - 1, n) = std::sqrt(double(n));
    return embed(f, a);
  }

  SpMat create(int f) const {
    const int nf = dim_of(f);
    Mat ad = Mat::Zero(nf, nf);
    for (int n = 1; n < nf; ++n) ad(n, n - 1) = std::sqrt(double(n));
    return embed(f, ad);
  }

  SpMat number(int f) const {
    const int nf = dim_of(f);
    Mat n = Mat::Zero(nf, nf);
    for (int k = 0; k < nf; ++k) n(k, k) = double(k);
    return embed(f, n);
  }

  // position quadrature a + a^dag
  SpMat quadrature(int f) const {
    const int nf = dim_of(f);
    Mat x = Mat::Zero(nf, nf);
    for (int n = 1; n < nf; ++n) {
      x(n - 1, n) = std::sqrt(double(n));
      x(n, n - 1) = std::sqrt(double(n));
    }
    return embed(f, x);
  }

  // |a><b| on factor f
  SpMat transition(int f, int a, int b) const {
    const int nf = dim_of(f);
    if (a < 0 || a >= nf || b < 0 || b >= nf)
      throw DomainError("transition indices out of range");
    Mat t = Mat::Zero(nf, nf);
    t(a, b) = 1.0;
    return embed(f, t);
  }

  // Projector onto local level a of factor f.
  SpMat projector(int f, int a) const { return transition(f, a, a); }

 private:
  int dim_of(int f) const {
    check_factor(f);
    return layout_.factors[f];
  }
  void check_factor(int f) const {
    if (f < 0 || f >= static_cast<int>(layout_.factors.size()))
      throw DomainError("factor index out of range");
  }

  HilbertLayout layout_;
};

inline Operators build_operators(const HilbertLayout& layout) {
  return Operators(layout);
}

// One Hamiltonian term.  nu == 0: the matrix itself, required Hermitian.
// nu != 0: contributes M e^{i nu t} + M^dag e^{-i nu t}.
struct OperatorTerm {
  SpMat matrix;
  double nu = 0.0;
};

inline double hermiticity_defect(const SpMat& m) {
  SpMat madj = m.adjoint();
  SpMat diff = m - madj;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  return worst;
}

struct JumpOperator {
  SpMat matrix;
  double rate = 0.0; // 1/us
};

// Extremal eigenvalues of a Hermitian matrix.  Small matrices go through
// the direct solver; larger ones use a fixed-iteration Lanczos estimate,
// which is plenty for hygiene checks on near-positive density matrices.
inline std::pair<double, double> extremal_eigenvalues(const Mat& a,
                                                      int iters = 60) {
  const int n = static_cast<int>(a.rows());
  if (n <= 128) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(n - 1)};
  }
  iters = std::min(iters, n);
  Eigen::VectorXd alpha(iters), beta(iters);
  Vec v = Vec::Constant(n, cplx(1.0 / std::sqrt(double(n)), 0.0));
  Vec v_prev = Vec::Zero(n);
  double b_prev = 0.0;
  int m = 0;
  for (; m < iters; ++m) {
    Vec w = a * v;
    alpha(m) = w.dot(v).real();
    w -= alpha(m) * v + b_prev * v_prev;
    const double b = w.norm();
    beta(m) = b;
    if (b < 1e-14) {
      ++m;
      break;
    }
    v_prev = v;
    v = w / b;
    b_prev = b;
  }
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    tri(k, k) = alpha(k);
    if (k + 1 < m) tri(k, k + 1) = tri(k + 1, k) = beta(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri,
                                                    Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(m - 1)};
}

struct QuantumModel {
  HilbertLayout layout;
  std::vector<OperatorTerm> hamiltonian_terms;
  std::vector<JumpOperator> jump_operators;
  Mat initial_state;

  void validate() const {
    layout.validate();
    const int dim = layout.total_dim();
    for (const auto& term : hamiltonian_terms) {
      if (term.matrix.rows() != dim || term.matrix.cols() != dim)
        throw DomainError("Hamiltonian term dimension mismatch");
      if (term.nu == 0.0 && hermiticity_defect(term.matrix) > 1e-12)
        throw DomainError("static Hamiltonian term is not Hermitian");
    }
    for (const auto& jump : jump_operators) {
      if (jump.matrix.rows() != dim || jump.matrix.cols() != dim)
        throw DomainError("jump operator dimension mismatch");
      if (jump.rate < 0.0) throw DomainError("jump rate must be >= 0");
    }
    if (initial_state.rows() != dim || initial_state.cols() != dim)
      throw DomainError("initial state dimension mismatch");
    if ((initial_state - initial_state.adjoint()).cwiseAbs().maxCoeff() >
        1e-10)
      throw DomainError("initial state is not Hermitian");
    if (std::abs(initial_state.trace().real() - 1.0) > 1e-12 ||
        std::abs(initial_state.trace().imag()) > 1e-12)
      throw DomainError("initial state trace must be 1");
    if (extremal_eigenvalues(initial_state).first < -1e-10)
      throw DomainError("initial state is not positive semidefinite");
  }
};

// Renormalized thermal occupation on a truncated Fock ladder.
inline Eigen::VectorXd thermal_weights(int dim, double nbar) {
  if (dim < 1) throw DomainError("thermal ladder needs dim >= 1");
  if (nbar < 0.0) throw DomainError("nbar must be >= 0");
  Eigen::VectorXd p(dim);
  if (nbar == 0.0) {
    p.setZero();
    p(0) = 1.0;
    return p;
  }
  const double r = nbar / (1.0 + nbar);
  for (int n = 0; n < dim; ++n) p(n) = std::pow(r, n);
  p /= p.sum();
  return p;
}

// Probability mass the truncation discards (before renormalization).
inline double thermal_truncation_error(int dim, double nbar) {
  if (nbar == 0.0) return 0.0;
  return std::pow(nbar / (1.0 + nbar), dim);
}

inline Mat thermal_density(int dim, double nbar) {
  return thermal_weights(dim, nbar).cast<cplx>().asDiagonal();
}

// Population of the top two levels of Fock factor f: the truncation-error
// proxy tracked during evolution.
inline double fock_tail(const Mat& rho, const HilbertLayout& layout, int f) {
  const int nf = layout.factors[f];
  const int pre = layout.dim_before(f), post = layout.dim_after(f);
  double tail = 0.0;
  for (int p = 0; p < pre; ++p)
    for (int a = std::max(0, nf - 2); a < nf; ++a)
      for (int q = 0; q < post; ++q) {
        const int g = (p * nf + a) * post + q;
        tail += rho(g, g).real();
      }
  return tail;
}

inline double fock_tail(const Vec& psi, const HilbertLayout& layout, int f) {
  const int nf = layout.factors[f];
  const int pre = layout.dim_before(f), post = layout.dim_after(f);
  double tail = 0.0;
  for (int p = 0; p < pre; ++p)
    for (int a = std::max(0, nf - 2); a < nf; ++a)
      for (int q = 0; q < post; ++q) tail += std::norm(psi((p * nf + a) * post + q));
  return tail;
}

// tr(O rho), walking the sparse operator once.
inline cplx expectation(const SpMat& op, const Mat& rho) {
  cplx sum = 0.0;
  for (int k = 0; k < op.outerSize(); ++k)
    for (SpMat::InnerIterator it(op, k); it; ++it)
      sum += it.value() * rho(it.col(), it.row());
  return sum;
}

inline cplx expectation(const SpMat& op, const Vec& psi) {
  return psi.dot(op * psi);
}

// Suggested Fock truncation for a target occupation.
inline int suggested_truncation(double nbar) {
  return static_cast<int>(std::ceil(4.0 * nbar + 10.0));
}

} // namespace peit
