#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "peit/errors.hpp"
#include "peit/hilbert.hpp"
#include "peit/units.hpp"

// Fixed-step RK4 propagation of Lindblad (density) and Schrodinger (pure)
// dynamics, with accuracy bookkeeping: trace/norm drift, Hermiticity,
// spectrum floor, and Fock-truncation tails are tracked at every sample.
//
// Models that conserve an excitation grading (sideband couplings plus
// grade-lowering jumps) keep a block-diagonal density matrix
// block-diagonal for all time.  evolve() detects that structure from the
// operator sparsity patterns and, when it pays off, integrates the blocks
// instead of the full matrix; the trajectory is identical, only the cost
// changes.

namespace peit {

struct EvolveOptions {
  double dt_override = 0.0; // > 0: replaces the automatic step
  double trace_tol = 1e-6;  // hard-failure threshold on |tr rho - 1|
  double norm_tol = 1e-6;   // hard-failure threshold on ||psi| - 1|
  int eig_checks = 8;       // samples that get a spectrum-floor check
};

struct HygieneReport {
  double trace_drift = 0.0;
  double hermiticity = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double fock_tail = 0.0;
  double norm_drift = 0.0;

  void absorb(const HygieneReport& o) {
    trace_drift = std::max(trace_drift, o.trace_drift);
    hermiticity = std::max(hermiticity, o.hermiticity);
    min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
    fock_tail = std::max(fock_tail, o.fock_tail);
    norm_drift = std::max(norm_drift, o.norm_drift);
  }
};

struct EvolveResult {
  std::vector<double> times;
  std::vector<std::vector<double>> expectations; // [observable][sample]
  Mat final_density;
  Vec final_pure;
  HygieneReport hygiene;
  double dt = 0.0;
  long long steps = 0;
};

namespace detail {

inline double gershgorin_bound(const SpMat& m) {
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      row_sums(it.row()) += std::abs(it.value());
  return row_sums.size() ? row_sums.maxCoeff() : 0.0;
}

// Automatic step: resolve the fastest drive tone, keep well under the
// fastest dissipative timescale, and stay inside the RK4 stability disk
// for the spectral spread of H plus the dissipator.
inline double auto_step(const std::vector<OperatorTerm>& terms,
                        const std::vector<JumpOperator>& jumps,
                        double fallback_span) {
  double dt = std::numeric_limits<double>::infinity();

  double nu_max = 0.0, h_mag = 0.0;
  for (const auto& t : terms) {
    nu_max = std::max(nu_max, std::abs(t.nu));
    const double g = gershgorin_bound(t.matrix);
    h_mag += t.nu == 0.0 ? g : 2.0 * g;
  }
  if (nu_max > 0.0) dt = std::min(dt, two_pi / nu_max / 20.0);

  double gamma_max = 0.0, diss = 0.0;
  for (const auto& j : jumps) {
    if (j.rate <= 0.0) continue;
    gamma_max = std::max(gamma_max, j.rate);
    SpMat ldl = SpMat(j.matrix.adjoint()) * j.matrix;
    diss += j.rate * gershgorin_bound(ldl);
  }
  if (gamma_max > 0.0) dt = std::min(dt, 0.05 / gamma_max);

  const double lam = 2.0 * h_mag + diss;
  if (lam > 0.0) dt = std::min(dt, 2.0 / lam);

  if (!std::isfinite(dt)) dt = fallback_span / 100.0; // nothing evolves
  return dt;
}

inline void check_sample_grid(const std::vector<double>& t) {
  if (t.empty()) throw DomainError("sample grid is empty");
  if (t.front() < 0.0) throw DomainError("sample times must be >= 0");
  for (size_t i = 1; i < t.size(); ++i)
    if (t[i] <= t[i - 1]) throw DomainError("sample times must increase");
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

// Invariant partition of basis states: Hamiltonian terms and every
// L^dag L act within parts, each jump maps every part into a single part,
// and the initial state carries no cross-part coherence.  Under these
// conditions a block-diagonal rho stays block-diagonal exactly.
inline std::vector<std::vector<int>> invariant_blocks(
    int dim, const std::vector<OperatorTerm>& terms,
    const std::vector<std::pair<double, SpMat>>& jumps, const Mat& rho0) {
  UnionFind uf(dim);
  auto unite_pattern = [&](const SpMat& m) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SpMat::InnerIterator it(m, k); it; ++it)
        uf.unite(it.row(), it.col());
  };
  for (const auto& t : terms) unite_pattern(t.matrix);
  for (const auto& [r, l] : jumps) {
    SpMat ldl = SpMat(l.adjoint()) * l;
    unite_pattern(ldl);
  }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      if (rho0(i, j) != cplx(0.0, 0.0)) uf.unite(i, j);

  // merge any two parts a jump feeds from the same source part; repeat
  // until every jump has a unique target per part
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [r, l] : jumps) {
      std::map<int, int> target;
      for (int k = 0; k < l.outerSize(); ++k)
        for (SpMat::InnerIterator it(l, k); it; ++it) {
          const int src = uf.find(it.col());
          const int dst = uf.find(it.row());
          auto [pos, fresh] = target.try_emplace(src, dst);
          if (!fresh && uf.find(pos->second) != dst) {
            uf.unite(uf.find(pos->second), dst);
            changed = true;
          }
        }
    }
  }

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < dim; ++i) groups[uf.find(i)].push_back(i);
  std::vector<std::vector<int>> blocks;
  blocks.reserve(groups.size());
  for (auto& [root, members] : groups) blocks.push_back(std::move(members));
  return blocks;
}

} // namespace detail

inline EvolveResult evolve(const QuantumModel& model,
                           const std::vector<double>& sample_times,
                           const std::vector<SpMat>& observables,
                           const EvolveOptions& options = {}) {
  model.validate();
  detail::check_sample_grid(sample_times);
  const int dim = model.layout.total_dim();

  // Static drift operator K = -i H0 - 1/2 sum_j r_j L_j^dag L_j; the
  // Hermitian completion of K rho reproduces commutator plus
  // anticommutator, so each stage preserves Hermiticity exactly.
  SpMat k_static(dim, dim);
  std::vector<std::pair<double, SpMat>> osc; // (nu, M)
  for (const auto& term : model.hamiltonian_terms) {
    if (term.nu == 0.0)
      k_static += SpMat(cplx(0.0, -1.0) * term.matrix);
    else
      osc.emplace_back(term.nu, term.matrix);
  }
  std::vector<std::pair<double, SpMat>> jumps; // (rate, L)
  for (const auto& j : model.jump_operators) {
    if (j.rate <= 0.0) continue;
    SpMat ldl = SpMat(j.matrix.adjoint()) * j.matrix;
    k_static += SpMat(cplx(-0.5 * j.rate, 0.0) * ldl);
    jumps.emplace_back(j.rate, j.matrix);
  }

  const double dt =
      options.dt_override > 0.0
          ? options.dt_override
          : detail::auto_step(model.hamiltonian_terms, model.jump_operators,
                              std::max(sample_times.back(), 1e-9));

  EvolveResult result;
  result.dt = dt;
  result.expectations.assign(observables.size(), {});
  const int n_samples = static_cast<int>(sample_times.size());
  const int eig_stride =
      options.eig_checks > 0
          ? std::max(1, n_samples / std::max(1, options.eig_checks))
          : 0;

  // ---- partition into invariant blocks; fall back to one flat block ----
  auto blocks =
      detail::invariant_blocks(dim, model.hamiltonian_terms, jumps,
                               model.initial_state);
  size_t packed_size = 0;
  for (const auto& b : blocks) packed_size += b.size() * b.size();
  const bool use_blocks =
      blocks.size() > 1 &&
      packed_size <= static_cast<size_t>(dim) * dim / 2;
  if (!use_blocks) {
    blocks.clear();
    blocks.push_back({});
    blocks[0].resize(dim);
    for (int i = 0; i < dim; ++i) blocks[0][i] = i;
    packed_size = static_cast<size_t>(dim) * dim;
  }
  const int n_blocks = static_cast<int>(blocks.size());

  std::vector<int> comp(dim), local(dim), offset(n_blocks), bsize(n_blocks);
  {
    size_t off = 0;
    for (int c = 0; c < n_blocks; ++c) {
      bsize[c] = static_cast<int>(blocks[c].size());
      offset[c] = static_cast<int>(off);
      for (int k = 0; k < bsize[c]; ++k) {
        comp[blocks[c][k]] = c;
        local[blocks[c][k]] = k;
      }
      off += static_cast<size_t>(bsize[c]) * bsize[c];
    }
  }
  int max_b = 0;
  for (int c = 0; c < n_blocks; ++c) max_b = std::max(max_b, bsize[c]);

  // per-block operators (flat case: single block holding everything)
  auto split_blocks = [&](const SpMat& m) {
    std::vector<std::vector<Eigen::Triplet<cplx>>> trips(n_blocks);
    for (int k = 0; k < m.outerSize(); ++k)
      for (SpMat::InnerIterator it(m, k); it; ++it) {
        const int c = comp[it.row()];
        trips[c].emplace_back(local[it.row()], local[it.col()], it.value());
      }
    std::vector<SpMat> out(n_blocks);
    for (int c = 0; c < n_blocks; ++c) {
      out[c] = SpMat(bsize[c], bsize[c]);
      out[c].setFromTriplets(trips[c].begin(), trips[c].end());
    }
    return out;
  };

  std::vector<SpMat> k_blocks = split_blocks(k_static);
  struct OscBlock {
    double nu;
    std::vector<SpMat> m, mdag;
  };
  std::vector<OscBlock> osc_blocks;
  for (const auto& [nu, m] : osc) {
    OscBlock ob;
    ob.nu = nu;
    ob.m = split_blocks(m);
    SpMat mdag = m.adjoint();
    ob.mdag = split_blocks(mdag);
    osc_blocks.push_back(std::move(ob));
  }

  struct JumpBlock {
    int src, dst;
    double rate;
    SpMat l, ldag; // dst x src and src x dst
  };
  std::vector<JumpBlock> jump_blocks;
  for (const auto& [rate, l] : jumps) {
    std::map<int, std::vector<Eigen::Triplet<cplx>>> per_src;
    std::map<int, int> dst_of;
    for (int k = 0; k < l.outerSize(); ++k)
      for (SpMat::InnerIterator it(l, k); it; ++it) {
        const int src = comp[it.col()], dst = comp[it.row()];
        dst_of[src] = dst; // unique by construction of the partition
        per_src[src].emplace_back(local[it.row()], local[it.col()],
                                  it.value());
      }
    for (auto& [src, trips] : per_src) {
      JumpBlock jb;
      jb.src = src;
      jb.dst = dst_of[src];
      jb.rate = rate;
      jb.l = SpMat(bsize[jb.dst], bsize[jb.src]);
      jb.l.setFromTriplets(trips.begin(), trips.end());
      jb.ldag = jb.l.adjoint();
      jump_blocks.push_back(std::move(jb));
    }
  }

  // dense mirrors win when the operators are dense relative to dim
  size_t sparse_madds = 0;
  {
    size_t nnz = k_static.nonZeros();
    for (const auto& [nu, m] : osc) nnz += 2 * m.nonZeros();
    for (const auto& [r, l] : jumps) nnz += 2 * l.nonZeros();
    sparse_madds = nnz * static_cast<size_t>(max_b);
  }
  const size_t dense_matmuls = 1 + 2 * osc.size() + 2 * jumps.size();
  const bool use_dense =
      !use_blocks &&
      dense_matmuls * static_cast<size_t>(dim) * dim * dim <
          4 * sparse_madds;

  std::vector<Mat> kd(use_dense ? 1 : 0);
  std::vector<std::pair<double, std::pair<Mat, Mat>>> osc_d;
  std::vector<std::pair<double, std::pair<Mat, Mat>>> jumps_d;
  if (use_dense) {
    kd[0] = Mat(k_static);
    for (auto& [nu, m] : osc)
      osc_d.push_back({nu, {Mat(m), Mat(SpMat(m.adjoint()))}});
    for (auto& [r, l] : jumps)
      jumps_d.push_back({r, {Mat(l), Mat(SpMat(l.adjoint()))}});
  }

  // packed column-major block storage
  Vec rho_p(packed_size);
  rho_p.setZero();
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      if (comp[i] != comp[j]) continue; // exact zeros by construction
      const int c = comp[i];
      rho_p[offset[c] + local[j] * bsize[c] + local[i]] =
          model.initial_state(i, j);
    }

  Mat stage(max_b, max_b), tmp_b(max_b, max_b);
  const cplx im(0.0, 1.0);

  auto view = [&](Vec& v, int c) {
    return Eigen::Map<Mat>(v.data() + offset[c], bsize[c], bsize[c]);
  };
  auto cview = [&](const Vec& v, int c) {
    return Eigen::Map<const Mat>(v.data() + offset[c], bsize[c], bsize[c]);
  };

  auto generator = [&](const Vec& in, double t, Vec& out) {
    for (int c = 0; c < n_blocks; ++c) {
      const int n = bsize[c];
      auto in_c = cview(in, c);
      auto out_c = view(out, c);
      auto st = stage.topLeftCorner(n, n);
      if (use_dense) {
        st.noalias() = kd[0] * in_c;
        for (const auto& [nu, mm] : osc_d) {
          st.noalias() += (-im * std::exp(im * (nu * t))) * (mm.first * in_c);
          st.noalias() +=
              (-im * std::exp(-im * (nu * t))) * (mm.second * in_c);
        }
      } else {
        st.noalias() = k_blocks[c] * in_c;
        for (const auto& ob : osc_blocks) {
          st.noalias() +=
              (-im * std::exp(im * (ob.nu * t))) * (ob.m[c] * in_c);
          st.noalias() +=
              (-im * std::exp(-im * (ob.nu * t))) * (ob.mdag[c] * in_c);
        }
      }
      out_c = st + st.adjoint();
    }
    if (use_dense) {
      auto in_c = cview(in, 0);
      auto out_c = view(out, 0);
      for (const auto& [rate, lp] : jumps_d) {
        tmp_b.noalias() = lp.first * in_c;
        out_c.noalias() += rate * (tmp_b * lp.second);
      }
    } else {
      for (const auto& jb : jump_blocks) {
        auto in_c = cview(in, jb.src);
        auto out_c = view(out, jb.dst);
        auto t_b = tmp_b.topLeftCorner(bsize[jb.dst], bsize[jb.src]);
        t_b.noalias() = jb.l * in_c;
        out_c.noalias() += jb.rate * (t_b * jb.ldag);
      }
    }
  };

  // gather lists for expectation values: tr(O rho) over in-block entries
  std::vector<std::vector<std::pair<int, cplx>>> gathers(observables.size());
  for (size_t o = 0; o < observables.size(); ++o) {
    const SpMat& obs = observables[o];
    if (obs.rows() != dim || obs.cols() != dim)
      throw DomainError("observable dimension mismatch");
    for (int k = 0; k < obs.outerSize(); ++k)
      for (SpMat::InnerIterator it(obs, k); it; ++it) {
        const int i = it.row(), j = it.col();
        if (comp[i] != comp[j]) continue; // rho(j,i) = 0 exactly
        const int c = comp[i];
        gathers[o].emplace_back(offset[c] + local[i] * bsize[c] + local[j],
                                it.value());
      }
  }
  std::vector<int> diag_idx(dim);
  for (int i = 0; i < dim; ++i) {
    const int c = comp[i];
    diag_idx[i] = offset[c] + local[i] * (bsize[c] + 1);
  }
  std::vector<std::vector<int>> tail_idx; // per Fock factor: tail states
  for (size_t f = 0; f < model.layout.factors.size(); ++f) {
    if (f >= model.layout.is_fock.size() || !model.layout.is_fock[f])
      continue;
    const int df = model.layout.factors[f];
    const int after = model.layout.dim_after(static_cast<int>(f));
    std::vector<int> idx;
    for (int i = 0; i < dim; ++i)
      if ((i / after) % df >= df - 2) idx.push_back(diag_idx[i]);
    tail_idx.push_back(std::move(idx));
  }

  auto record = [&](double t, int sample_idx) {
    result.times.push_back(t);
    for (size_t o = 0; o < observables.size(); ++o) {
      cplx acc(0.0, 0.0);
      for (const auto& [idx, v] : gathers[o]) acc += v * rho_p[idx];
      result.expectations[o].push_back(acc.real());
    }

    HygieneReport h;
    cplx tr(0.0, 0.0);
    for (int i = 0; i < dim; ++i) tr += rho_p[diag_idx[i]];
    h.trace_drift = std::abs(tr - cplx(1.0, 0.0));
    for (int c = 0; c < n_blocks; ++c) {
      auto b = cview(rho_p, c);
      const double defect = (b - b.adjoint()).cwiseAbs().maxCoeff();
      h.hermiticity = std::max(h.hermiticity, defect);
    }
    for (const auto& idx : tail_idx) {
      double tail = 0.0;
      for (int i : idx) tail += rho_p[i].real();
      h.fock_tail = std::max(h.fock_tail, tail);
    }
    const bool eig_now =
        eig_stride > 0 &&
        (sample_idx % eig_stride == 0 || sample_idx == n_samples - 1);
    if (eig_now) {
      double lo = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_blocks; ++c) {
        auto b = cview(rho_p, c);
        if (bsize[c] == 1) {
          lo = std::min(lo, b(0, 0).real());
        } else if (bsize[c] <= 256) {
          Eigen::SelfAdjointEigenSolver<Mat> es(
              0.5 * (b + b.adjoint()), Eigen::EigenvaluesOnly);
          lo = std::min(lo, es.eigenvalues().minCoeff());
        } else {
          lo = std::min(lo, extremal_eigenvalues(Mat(b)).first);
        }
      }
      h.min_eigenvalue = lo;
    }
    result.hygiene.absorb(h);

    if (h.trace_drift > options.trace_tol)
      throw IntegrationAccuracyError(
          "trace drift " + std::to_string(h.trace_drift) +
          " exceeds tolerance at t = " + std::to_string(t));
  };

  Vec k1(packed_size), k2(packed_size), k3(packed_size), k4(packed_size),
      tmp(packed_size);

  double t = 0.0;
  if (sample_times.front() == 0.0) record(0.0, 0);
  for (int s = sample_times.front() == 0.0 ? 1 : 0; s < n_samples; ++s) {
    const double t_target = sample_times[s];
    const double span = t_target - t;
    const long long n_sub =
        std::max<long long>(1, static_cast<long long>(std::ceil(span / dt)));
    const double h = span / n_sub;
    for (long long k = 0; k < n_sub; ++k) {
      const double tk = t + k * h;
      generator(rho_p, tk, k1);
      tmp = rho_p + (0.5 * h) * k1;
      generator(tmp, tk + 0.5 * h, k2);
      tmp = rho_p + (0.5 * h) * k2;
      generator(tmp, tk + 0.5 * h, k3);
      tmp = rho_p + h * k3;
      generator(tmp, tk + h, k4);
      rho_p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    result.steps += n_sub;
    t = t_target;
    record(t, s);
  }

  result.final_density = Mat::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      if (comp[i] == comp[j]) {
        const int c = comp[i];
        result.final_density(i, j) =
            rho_p[offset[c] + local[j] * bsize[c] + local[i]];
      }
  return result;
}

inline EvolveResult evolve_pure(const HilbertLayout& layout,
                                const std::vector<OperatorTerm>& terms,
                                const Vec& psi0,
                                const std::vector<double>& sample_times,
                                const std::vector<SpMat>& observables,
                                const EvolveOptions& options = {}) {
  layout.validate(true);
  detail::check_sample_grid(sample_times);
  const int dim = layout.total_dim();
  if (psi0.size() != dim) throw DomainError("initial state dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-9)
    throw DomainError("initial state must be normalized");

  SpMat h_static(dim, dim);
  std::vector<std::pair<double, std::pair<SpMat, SpMat>>> osc;
  double nu_max = 0.0, h_mag = 0.0;
  for (const auto& term : terms) {
    if (term.matrix.rows() != dim || term.matrix.cols() != dim)
      throw DomainError("Hamiltonian term dimension mismatch");
    const double g = detail::gershgorin_bound(term.matrix);
    if (term.nu == 0.0) {
      if (hermiticity_defect(term.matrix) > 1e-12)
        throw DomainError("static Hamiltonian term is not Hermitian");
      h_static += term.matrix;
      h_mag += g;
    } else {
      osc.push_back({term.nu, {term.matrix, SpMat(term.matrix.adjoint())}});
      nu_max = std::max(nu_max, std::abs(term.nu));
      h_mag += 2.0 * g;
    }
  }

  double dt = options.dt_override;
  if (dt <= 0.0) {
    dt = std::numeric_limits<double>::infinity();
    if (nu_max > 0.0) dt = std::min(dt, two_pi / nu_max / 20.0);
    if (h_mag > 0.0) {
      dt = std::min(dt, 2.0 / (2.0 * h_mag));
      // keep the accumulated RK4 phase error near the norm-drift budget:
      // global error ~ T lam^5 dt^4 / 120
      const double t_span = std::max(sample_times.back(), 1e-9);
      dt = std::min(dt, std::pow(120.0 * 1e-10 /
                                     (t_span * std::pow(h_mag, 5.0)),
                                 0.25));
    }
    if (!std::isfinite(dt)) dt = std::max(sample_times.back(), 1e-9) / 100.0;
  }

  Vec psi = psi0;
  Vec k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  const cplx im(0.0, 1.0);
  auto generator = [&](const Vec& p, double t, Vec& out) {
    out.noalias() = cplx(0.0, -1.0) * (h_static * p);
    for (const auto& [nu, mm] : osc) {
      out.noalias() += (-im * std::exp(im * (nu * t))) * (mm.first * p);
      out.noalias() += (-im * std::exp(-im * (nu * t))) * (mm.second * p);
    }
  };

  EvolveResult result;
  result.dt = dt;
  result.expectations.assign(observables.size(), {});
  const int n_samples = static_cast<int>(sample_times.size());

  auto record = [&](double t) {
    result.times.push_back(t);
    for (size_t o = 0; o < observables.size(); ++o)
      result.expectations[o].push_back(expectation(observables[o], psi).real());
    HygieneReport h;
    h.norm_drift = std::abs(psi.norm() - 1.0);
    for (size_t f = 0; f < layout.factors.size(); ++f)
      if (f < layout.is_fock.size() && layout.is_fock[f])
        h.fock_tail =
            std::max(h.fock_tail, fock_tail(psi, layout, static_cast<int>(f)));
    result.hygiene.absorb(h);
    if (h.norm_drift > options.norm_tol)
      throw IntegrationAccuracyError(
          "norm drift " + std::to_string(h.norm_drift) +
          " exceeds tolerance at t = " + std::to_string(t));
  };

  double t = 0.0;
  if (sample_times.front() == 0.0) record(0.0);
  for (int s = sample_times.front() == 0.0 ? 1 : 0; s < n_samples; ++s) {
    const double span = sample_times[s] - t;
    const long long n_sub =
        std::max<long long>(1, static_cast<long long>(std::ceil(span / dt)));
    const double h = span / n_sub;
    for (long long k = 0; k < n_sub; ++k) {
      const double tk = t + k * h;
      generator(psi, tk, k1);
      tmp = psi + (0.5 * h) * k1;
      generator(tmp, tk + 0.5 * h, k2);
      tmp = psi + (0.5 * h) * k2;
      generator(tmp, tk + 0.5 * h, k3);
      tmp = psi + h * k3;
      generator(tmp, tk + h, k4);
      psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    result.steps += n_sub;
    t = sample_times[s];
    record(t);
  }

  result.final_pure = psi;
  return result;
}

// Null space of the vectorized generator.  Restricted to static models and
// small dimensions; throws when the kernel is degenerate.
inline Mat steady_state(const QuantumModel& model) {
  model.validate();
  const int dim = model.layout.total_dim();
  if (dim > 32)
    throw DomainError("steady_state is limited to total dimension <= 32");

  Mat h = Mat::Zero(dim, dim);
  for (const auto& term : model.hamiltonian_terms) {
    if (term.nu != 0.0)
      throw DomainError("steady_state requires a static Hamiltonian");
    h += Mat(term.matrix);
  }

  // column-major vec: rho(i,j) -> index i + dim*j
  const int dim2 = dim * dim;
  Mat gen = Mat::Zero(dim2, dim2);
  const cplx im(0.0, 1.0);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) {
      if (h(a, b) == cplx(0.0, 0.0)) continue;
      for (int j = 0; j < dim; ++j) {
        gen(a + dim * j, b + dim * j) += -im * h(a, b); // -i H rho
        gen(j + dim * b, j + dim * a) += im * h(a, b);  // +i rho H
      }
    }
  for (const auto& jump : model.jump_operators) {
    if (jump.rate <= 0.0) continue;
    const Mat l = Mat(jump.matrix);
    const Mat ldl = l.adjoint() * l;
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) {
        // r L rho Ldag
        for (int m = 0; m < dim; ++m)
          for (int j = 0; j < dim; ++j) {
            const cplx v = jump.rate * l(a, b) * std::conj(l(m, j));
            if (v != cplx(0.0, 0.0)) gen(a + dim * m, b + dim * j) += v;
          }
        // -r/2 {Ldag L, rho}
        if (ldl(a, b) != cplx(0.0, 0.0))
          for (int j = 0; j < dim; ++j) {
            gen(a + dim * j, b + dim * j) += -0.5 * jump.rate * ldl(a, b);
            gen(j + dim * b, j + dim * a) += -0.5 * jump.rate * ldl(a, b);
          }
      }
  }

  Eigen::BDCSVD<Mat> svd(gen, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double tol = 1e-9 * std::max(smax, 1.0);
  int kernel_dim = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) <= tol) ++kernel_dim;
  if (kernel_dim == 0)
    throw SolverFailure("no steady state found within tolerance",
                        sv(sv.size() - 1));
  if (kernel_dim > 1)
    throw SteadyStateAmbiguity("steady state is degenerate (kernel dim " +
                               std::to_string(kernel_dim) + ")");

  const Vec v = svd.matrixV().col(dim2 - 1);
  Mat rho(dim, dim);
  for (int j = 0; j < dim; ++j) rho.col(j) = v.segment(j * dim, dim);
  rho = 0.5 * (rho + rho.adjoint().eval());
  const cplx tr = rho.trace();
  if (std::abs(tr) < 1e-12)
    throw SteadyStateAmbiguity("kernel vector is traceless");
  rho /= tr;

  // residual check on the normalized state
  Vec vec_rho(dim2);
  for (int j = 0; j < dim; ++j) vec_rho.segment(j * dim, dim) = rho.col(j);
  const double residual = (gen * vec_rho).cwiseAbs().maxCoeff();
  if (residual > 1e-10)
    throw SolverFailure("steady-state residual above tolerance", residual);
  return rho;
}

} // namespace peit
