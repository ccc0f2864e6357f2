#pragma once

// Exact propagation through per-block eigendecomposition of H, plus
// observables and the atomic reduced state.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#ifdef SUBRAD_USE_LAPACKE
#include <lapacke.h>
#endif

#include "subrad/error.hpp"
#include "subrad/hilbert.hpp"
#include "subrad/io.hpp"
#include "subrad/model.hpp"
#include "subrad/parallel.hpp"

namespace subrad {

/// Eigensystem of H on one block: H = shift + V diag(energies) V^T.
struct BlockSpectrum {
  int excitation = 0;
  double shift = 0.0;
  Eigen::VectorXd energies;  ///< ascending, relative to shift
  Eigen::MatrixXd vectors;   ///< columns; largest-magnitude entry positive
};

class Propagator {
 public:
  Propagator(SystemParams params, BasisPtr basis, std::map<int, BlockSpectrum> spectra)
      : params_(params), basis_(std::move(basis)), spectra_(std::move(spectra)) {}

  const SystemParams& params() const { return params_; }
  const AtomFieldBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const std::map<int, BlockSpectrum>& spectra() const { return spectra_; }

  bool has_block(int excitation) const { return spectra_.count(excitation) != 0; }
  const BlockSpectrum& spectrum(int excitation) const {
    auto it = spectra_.find(excitation);
    if (it == spectra_.end())
      throw PreconditionError("propagator: block M=" + std::to_string(excitation) + " was not compiled");
    return it->second;
  }

 private:
  SystemParams params_;
  BasisPtr basis_;
  std::map<int, BlockSpectrum> spectra_;
};

namespace detail {

inline BlockSpectrum diagonalize_block(const SystemParams& p, const AtomFieldBasis& basis, int excitation,
                                       bool with_coupling) {
  const BlockOperator h = build_h_block(p, basis, excitation, with_coupling);
  BlockSpectrum out;
  out.excitation = excitation;
  out.shift = h.shift;
  if (h.matrix.rows() == 0) return out;
#ifdef SUBRAD_USE_LAPACKE
  out.vectors = h.matrix;
  out.energies.resize(h.matrix.rows());
  const auto n = static_cast<lapack_int>(h.matrix.rows());
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n, out.energies.data()) != 0)
    throw NumericalError("eigensolver failed on block M=" + std::to_string(excitation));
#else
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.matrix);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigensolver failed on block M=" + std::to_string(excitation));
  out.energies = es.eigenvalues();
  out.vectors = es.eigenvectors();
#endif
  for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
    Eigen::Index r = 0;
    out.vectors.col(c).cwiseAbs().maxCoeff(&r);
    if (out.vectors(r, c) < 0.0) out.vectors.col(c) *= -1.0;
  }
  return out;
}

}  // namespace detail

struct CompileOptions {
  std::vector<int> blocks;  ///< empty: every block of the basis
  unsigned threads = 1;
  bool with_coupling = true;  ///< false diagonalizes H0 alone
};

inline Propagator compile(const SystemParams& p, const BasisPtr& basis, const CompileOptions& opt = {}) {
  if (p.n_atoms() != basis->n_atoms()) throw PreconditionError("compile: params and basis disagree on N");
  std::vector<int> ids = opt.blocks;
  if (ids.empty())
    for (const auto& b : basis->blocks()) ids.push_back(b.excitation);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<BlockSpectrum> results(ids.size());
  parallel_for(ids.size(), opt.threads,
               [&](std::size_t i) { results[i] = detail::diagonalize_block(p, *basis, ids[i], opt.with_coupling); });

  std::map<int, BlockSpectrum> spectra;
  for (std::size_t i = 0; i < ids.size(); ++i) spectra.emplace(ids[i], std::move(results[i]));
  return Propagator(p, basis, std::move(spectra));
}

/// Compiles only the blocks a state occupies.
inline Propagator compile_for(const SystemParams& p, const PureState& s, unsigned threads = 1) {
  CompileOptions opt;
  opt.blocks = s.occupied_blocks();
  opt.threads = threads;
  return compile(p, s.basis_ptr(), opt);
}

/// Eigenbasis coefficients of a state, reusable for many evolution times.
class SpectralExpansion {
 public:
  SpectralExpansion(const Propagator& prop, const PureState& s) : prop_(&prop), basis_(s.basis_ptr()) {
    require_same_basis(prop.basis(), s.basis());
    for (int m : s.occupied_blocks()) {
      const BlockSpectrum& sp = prop.spectrum(m);
      parts_.push_back(Part{&sp, &s.basis().block(m), real_matvec(sp.vectors.transpose(), s.block_segment(s.basis().block(m)))});
    }
  }

  PureState at(double t) const {
    PureState out(basis_);
    for (const auto& part : parts_) {
      out.block_segment(*part.block) = real_matvec(part.spectrum->vectors, phased(part, t));
    }
    return out;
  }

  /// Calls fn(t, state) for every time, in order. Times are processed in
  /// batches so each eigenvector matrix is read once per batch.
  template <class Fn>
  void for_each_time(std::span<const double> times, Fn&& fn, std::size_t batch = 32) const {
    for (std::size_t start = 0; start < times.size(); start += batch) {
      const std::size_t count = std::min(batch, times.size() - start);
      std::vector<PureState> states(count, PureState(basis_));
      for (const auto& part : parts_) {
        const Eigen::Index d = part.coefficients.size();
        Eigen::MatrixXd cols(d, static_cast<Eigen::Index>(2 * count));
        for (std::size_t j = 0; j < count; ++j) {
          const Eigen::VectorXcd c = phased(part, times[start + j]);
          cols.col(static_cast<Eigen::Index>(2 * j)) = c.real();
          cols.col(static_cast<Eigen::Index>(2 * j + 1)) = c.imag();
        }
        const Eigen::MatrixXd prod = part.spectrum->vectors * cols;
        for (std::size_t j = 0; j < count; ++j) {
          auto seg = states[j].block_segment(*part.block);
          seg.real() = prod.col(static_cast<Eigen::Index>(2 * j));
          seg.imag() = prod.col(static_cast<Eigen::Index>(2 * j + 1));
        }
      }
      for (std::size_t j = 0; j < count; ++j) fn(times[start + j], states[j]);
    }
  }

  /// Amplitudes on "only atom i excited" with `photons` photons at time t,
  /// without assembling the full state.
  Eigen::VectorXcd single_excitation_slice_at(double t, int photons) const {
    const int n = basis_->n_atoms();
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    for (const auto& part : parts_) {
      if (part.block->excitation != photons + 1) continue;
      const Eigen::VectorXcd c = phased(part, t);
      for (int i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(basis_->single_index(i, photons) - part.block->offset);
        v(i) = part.spectrum->vectors.row(row).dot(c.real()) + cplx{0.0, 1.0} * part.spectrum->vectors.row(row).dot(c.imag());
      }
    }
    return v;
  }

  const Propagator& propagator() const { return *prop_; }

 private:
  struct Part {
    const BlockSpectrum* spectrum;
    const Block* block;
    Eigen::VectorXcd coefficients;
  };

  template <class Mat, class Vec>
  static Eigen::VectorXcd real_matvec(const Mat& m, const Vec& v) {
    Eigen::MatrixX2d parts(v.size(), 2);
    parts.col(0) = v.real();
    parts.col(1) = v.imag();
    const Eigen::MatrixX2d prod = m * parts;
    Eigen::VectorXcd out(prod.rows());
    out.real() = prod.col(0);
    out.imag() = prod.col(1);
    return out;
  }

  static Eigen::VectorXcd phased(const Part& part, double t) {
    const BlockSpectrum& sp = *part.spectrum;
    Eigen::VectorXcd c = part.coefficients;
    const cplx global = std::polar(1.0, -sp.shift * t);
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= global * std::polar(1.0, -sp.energies(k) * t);
    return c;
  }
  const Propagator* prop_;
  BasisPtr basis_;
  std::vector<Part> parts_;
};

/// Schrodinger-picture state at time t (negative t runs backwards).
inline PureState evolve(const Propagator& prop, const PureState& s, double t) {
  return SpectralExpansion(prop, s).at(t);
}

/// Removes the free phases exp(-i E0 t) basis state by basis state.
inline PureState to_interaction_picture(const PureState& s, const SystemParams& p, double t) {
  PureState out = s;
  const auto& basis = s.basis();
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const BasisState& st = basis.state(i);
    const double e0 = p.omega_a() * (st.atoms.excitation_count() - 0.5 * basis.n_atoms()) + p.omega_c() * st.photons;
    out[i] *= std::polar(1.0, e0 * t);
  }
  return out;
}

inline cplx expectation_value(const PureState& s, const Operator& op) {
  return s.amplitudes().dot(subrad::apply(op, s));
}

/// <psi|A|psi> for Hermitian A; a non-negligible imaginary part is an error.
inline double expectation(const PureState& s, const Operator& op) {
  const cplx v = expectation_value(s, op);
  if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real())) * std::max(1.0, s.amplitudes().squaredNorm()))
    throw PreconditionError("expectation: operator is not Hermitian on this state");
  return v.real();
}

/// <J+ J-> = |J- psi|^2.
inline double emission_expectation(const PureState& s) { return apply_lowering(s).squaredNorm(); }

/// Atomic density matrix over the 2^N configurations, indexed by mask.
class AtomicDensity {
 public:
  AtomicDensity(int n_atoms, Eigen::MatrixXcd rho) : n_atoms_(n_atoms), rho_(std::move(rho)) {}

  int n_atoms() const { return n_atoms_; }
  const Eigen::MatrixXcd& matrix() const { return rho_; }
  double trace() const { return rho_.trace().real(); }
  double purity() const { return (rho_ * rho_).trace().real(); }
  double hermiticity_error() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// <v|rho|v> for a single-excitation atomic vector (entry i: atom i excited).
  double single_excitation_overlap(const Eigen::VectorXcd& v) const {
    return (v.adjoint() * single_excitation_block() * v)(0, 0).real();
  }

  /// N x N block of rho on the "one atom excited" configurations, atom order.
  Eigen::MatrixXcd single_excitation_block() const {
    Eigen::MatrixXcd out(n_atoms_, n_atoms_);
    for (int i = 0; i < n_atoms_; ++i)
      for (int j = 0; j < n_atoms_; ++j)
        out(i, j) = rho_(static_cast<Eigen::Index>(AtomConfig::atom_bit(n_atoms_, i)),
                         static_cast<Eigen::Index>(AtomConfig::atom_bit(n_atoms_, j)));
    return out;
  }

 private:
  int n_atoms_;
  Eigen::MatrixXcd rho_;
};

/// Partial trace over the cavity mode.
inline AtomicDensity reduce_atomic(const PureState& s) {
  const auto& basis = s.basis();
  const auto n_cfg = static_cast<Eigen::Index>(basis.n_configs());
  Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(n_cfg, basis.n_max() + 1);
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const BasisState& st = basis.state(i);
    psi(static_cast<Eigen::Index>(st.atoms.mask()), st.photons) = s[i];
  }
  return AtomicDensity(basis.n_atoms(), psi * psi.adjoint());
}

/// Field-marginalized weight of an atomic single-excitation vector:
/// sum_n |<v, n|psi>|^2.
inline double marginal_weight(const PureState& s, const Eigen::VectorXcd& atomic) {
  double w = 0.0;
  for (int n = 0; n <= s.basis().n_max(); ++n) w += std::norm(atomic.dot(s.single_excitation_slice(n)));
  return w;
}

struct TrajectoryPoint {
  double t = 0.0;
  double p_control = 0.0;
  double p_others = 0.0;
  double p_symmetric = 0.0;
  double p_subradiant = 0.0;
  double emission = 0.0;
  double norm_error = 0.0;
  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

inline TrajectoryPoint observe(const PureState& s, double t, int control = 0) {
  const int n = s.basis().n_atoms();
  TrajectoryPoint pt;
  pt.t = t;
  for (int ph = 0; ph <= s.basis().n_max(); ++ph) {
    const Eigen::VectorXcd slice = s.single_excitation_slice(ph);
    for (int i = 0; i < n; ++i) (i == control ? pt.p_control : pt.p_others) += std::norm(slice(i));
  }
  pt.p_symmetric = marginal_weight(s, symmetric_atomic(n).cast<cplx>());
  pt.p_subradiant = n >= 2 ? marginal_weight(s, subradiant_target_atomic(n, control).cast<cplx>()) : 0.0;
  pt.emission = emission_expectation(s);
  pt.norm_error = std::abs(s.norm() - 1.0);
  return pt;
}

/// Uniform grid of `points` samples over [t0, t1].
inline std::vector<double> uniform_grid(double t0, double t1, int points) {
  if (points < 1) throw PreconditionError("time grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = points == 1 ? t0 : t0 + (t1 - t0) * i / (points - 1);
  return out;
}

inline std::vector<TrajectoryPoint> sample_trajectory(const Propagator& prop, const PureState& s,
                                                      std::span<const double> times, int control = 0) {
  SpectralExpansion ex(prop, s);
  std::vector<TrajectoryPoint> out;
  out.reserve(times.size());
  ex.for_each_time(times, [&](double t, const PureState& psi) { out.push_back(observe(psi, t, control)); });
  return out;
}

inline void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryPoint> traj) {
  io::write_row(os, {"t_seconds", "p_control", "p_others", "p_symmetric", "p_subradiant", "jpjm", "norm_error"});
  for (const auto& p : traj)
    io::write_row(os, io::format_all({p.t, p.p_control, p.p_others, p.p_symmetric, p.p_subradiant, p.emission, p.norm_error}));
}

}  // namespace subrad
