#pragma once

// Tavis-Cummings Hamiltonian H = w_a J_z + w_c a^dag a + g (a^dag J_- + a J_+)
// and collective operators, restricted to total-excitation blocks. Units are
// hbar = 1 with all frequencies in rad/s.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "subrad/error.hpp"
#include "subrad/hilbert.hpp"

namespace subrad {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Default atomic transition for configs that fix only the detuning ratio:
/// the 51.1 GHz circular Rydberg transition of rubidium microwave-cavity work.
inline constexpr double kDefaultOmegaAOver2PiHz = 51.099e9;

/// The detuning is stored directly rather than as w_c - w_a so that it is
/// not rounded against optical-scale carrier frequencies.
class SystemParams {
 public:
  SystemParams(int n_atoms, double omega_a, double delta, double g)
      : n_atoms_(n_atoms), omega_a_(omega_a), delta_(delta), g_(g) {
    if (n_atoms < 1) throw PreconditionError("SystemParams: n_atoms must be >= 1");
    if (!(g > 0.0) || !std::isfinite(g)) throw PreconditionError("SystemParams: coupling g must be positive");
    if (!std::isfinite(delta)) throw PreconditionError("SystemParams: detuning must be finite");
    if (!std::isfinite(omega_a)) throw PreconditionError("SystemParams: omega_a must be finite");
  }

  static SystemParams from_frequencies(int n_atoms, double omega_a, double omega_c, double g) {
    return SystemParams(n_atoms, omega_a, omega_c - omega_a, g);
  }

  /// Delta = ratio * g, cavity above the atoms for ratio > 0.
  static SystemParams from_detuning_ratio(int n_atoms, double g, double ratio,
                                          double omega_a = kTwoPi * kDefaultOmegaAOver2PiHz) {
    return SystemParams(n_atoms, omega_a, ratio * g, g);
  }

  int n_atoms() const { return n_atoms_; }
  double omega_a() const { return omega_a_; }
  double omega_c() const { return omega_a_ + delta_; }
  double g() const { return g_; }
  double delta() const { return delta_; }
  double alpha() const { return n_atoms_ * g_ * g_ / (2.0 * delta_); }
  double coupling_ratio() const { return g_ / std::abs(delta_); }
  bool perturbative() const { return coupling_ratio() <= 0.1; }
  bool resonant() const { return delta_ == 0.0; }

  SystemParams with_n_atoms(int n) const { return SystemParams(n, omega_a_, delta_, g_); }

  friend bool operator==(const SystemParams&, const SystemParams&) = default;

 private:
  int n_atoms_;
  double omega_a_;
  double delta_;
  double g_;
};

/// Matrix of an operator between two excitation blocks: rows live in
/// row_block, columns in col_block. For number-conserving operators the two
/// coincide and `shift` carries a scalar part (shift * identity) held apart
/// from `matrix` so that carrier frequencies do not swamp the slow physics.
struct BlockOperator {
  int row_block = 0;
  int col_block = 0;
  Eigen::MatrixXd matrix;
  double shift = 0.0;

  bool conserving() const { return row_block == col_block; }

  Eigen::MatrixXd dense() const {
    if (shift == 0.0) return matrix;
    return matrix + shift * Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols());
  }
};

using Operator = std::vector<BlockOperator>;

enum class Collective { JPlus, JMinus, Jz, A, ADag, JPlusJMinus };

inline std::string to_string(Collective c) {
  switch (c) {
    case Collective::JPlus: return "J+";
    case Collective::JMinus: return "J-";
    case Collective::Jz: return "Jz";
    case Collective::A: return "a";
    case Collective::ADag: return "a+";
    case Collective::JPlusJMinus: return "J+J-";
  }
  return "?";
}

namespace detail {

inline std::vector<int> all_blocks(const AtomFieldBasis& basis) {
  std::vector<int> out;
  for (const auto& b : basis.blocks()) out.push_back(b.excitation);
  return out;
}

inline Eigen::Index local(const Block& b, std::size_t flat) { return static_cast<Eigen::Index>(flat - b.offset); }

}  // namespace detail

/// H0 restricted to block M. Entry for (config, n) is
/// w_a (k - N/2) + w_c n = [w_c M - w_a N/2] - k Delta, with the bracket
/// returned as `shift`.
inline BlockOperator build_h0_block(const SystemParams& p, const AtomFieldBasis& basis, int excitation) {
  const Block& b = basis.block(excitation);
  BlockOperator op{excitation, excitation, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.size), static_cast<Eigen::Index>(b.size)),
                   p.omega_c() * excitation - p.omega_a() * 0.5 * basis.n_atoms()};
  for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
    const int k = basis.state(i).atoms.excitation_count();
    op.matrix(detail::local(b, i), detail::local(b, i)) = -k * p.delta();
  }
  return op;
}

inline BlockOperator build_hint_block(const SystemParams& p, const AtomFieldBasis& basis, int excitation) {
  const Block& b = basis.block(excitation);
  BlockOperator op{excitation, excitation, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.size), static_cast<Eigen::Index>(b.size)),
                   0.0};
  const int n = basis.n_atoms();
  for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
    const BasisState& s = basis.state(i);
    if (s.photons + 1 > basis.n_max()) continue;
    const double amp = p.g() * std::sqrt(static_cast<double>(s.photons + 1));
    for (int atom = 0; atom < n; ++atom) {
      if (!s.atoms.excited(atom)) continue;
      // a^dag sigma_-^(atom): lower the atom, add a photon
      const std::size_t j = basis.index(s.atoms.mask() ^ AtomConfig::atom_bit(n, atom), s.photons + 1);
      op.matrix(detail::local(b, j), detail::local(b, i)) += amp;
      op.matrix(detail::local(b, i), detail::local(b, j)) += amp;
    }
  }
  return op;
}

/// H = H0 + H_int on one block, with the scalar offset kept in `shift`.
inline BlockOperator build_h_block(const SystemParams& p, const AtomFieldBasis& basis, int excitation,
                                   bool with_coupling = true) {
  BlockOperator h = build_h0_block(p, basis, excitation);
  if (with_coupling) h.matrix += build_hint_block(p, basis, excitation).matrix;
  return h;
}

inline Operator build_h0(const SystemParams& p, const AtomFieldBasis& basis, std::span<const int> blocks = {}) {
  const auto ids = blocks.empty() ? detail::all_blocks(basis) : std::vector<int>(blocks.begin(), blocks.end());
  Operator out;
  for (int m : ids) out.push_back(build_h0_block(p, basis, m));
  return out;
}

inline Operator build_hint(const SystemParams& p, const AtomFieldBasis& basis, std::span<const int> blocks = {}) {
  const auto ids = blocks.empty() ? detail::all_blocks(basis) : std::vector<int>(blocks.begin(), blocks.end());
  Operator out;
  for (int m : ids) out.push_back(build_hint_block(p, basis, m));
  return out;
}

/// Product A * B of two block-structured operators.
inline Operator compose(const Operator& a, const Operator& b) {
  Operator out;
  for (const auto& bb : b)
    for (const auto& aa : a) {
      if (aa.col_block != bb.row_block) continue;
      Eigen::MatrixXd m = aa.dense() * bb.dense();
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const BlockOperator& o) { return o.row_block == aa.row_block && o.col_block == bb.col_block; });
      if (it == out.end())
        out.push_back(BlockOperator{aa.row_block, bb.col_block, std::move(m), 0.0});
      else
        it->matrix += m;
    }
  return out;
}

/// A - B, blockwise.
inline Operator subtract(const Operator& a, const Operator& b) {
  Operator out;
  for (const auto& x : a) out.push_back(BlockOperator{x.row_block, x.col_block, x.dense(), 0.0});
  for (const auto& y : b) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const BlockOperator& o) { return o.row_block == y.row_block && o.col_block == y.col_block; });
    if (it == out.end())
      out.push_back(BlockOperator{y.row_block, y.col_block, -y.dense(), 0.0});
    else
      it->matrix -= y.dense();
  }
  return out;
}

inline Operator commutator(const Operator& a, const Operator& b) { return subtract(compose(a, b), compose(b, a)); }

inline double max_abs(const Operator& op) {
  double m = 0.0;
  for (const auto& x : op) m = std::max(m, x.dense().cwiseAbs().maxCoeff());
  return m;
}

/// Collective atomic or field operator. Non-conserving operators map block
/// M to M +/- 1; blocks outside the basis are skipped.
inline Operator build_collective(const AtomFieldBasis& basis, Collective which, std::span<const int> blocks = {}) {
  if (which == Collective::JPlusJMinus) {
    Operator jm = build_collective(basis, Collective::JMinus, blocks);
    std::vector<int> targets;
    for (const auto& x : jm) targets.push_back(x.row_block);
    Operator jp = build_collective(basis, Collective::JPlus, targets);
    Operator prod = compose(jp, jm);
    // keep blocks whose J_- image vanished (e.g. the ground block)
    const auto ids = blocks.empty() ? detail::all_blocks(basis) : std::vector<int>(blocks.begin(), blocks.end());
    for (int m : ids) {
      const bool present = std::any_of(prod.begin(), prod.end(), [&](const BlockOperator& o) { return o.col_block == m; });
      if (!present) {
        const auto sz = static_cast<Eigen::Index>(basis.block(m).size);
        prod.push_back(BlockOperator{m, m, Eigen::MatrixXd::Zero(sz, sz), 0.0});
      }
    }
    std::sort(prod.begin(), prod.end(), [](const auto& x, const auto& y) { return x.col_block < y.col_block; });
    return prod;
  }

  const int n = basis.n_atoms();
  const auto ids = blocks.empty() ? detail::all_blocks(basis) : std::vector<int>(blocks.begin(), blocks.end());
  const int step = (which == Collective::JPlus || which == Collective::ADag) ? 1 : (which == Collective::Jz ? 0 : -1);
  Operator out;
  for (int m : ids) {
    const Block& src = basis.block(m);
    if (!basis.has_block(m + step) || src.size == 0) continue;
    const Block& dst = basis.block(m + step);
    BlockOperator op{m + step, m, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dst.size), static_cast<Eigen::Index>(src.size)),
                     0.0};
    for (std::size_t i = src.offset; i < src.offset + src.size; ++i) {
      const BasisState& s = basis.state(i);
      const auto col = detail::local(src, i);
      switch (which) {
        case Collective::Jz:
          op.matrix(col, col) = s.atoms.excitation_count() - 0.5 * n;
          break;
        case Collective::JMinus:
        case Collective::JPlus:
          for (int atom = 0; atom < n; ++atom) {
            const bool up = s.atoms.excited(atom);
            if (up != (which == Collective::JMinus)) continue;
            const std::size_t j = basis.index(s.atoms.mask() ^ AtomConfig::atom_bit(n, atom), s.photons);
            op.matrix(detail::local(dst, j), col) += 1.0;
          }
          break;
        case Collective::A:
          if (s.photons > 0)
            op.matrix(detail::local(dst, basis.index(s.atoms, s.photons - 1)), col) = std::sqrt(static_cast<double>(s.photons));
          break;
        case Collective::ADag:
          if (s.photons < basis.n_max())
            op.matrix(detail::local(dst, basis.index(s.atoms, s.photons + 1)), col) =
                std::sqrt(static_cast<double>(s.photons + 1));
          break;
        case Collective::JPlusJMinus:
          break;
      }
    }
    out.push_back(std::move(op));
  }
  return out;
}

/// Dense application of a block operator to a full amplitude vector.
inline Eigen::VectorXcd apply(const Operator& op, const PureState& s) {
  const auto& basis = s.basis();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(s.amplitudes().size());
  for (const auto& x : op) {
    const Block& rb = basis.block(x.row_block);
    const Block& cb = basis.block(x.col_block);
    if (static_cast<std::size_t>(x.matrix.rows()) != rb.size || static_cast<std::size_t>(x.matrix.cols()) != cb.size)
      throw PreconditionError("operator block shape does not match the state's basis");
    out.segment(static_cast<Eigen::Index>(rb.offset), static_cast<Eigen::Index>(rb.size)) +=
        x.dense().cast<cplx>() * s.block_segment(cb);
  }
  return out;
}

/// J_- applied without materializing matrices.
inline Eigen::VectorXcd apply_lowering(const PureState& s) {
  const auto& basis = s.basis();
  const int n = basis.n_atoms();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(s.amplitudes().size());
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const cplx a = s[i];
    if (a == cplx{}) continue;
    const BasisState& st = basis.state(i);
    for (int atom = 0; atom < n; ++atom)
      if (st.atoms.excited(atom))
        out(static_cast<Eigen::Index>(basis.index(st.atoms.mask() ^ AtomConfig::atom_bit(n, atom), st.photons))) += a;
  }
  return out;
}

/// Debug dump: one "row,col,re,im" line per nonzero, with flat indices.
inline void write_operator_csv(std::ostream& os, const Operator& op, const AtomFieldBasis& basis) {
  os << "row,col,re,im\n";
  char buf[128];
  for (const auto& x : op) {
    const Block& rb = basis.block(x.row_block);
    const Block& cb = basis.block(x.col_block);
    const Eigen::MatrixXd d = x.dense();
    for (Eigen::Index c = 0; c < d.cols(); ++c)
      for (Eigen::Index r = 0; r < d.rows(); ++r) {
        if (d(r, c) == 0.0) continue;
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", rb.offset + static_cast<std::size_t>(r),
                      cb.offset + static_cast<std::size_t>(c), d(r, c), 0.0);
        os << buf;
      }
  }
}

}  // namespace subrad
