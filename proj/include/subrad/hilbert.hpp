#pragma once

// Joint Hilbert space of N two-level atoms and one truncated cavity mode.
//
// Basis kets are |bits> (x) |n>, where bits is a string of N atomic levels
// and n a Fock number in [0, n_max]. Flat indices are grouped into blocks
// of fixed total excitation M = popcount(bits) + n. Blocks are laid out
// contiguously in increasing M; inside a block the order is photon number
// descending, then atomic bitstring lexicographic (atom 0 is the leftmost
// character). This ordering is part of the output format.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subrad/error.hpp"

namespace subrad {

using cplx = std::complex<double>;

inline constexpr double kDefaultDimensionCap = 5.0e6;

/// Dimension cap, overridable through the SUBRAD_MAX_DIM environment variable.
inline double dimension_cap() {
  if (const char* env = std::getenv("SUBRAD_MAX_DIM"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0) return v;
  }
  return kDefaultDimensionCap;
}

/// Levels of N atoms packed into a mask. Atom i lives at bit (N-1-i), so
/// numeric order of masks equals lexicographic order of the bitstrings.
class AtomConfig {
 public:
  AtomConfig(int n_atoms, std::uint64_t mask) : n_atoms_(n_atoms), mask_(mask) {
    if (n_atoms < 1 || n_atoms > 62) throw PreconditionError("AtomConfig: n_atoms must be in [1, 62]");
    if (n_atoms < 64 && (mask >> n_atoms) != 0) throw PreconditionError("AtomConfig: mask has bits beyond n_atoms");
  }

  static AtomConfig from_string(const std::string& bits) {
    std::uint64_t mask = 0;
    for (char c : bits) {
      if (c != '0' && c != '1') throw PreconditionError("AtomConfig: bitstring must contain only 0 and 1");
      mask = (mask << 1) | static_cast<std::uint64_t>(c == '1');
    }
    return AtomConfig(static_cast<int>(bits.size()), mask);
  }

  /// Only atom `atom` excited.
  static AtomConfig single(int n_atoms, int atom) { return AtomConfig(n_atoms, atom_bit(n_atoms, atom)); }

  static std::uint64_t atom_bit(int n_atoms, int atom) { return std::uint64_t{1} << (n_atoms - 1 - atom); }

  int n_atoms() const { return n_atoms_; }
  std::uint64_t mask() const { return mask_; }
  int excitation_count() const { return std::popcount(mask_); }
  bool excited(int atom) const { return (mask_ & atom_bit(n_atoms_, atom)) != 0; }

  std::string to_string() const {
    std::string s(static_cast<std::size_t>(n_atoms_), '0');
    for (int i = 0; i < n_atoms_; ++i)
      if (excited(i)) s[static_cast<std::size_t>(i)] = '1';
    return s;
  }

  friend bool operator==(const AtomConfig&, const AtomConfig&) = default;

 private:
  int n_atoms_;
  std::uint64_t mask_;
};

struct BasisState {
  AtomConfig atoms;
  int photons;
  int excitation() const { return atoms.excitation_count() + photons; }
  friend bool operator==(const BasisState&, const BasisState&) = default;
};

/// Contiguous range of flat indices sharing total excitation M.
struct Block {
  int excitation = 0;
  std::size_t offset = 0;
  std::size_t size = 0;
  int min_atomic = 0;  ///< smallest atomic excitation present in the block
  int max_atomic = 0;
  bool truncated = false;  ///< some (config, n) with n > n_max were dropped
};

class AtomFieldBasis {
 public:
  AtomFieldBasis(int n_atoms, int n_max, double cap = dimension_cap()) : n_atoms_(n_atoms), n_max_(n_max) {
    if (n_atoms < 1) throw PreconditionError("build_basis: n_atoms must be >= 1");
    if (n_max < 0) throw PreconditionError("build_basis: n_max must be >= 0");
    const double requested = std::ldexp(1.0, n_atoms) * (static_cast<double>(n_max) + 1.0);
    if (n_atoms > 40 || requested > cap) {
      std::ostringstream os;
      os << "build_basis: dimension 2^" << n_atoms << " x " << (n_max + 1) << " = " << requested
         << " exceeds cap " << cap << " (set SUBRAD_MAX_DIM to override)";
      throw DimensionError(os.str());
    }
    const std::size_t n_configs = std::size_t{1} << n_atoms;
    index_.assign(n_configs * static_cast<std::size_t>(n_max + 1), 0);
    states_.reserve(index_.size());

    for (int m = 0; m <= n_atoms + n_max; ++m) {
      Block b;
      b.excitation = m;
      b.offset = states_.size();
      b.min_atomic = std::max(0, m - n_max);
      b.max_atomic = std::min(m, n_atoms);
      b.truncated = m > n_max;
      for (int k = b.min_atomic; k <= b.max_atomic; ++k) {
        const int photons = m - k;
        for_each_mask(n_atoms, k, [&](std::uint64_t mask) {
          index_[slot(mask, photons)] = states_.size();
          states_.push_back(BasisState{AtomConfig(n_atoms, mask), photons});
        });
      }
      b.size = states_.size() - b.offset;
      blocks_.push_back(b);
    }
  }

  int n_atoms() const { return n_atoms_; }
  int n_max() const { return n_max_; }
  std::size_t dim() const { return states_.size(); }
  std::size_t n_configs() const { return std::size_t{1} << n_atoms_; }

  const std::vector<Block>& blocks() const { return blocks_; }

  const Block& block(int excitation) const {
    if (excitation < 0 || excitation >= static_cast<int>(blocks_.size()))
      throw PreconditionError("block: total excitation " + std::to_string(excitation) + " out of range");
    return blocks_[static_cast<std::size_t>(excitation)];
  }

  bool has_block(int excitation) const { return excitation >= 0 && excitation < static_cast<int>(blocks_.size()); }

  const BasisState& state(std::size_t index) const { return states_.at(index); }

  std::size_t index(std::uint64_t mask, int photons) const {
    if (photons < 0 || photons > n_max_ || mask >= n_configs())
      throw PreconditionError("index: (" + std::to_string(mask) + ", " + std::to_string(photons) + ") outside basis");
    return index_[slot(mask, photons)];
  }
  std::size_t index(const AtomConfig& atoms, int photons) const { return index(atoms.mask(), photons); }
  std::size_t index(const BasisState& s) const { return index(s.atoms.mask(), s.photons); }

  /// Flat index of "only atom `atom` excited" with `photons` photons.
  std::size_t single_index(int atom, int photons) const {
    return index(AtomConfig::atom_bit(n_atoms_, atom), photons);
  }

  friend bool operator==(const AtomFieldBasis& a, const AtomFieldBasis& b) {
    return a.n_atoms_ == b.n_atoms_ && a.n_max_ == b.n_max_;
  }

  /// Calls f(mask) for each N-bit mask with popcount k in increasing order.
  template <class F>
  static void for_each_mask(int n, int k, F&& f) {
    if (k == 0) {
      f(std::uint64_t{0});
      return;
    }
    if (k > n) return;
    std::uint64_t v = (std::uint64_t{1} << k) - 1;
    const std::uint64_t limit = std::uint64_t{1} << n;
    while (v < limit) {
      f(v);
      const std::uint64_t t = v | (v - 1);
      v = (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
    }
  }

 private:
  std::size_t slot(std::uint64_t mask, int photons) const {
    return static_cast<std::size_t>(photons) * n_configs() + static_cast<std::size_t>(mask);
  }

  int n_atoms_;
  int n_max_;
  std::vector<BasisState> states_;
  std::vector<std::size_t> index_;
  std::vector<Block> blocks_;
};

using BasisPtr = std::shared_ptr<const AtomFieldBasis>;

inline BasisPtr build_basis(int n_atoms, int n_max, double cap = dimension_cap()) {
  return std::make_shared<const AtomFieldBasis>(n_atoms, n_max, cap);
}

// ---------------------------------------------------------------------------
// Dicke labels

/// Half-integer stored as twice its value.
struct HalfInt {
  int twice = 0;
  static HalfInt from_double(double v) { return HalfInt{static_cast<int>(std::lround(2.0 * v))}; }
  double value() const { return 0.5 * twice; }
  friend auto operator<=>(const HalfInt&, const HalfInt&) = default;
};

struct DickeLabel {
  HalfInt j;
  HalfInt m;
  int lam = 1;
  friend bool operator==(const DickeLabel&, const DickeLabel&) = default;
};

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Number of independent Dicke ladders with total spin j for N spin-1/2.
inline long long dicke_degeneracy(int n_atoms, HalfInt j) {
  const int d = n_atoms - j.twice;  // 2 (N/2 - j)
  if (j.twice < 0 || d < 0 || d % 2 != 0) return 0;
  const int r = d / 2;
  return binomial(n_atoms, r) - binomial(n_atoms, r - 1);
}

inline DickeLabel make_dicke_label(int n_atoms, HalfInt j, HalfInt m, int lam) {
  if (j.twice > n_atoms || j.twice < 0 || (n_atoms - j.twice) % 2 != 0)
    throw PreconditionError("DickeLabel: j must be N/2, N/2-1, ... >= 0");
  if (std::abs(m.twice) > j.twice || (j.twice - m.twice) % 2 != 0)
    throw PreconditionError("DickeLabel: m must be in -j..j in integer steps");
  if (lam < 1 || lam > dicke_degeneracy(n_atoms, j)) throw PreconditionError("DickeLabel: lam out of range");
  return DickeLabel{j, m, lam};
}

/// Label of the symmetric single-excitation state.
inline DickeLabel symmetric_label(int n_atoms) {
  return make_dicke_label(n_atoms, HalfInt{n_atoms}, HalfInt{2 - n_atoms}, 1);
}

/// Label of the i-th single-excitation subradiant state, i = 2..N.
inline DickeLabel subradiant_label(int n_atoms, int i) {
  return make_dicke_label(n_atoms, HalfInt{n_atoms - 2}, HalfInt{2 - n_atoms}, i - 1);
}

// ---------------------------------------------------------------------------
// Atomic single-excitation vectors, entry i = amplitude of "only atom i excited".

inline Eigen::VectorXd symmetric_atomic(int n_atoms) {
  return Eigen::VectorXd::Constant(n_atoms, 1.0 / std::sqrt(static_cast<double>(n_atoms)));
}

inline Eigen::VectorXd subradiant_target_atomic(int n_atoms, int control = 0) {
  if (n_atoms < 2) throw PreconditionError("no subradiant sector for N = 1");
  const double n = n_atoms;
  const double s = 1.0 / std::sqrt(n * (n - 1.0));
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n_atoms, -s);
  v(control) = (n - 1.0) * s;
  return v;
}

/// N x (N-1) orthonormal columns spanning the complement of the symmetric
/// vector. Column 0 is the target; the rest come from Gram-Schmidt over unit
/// vectors taken in atom order.
inline Eigen::MatrixXd subradiant_basis_atomic(int n_atoms, int control = 0) {
  if (n_atoms < 2) throw PreconditionError("no subradiant sector for N = 1");
  std::vector<Eigen::VectorXd> accepted{symmetric_atomic(n_atoms), subradiant_target_atomic(n_atoms, control)};
  for (int e = 0; e < n_atoms && static_cast<int>(accepted.size()) < n_atoms + 1; ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(n_atoms, e);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : accepted) v -= q.dot(v) * q;
    const double nv = v.norm();
    if (nv > 1e-8) accepted.push_back(v / nv);
  }
  Eigen::MatrixXd out(n_atoms, n_atoms - 1);
  for (int c = 0; c < n_atoms - 1; ++c) out.col(c) = accepted[static_cast<std::size_t>(c) + 1];
  return out;
}

// ---------------------------------------------------------------------------

/// Complex amplitude vector over the flat basis.
class PureState {
 public:
  explicit PureState(BasisPtr basis)
      : basis_(std::move(basis)), amplitudes_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis_->dim()))) {}
  PureState(BasisPtr basis, Eigen::VectorXcd amplitudes) : basis_(std::move(basis)), amplitudes_(std::move(amplitudes)) {
    if (amplitudes_.size() != static_cast<Eigen::Index>(basis_->dim()))
      throw PreconditionError("PureState: amplitude vector does not match basis dimension");
  }

  const AtomFieldBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }
  Eigen::VectorXcd& amplitudes() { return amplitudes_; }

  cplx operator[](std::size_t i) const { return amplitudes_(static_cast<Eigen::Index>(i)); }
  cplx& operator[](std::size_t i) { return amplitudes_(static_cast<Eigen::Index>(i)); }

  double norm() const { return amplitudes_.norm(); }

  auto block_segment(const Block& b) const {
    return amplitudes_.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.size));
  }
  auto block_segment(const Block& b) {
    return amplitudes_.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.size));
  }

  double block_weight(int excitation) const {
    if (!basis_->has_block(excitation)) return 0.0;
    return block_segment(basis_->block(excitation)).squaredNorm();
  }

  /// Excitation blocks carrying any nonzero amplitude.
  std::vector<int> occupied_blocks() const {
    std::vector<int> out;
    for (const auto& b : basis_->blocks())
      if (b.size > 0 && block_segment(b).squaredNorm() > 0.0) out.push_back(b.excitation);
    return out;
  }

  /// Amplitudes over "only atom i excited" at a fixed photon number.
  Eigen::VectorXcd single_excitation_slice(int photons) const {
    const int n = basis_->n_atoms();
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v(i) = (*this)[basis_->single_index(i, photons)];
    return v;
  }

 private:
  BasisPtr basis_;
  Eigen::VectorXcd amplitudes_;
};

inline void require_same_basis(const AtomFieldBasis& a, const AtomFieldBasis& b) {
  if (!(a == b)) throw PreconditionError("basis mismatch between operands");
}

inline cplx inner(const PureState& a, const PureState& b) {
  require_same_basis(a.basis(), b.basis());
  return a.amplitudes().dot(b.amplitudes());
}

/// Atomic single-excitation vector tensored with |photons>.
inline PureState single_excitation_state(const BasisPtr& basis, const Eigen::VectorXcd& atomic, int photons) {
  if (photons < 0 || photons > basis->n_max())
    throw PreconditionError("photon number " + std::to_string(photons) + " outside truncation [0, " +
                            std::to_string(basis->n_max()) + "]");
  if (atomic.size() != basis->n_atoms()) throw PreconditionError("atomic vector length must equal N");
  PureState s(basis);
  for (int i = 0; i < basis->n_atoms(); ++i) s[basis->single_index(i, photons)] = atomic(i);
  return s;
}

inline PureState symmetric_state(const BasisPtr& basis, int n_photons) {
  return single_excitation_state(basis, symmetric_atomic(basis->n_atoms()).cast<cplx>(), n_photons);
}

inline PureState subradiant_target(const BasisPtr& basis, int n_photons, int control = 0) {
  if (basis->n_atoms() < 2) throw PreconditionError("no subradiant sector for N = 1");
  return single_excitation_state(basis, subradiant_target_atomic(basis->n_atoms(), control).cast<cplx>(), n_photons);
}

inline std::vector<PureState> subradiant_basis(const BasisPtr& basis, int n_photons, int control = 0) {
  const Eigen::MatrixXd cols = subradiant_basis_atomic(basis->n_atoms(), control);
  std::vector<PureState> out;
  out.reserve(static_cast<std::size_t>(cols.cols()));
  for (Eigen::Index c = 0; c < cols.cols(); ++c)
    out.push_back(single_excitation_state(basis, cols.col(c).cast<cplx>(), n_photons));
  return out;
}

inline constexpr double kNormTolerance = 1e-10;

/// |atoms> (x) sum_n c_n |n>.
inline PureState product_state(const BasisPtr& basis, const AtomConfig& atoms, const Eigen::VectorXcd& field) {
  if (atoms.n_atoms() != basis->n_atoms()) throw PreconditionError("atomic configuration has wrong length");
  if (field.size() != basis->n_max() + 1)
    throw PreconditionError("field vector must have n_max + 1 = " + std::to_string(basis->n_max() + 1) + " entries");
  if (std::abs(field.squaredNorm() - 1.0) > kNormTolerance)
    throw PreconditionError("field vector is not normalized (norm^2 = " + std::to_string(field.squaredNorm()) + ")");
  PureState s(basis);
  for (int n = 0; n <= basis->n_max(); ++n) s[basis->index(atoms, n)] = field(n);
  return s;
}

/// Control atom excited, all others in the ground level, field sum_n c_n |n>.
inline PureState control_excited_state(const BasisPtr& basis, const Eigen::VectorXcd& field, int control = 0) {
  if (control < 0 || control >= basis->n_atoms()) throw PreconditionError("control atom index out of range");
  return product_state(basis, AtomConfig::single(basis->n_atoms(), control), field);
}

/// Largest weight carried by truncation-clipped blocks.
inline double truncated_block_weight(const PureState& s) {
  double w = 0.0;
  for (const auto& b : s.basis().blocks())
    if (b.truncated) w += s.block_segment(b).squaredNorm();
  return w;
}

}  // namespace subrad
