#pragma once

// Second-order degenerate perturbation theory for the single-atomic-excitation
// sector: numerical effective matrix, closed-form level shifts and the slow
// effective dynamics they imply.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "subrad/error.hpp"
#include "subrad/hilbert.hpp"
#include "subrad/model.hpp"

namespace subrad {

/// The N states "one atom excited" (x) |n-1> inside block M = n, which share
/// one H0 eigenvalue, plus every other state of that block.
struct DegenerateSector {
  int excitation = 0;              ///< M = n
  int photons = 0;                 ///< n - 1
  double unperturbed_energy = 0.0;  ///< E0(n), rad/s
  double energy_shift = 0.0;       ///< block scalar part of E0(n)
  std::vector<std::size_t> members;        ///< flat indices, atom order
  std::vector<std::size_t> intermediates;  ///< flat indices, block order
};

inline DegenerateSector make_sector(const SystemParams& p, const AtomFieldBasis& basis, int n) {
  if (n < 1) throw PreconditionError("degenerate sector needs n >= 1 (one atomic excitation, n-1 photons)");
  if (p.n_atoms() != basis.n_atoms()) throw PreconditionError("params and basis disagree on N");
  if (!basis.has_block(n) || basis.block(n).truncated)
    throw TruncationError("degenerate sector M=" + std::to_string(n) + " needs n_max >= " + std::to_string(n));
  const Block& b = basis.block(n);
  DegenerateSector s;
  s.excitation = n;
  s.photons = n - 1;
  for (int i = 0; i < basis.n_atoms(); ++i) s.members.push_back(basis.single_index(i, n - 1));
  for (std::size_t i = b.offset; i < b.offset + b.size; ++i)
    if (basis.state(i).atoms.excitation_count() != 1) s.intermediates.push_back(i);
  const BlockOperator h0 = build_h0_block(p, basis, n);
  s.energy_shift = h0.shift;
  s.unperturbed_energy = h0.shift - p.delta();
  return s;
}

/// <i|H_int|k> between sector members; vanishes identically.
inline Eigen::MatrixXd first_order_matrix(const SystemParams& p, const AtomFieldBasis& basis, const DegenerateSector& s) {
  const Block& b = basis.block(s.excitation);
  const BlockOperator hint = build_hint_block(p, basis, s.excitation);
  const auto n = static_cast<Eigen::Index>(s.members.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      out(i, k) = hint.matrix(detail::local(b, s.members[static_cast<std::size_t>(i)]),
                              detail::local(b, s.members[static_cast<std::size_t>(k)]));
  return out;
}

inline constexpr double kDegeneracyGuard = 1e-6;

/// M_ik = sum_m <i|H_int|m><m|H_int|k> / (E0 - E_m), m over the block's
/// states at other H0 energies. H_int conserves M, so the sum is exact.
inline Eigen::MatrixXd second_order_matrix(const SystemParams& p, const AtomFieldBasis& basis, const DegenerateSector& s) {
  if (!(p.coupling_ratio() < 1.0)) throw PreconditionError("second-order PT needs |g/Delta| < 1");
  const Block& b = basis.block(s.excitation);
  const BlockOperator h0 = build_h0_block(p, basis, s.excitation);
  const BlockOperator hint = build_hint_block(p, basis, s.excitation);

  const double e0 = h0.matrix(detail::local(b, s.members.front()), detail::local(b, s.members.front()));
  for (std::size_t i : s.members) {
    const double e = h0.matrix(detail::local(b, i), detail::local(b, i));
    if (std::abs(e - e0) > 1e-9 * std::abs(s.unperturbed_energy)) throw PreconditionError("sector members are not degenerate");
  }

  const auto n = static_cast<Eigen::Index>(s.members.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t m : s.intermediates) {
    const auto lm = detail::local(b, m);
    const double gap = e0 - h0.matrix(lm, lm);
    if (std::abs(gap) < kDegeneracyGuard * std::abs(p.delta()))
      throw DegeneracyError("accidental degeneracy: intermediate state " + basis.state(m).atoms.to_string() + " |" +
                            std::to_string(basis.state(m).photons) + "> lies within 1e-6 |Delta| of E0");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double left = hint.matrix(detail::local(b, s.members[static_cast<std::size_t>(i)]), lm);
      if (left == 0.0) continue;
      for (Eigen::Index k = 0; k < n; ++k)
        out(i, k) += left * hint.matrix(lm, detail::local(b, s.members[static_cast<std::size_t>(k)])) / gap;
    }
  }
  return out;
}

struct EffectiveModel {
  int n = 1;
  double delta_e1 = 0.0;               ///< shift of the symmetric state
  std::optional<double> delta_ei;      ///< shift of every subradiant state (N >= 2)
  double alpha = 0.0;                  ///< N g^2 / (2 Delta)
};

/// dE1 = (g^2/Delta)(N n - 2N - 2n + 2), dEi = dE1 + N g^2/Delta.
inline EffectiveModel closed_form_corrections(const SystemParams& p, int n) {
  if (n < 1) throw PreconditionError("closed_form_corrections: n must be >= 1");
  if (p.resonant()) throw PreconditionError("closed_form_corrections: needs a nonzero detuning");
  const double N = p.n_atoms();
  const double u = p.g() * p.g() / p.delta();
  EffectiveModel m;
  m.n = n;
  m.delta_e1 = u * (N * n - 2.0 * N - 2.0 * n + 2.0);
  if (p.n_atoms() >= 2) m.delta_ei = m.delta_e1 + N * u;
  m.alpha = p.alpha();
  return m;
}

/// Slow dynamics from |control> = |1>/sqrt(N) + sqrt((N-1)/N)|2>, up to a
/// global phase.
struct EffectiveAmplitudes {
  cplx symmetric;   ///< e^{2i alpha t}/sqrt(N)
  cplx subradiant;  ///< sqrt((N-1)/N)
  cplx control;     ///< [N cos(alpha t) - i (N-2) sin(alpha t)] / N
  cplx other;       ///< 2i sin(alpha t) / N, each non-control atom

  /// Product-basis coefficients in atom order.
  Eigen::VectorXcd product_vector(int n_atoms, int control_index = 0) const {
    Eigen::VectorXcd v = Eigen::VectorXcd::Constant(n_atoms, other);
    v(control_index) = control;
    return v;
  }
};

inline EffectiveAmplitudes effective_evolve(const SystemParams& p, double t) {
  if (p.resonant()) throw PreconditionError("effective_evolve: needs a nonzero detuning");
  const double N = p.n_atoms();
  const double at = p.alpha() * t;
  const cplx i{0.0, 1.0};
  EffectiveAmplitudes a;
  a.symmetric = std::polar(1.0 / std::sqrt(N), 2.0 * at);
  a.subradiant = std::sqrt((N - 1.0) / N);
  a.control = (N * std::cos(at) - i * (N - 2.0) * std::sin(at)) / N;
  a.other = 2.0 * i * std::sin(at) / N;
  return a;
}

/// (g/|Delta|) sqrt(N <n> + N).
inline double validity_parameter(const SystemParams& p, double mean_n) {
  if (mean_n < 0.0) throw PreconditionError("validity_parameter: mean photon number must be >= 0");
  const double N = p.n_atoms();
  return p.coupling_ratio() * std::sqrt(N * mean_n + N);
}

enum class Validity { Ok, Marginal, Invalid };

inline constexpr double kValidityOk = 0.1;
inline constexpr double kValidityMarginal = 0.3;

inline Validity classify_validity(double v) {
  constexpr double slack = 1e-12;
  if (v <= kValidityOk * (1.0 + slack)) return Validity::Ok;
  if (v <= kValidityMarginal * (1.0 + slack)) return Validity::Marginal;
  return Validity::Invalid;
}

inline std::string to_string(Validity v) {
  switch (v) {
    case Validity::Ok: return "ok";
    case Validity::Marginal: return "marginal";
    case Validity::Invalid: return "invalid";
  }
  return "?";
}

/// min over a global phase of |e^{i theta} x - y| / |y|.
inline double coefficient_error(const Eigen::VectorXcd& exact, const Eigen::VectorXcd& model) {
  const double ny = model.norm();
  if (ny == 0.0) throw PreconditionError("coefficient_error: reference vector is zero");
  const double d2 = exact.squaredNorm() + model.squaredNorm() - 2.0 * std::abs(exact.dot(model));
  return std::sqrt(std::max(0.0, d2)) / ny;
}

/// Largest per-entry relative deviation after the same optimal phase
/// alignment. Ill-conditioned where an entry of `model` passes through zero.
inline double entrywise_relative_error(const Eigen::VectorXcd& exact, const Eigen::VectorXcd& model) {
  const cplx ov = exact.dot(model);
  const cplx phase = std::abs(ov) > 0.0 ? ov / std::abs(ov) : cplx{1.0, 0.0};
  double worst = 0.0;
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    const double ref = std::abs(model(i));
    const double diff = std::abs(phase * exact(i) - model(i));
    worst = std::max(worst, ref > 0.0 ? diff / ref : (diff > 0.0 ? INFINITY : 0.0));
  }
  return worst;
}

}  // namespace subrad
