#pragma once

// Preparation of the subradiant state: excite the control atom, let the
// detuned cavity entangle the atoms for t_m, then rotate the phase of the
// control atom's excited level.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "subrad/dynamics.hpp"
#include "subrad/error.hpp"
#include "subrad/fields.hpp"
#include "subrad/hilbert.hpp"
#include "subrad/model.hpp"
#include "subrad/parallel.hpp"
#include "subrad/perturb.hpp"

namespace subrad {

struct ProtocolPlan {
  double t_m = 0.0;    ///< seconds
  double theta = 0.0;  ///< alpha * t_m
  double phi = 0.0;    ///< phase carried by the control term at t_m
  int branch = 0;
};

/// Target modulus sin(alpha t_m) = sqrt(N / (4N - 4)).
inline double timing_sine(int n_atoms) {
  const double n = n_atoms;
  return std::sqrt(n / (4.0 * n - 4.0));
}

/// Branch b solves |sin(theta)| = sqrt(N/(4N-4)) for the b-th smallest
/// theta > 0: asin(s), pi - asin(s), pi + asin(s), ...
inline ProtocolPlan plan(const SystemParams& p, int branch = 0) {
  const int N = p.n_atoms();
  if (N < 2) throw PreconditionError("no subradiant sector for N = 1");
  if (branch < 0) throw PreconditionError("plan: branch index must be >= 0");
  if (p.resonant()) throw PreconditionError("plan: the protocol needs a nonzero detuning");
  const double alpha = p.alpha();
  const double base = std::asin(timing_sine(N));
  const double magnitude = (branch / 2) * std::numbers::pi + (branch % 2 == 0 ? base : std::numbers::pi - base);
  ProtocolPlan out;
  out.branch = branch;
  out.t_m = magnitude / std::abs(alpha);
  out.theta = alpha * out.t_m;
  // e^{i phi} = c_control / (c_other * (1 - N)) for the slow amplitudes at theta
  const double n = N;
  const double s = std::sin(out.theta);
  const double c = std::cos(out.theta);
  const cplx e_phi = cplx{(n - 2.0) * s, n * c} / (2.0 * (n - 1.0) * s);
  out.phi = std::arg(e_phi);
  return out;
}

/// Multiplies every amplitude with the control atom excited by e^{-i phi}.
inline PureState phase_gate(const PureState& s, double phi, int control = 0) {
  const auto& basis = s.basis();
  if (control < 0 || control >= basis.n_atoms()) throw PreconditionError("phase_gate: control atom index out of range");
  const cplx f = std::polar(1.0, -phi);
  PureState out = s;
  for (std::size_t i = 0; i < basis.dim(); ++i)
    if (basis.state(i).atoms.excited(control)) out[i] *= f;
  return out;
}

/// Tr(P_DFS rho_atoms); with `photons` set, only that Fock level counts.
inline double dfs_weight(const PureState& s, std::optional<int> photons = std::nullopt, int control = 0) {
  const Eigen::MatrixXcd cols = subradiant_basis_atomic(s.basis().n_atoms(), control).cast<cplx>();
  double w = 0.0;
  for (int n = 0; n <= s.basis().n_max(); ++n) {
    if (photons && *photons != n) continue;
    w += (cols.adjoint() * s.single_excitation_slice(n)).squaredNorm();
  }
  return w;
}

inline double dfs_weight(const AtomicDensity& rho, int control = 0) {
  const Eigen::MatrixXcd cols = subradiant_basis_atomic(rho.n_atoms(), control).cast<cplx>();
  return (cols.adjoint() * rho.single_excitation_block() * cols).trace().real();
}

/// <2|rho_atoms|2>.
inline double subradiant_fidelity(const PureState& s, int control = 0) {
  return marginal_weight(s, subradiant_target_atomic(s.basis().n_atoms(), control).cast<cplx>());
}

enum class MixtureMode { Exact, Sampled };

struct ProtocolOptions {
  int branch = 0;
  std::optional<double> phi_override;
  std::optional<int> n_max;  ///< default: auto_n_max
  bool excite_control = true;
  int control = 0;
  int pt_grid_points = 401;
  bool record_trajectory = false;
  int trajectory_points = 400;  ///< over [0, 2 pi / |alpha|]
  MixtureMode mixture = MixtureMode::Exact;
  int samples = 256;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  friend bool operator==(const ProtocolOptions&, const ProtocolOptions&) = default;
};

inline constexpr double kMixturePtWeight = 0.01;

struct ProtocolReport {
  int n_atoms = 0;
  double alpha = 0.0;
  double delta_e1 = 0.0;  ///< field-averaged second-order shifts
  double delta_ei = 0.0;
  double t_m = 0.0;
  double phi = 0.0;
  int branch = 0;
  double fidelity_subradiant = 0.0;
  double dfs_weight = 0.0;
  double emission_expectation = 0.0;
  double mean_photons = 0.0;
  double validity = 0.0;
  Validity validity_class = Validity::Ok;
  std::optional<double> pt_coefficient_error;   ///< max over [0, t_m] of the phase-aligned vector error
  std::optional<double> pt_entrywise_error;     ///< worst single coefficient at t_m
  double norm_error = 0.0;
  int n_max = 0;
  std::size_t basis_dim = 0;
  std::vector<int> compiled_blocks;
  double truncated_weight = 0.0;
  std::vector<FockWeight> components;  ///< Fock mixture actually simulated (thermal fields)
  std::vector<TrajectoryPoint> trajectory;

  friend bool operator==(const ProtocolReport&, const ProtocolReport&) = default;
};

namespace detail {

inline void check_truncation(const PureState& s) {
  const double w = truncated_block_weight(s);
  if (w > kFieldTailTolerance)
    throw TruncationError("initial state puts weight " + std::to_string(w) +
                          " on truncation-clipped blocks; raise n_max");
}

/// Slow-model deviation for every Fock level carrying at least `min_weight`
/// of the field: worst vector error over [0, t_end] and worst single entry at t_end.
inline std::pair<double, double> pt_errors(const SpectralExpansion& ex, const SystemParams& p, const Eigen::VectorXcd& field,
                                           double t_end, int points, int control, double min_weight) {
  const int N = p.n_atoms();
  const int n_max = static_cast<int>(field.size()) - 1;
  std::vector<int> levels;
  for (int n = 0; n < n_max; ++n)  // level n needs photon n+1 inside the basis
    if (std::norm(field(n)) >= min_weight) levels.push_back(n);
  double worst_vec = 0.0;
  double worst_entry = 0.0;
  const auto grid = uniform_grid(0.0, t_end, points);
  for (double t : grid) {
    const Eigen::VectorXcd model = effective_evolve(p, t).product_vector(N, control);
    for (int n : levels) {
      const Eigen::VectorXcd exact = ex.single_excitation_slice_at(t, n) / std::abs(field(n));
      worst_vec = std::max(worst_vec, coefficient_error(exact, model));
      if (t == grid.back()) worst_entry = std::max(worst_entry, entrywise_relative_error(exact, model));
    }
  }
  return {worst_vec, worst_entry};
}

}  // namespace detail

inline ProtocolReport run_pure(const SystemParams& p, const FieldSpec& field, const ProtocolOptions& opt) {
  const int N = p.n_atoms();
  const ProtocolPlan pl = plan(p, opt.branch);
  const int n_max = opt.n_max.value_or(auto_n_max(field, N));
  const BasisPtr basis = build_basis(N, n_max);
  const Eigen::VectorXcd c = field_amplitudes(field, n_max);
  const PureState psi0 = opt.excite_control ? control_excited_state(basis, c, opt.control)
                                            : product_state(basis, AtomConfig(N, 0), c);
  detail::check_truncation(psi0);

  const Propagator prop = compile_for(p, psi0, opt.threads);
  const SpectralExpansion ex(prop, psi0);

  ProtocolReport r;
  r.n_atoms = N;
  r.alpha = p.alpha();
  r.t_m = pl.t_m;
  r.phi = opt.phi_override.value_or(pl.phi);
  r.branch = pl.branch;
  r.mean_photons = mean_photon_number(c);
  r.validity = validity_parameter(p, r.mean_photons);
  r.validity_class = classify_validity(r.validity);
  r.n_max = n_max;
  r.basis_dim = basis->dim();
  r.compiled_blocks = psi0.occupied_blocks();
  r.truncated_weight = truncated_block_weight(psi0);
  for (int n = 0; n < n_max; ++n) {
    const EffectiveModel em = closed_form_corrections(p, n + 1);
    r.delta_e1 += std::norm(c(n)) * em.delta_e1;
    r.delta_ei += std::norm(c(n)) * em.delta_ei.value_or(em.delta_e1);
  }

  if (opt.excite_control) {
    const auto [vec, entry] = detail::pt_errors(ex, p, c, pl.t_m, opt.pt_grid_points, opt.control, kMixturePtWeight);
    r.pt_coefficient_error = vec;
    r.pt_entrywise_error = entry;
  }

  const PureState prepared = phase_gate(ex.at(pl.t_m), r.phi, opt.control);
  r.fidelity_subradiant = subradiant_fidelity(prepared, opt.control);
  r.dfs_weight = dfs_weight(prepared, std::nullopt, opt.control);
  r.emission_expectation = emission_expectation(prepared);
  r.norm_error = std::abs(prepared.norm() - 1.0);

  if (opt.record_trajectory) {
    const auto times = uniform_grid(0.0, 2.0 * std::numbers::pi / std::abs(p.alpha()), opt.trajectory_points);
    ex.for_each_time(times, [&](double t, const PureState& psi) { r.trajectory.push_back(observe(psi, t, opt.control)); });
  }
  return r;
}

/// Thermal fields: each Fock component is run on its own and the metrics are
/// averaged with the mixture weights.
inline ProtocolReport run_mixture(const SystemParams& p, const ThermalField& field, const ProtocolOptions& opt) {
  std::vector<FockWeight> comps = thermal(field.mean_n);
  if (opt.mixture == MixtureMode::Sampled) {
    if (opt.samples < 1) throw PreconditionError("sampled mixture needs samples >= 1");
    std::vector<double> w;
    for (const auto& cw : comps) w.push_back(cw.weight);
    std::mt19937_64 rng(opt.seed);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::map<int, int> counts;
    for (int s = 0; s < opt.samples; ++s) ++counts[comps[pick(rng)].n];
    comps.clear();
    for (const auto& [n, k] : counts) comps.push_back({static_cast<double>(k) / opt.samples, n});
  }

  std::vector<ProtocolReport> parts(comps.size());
  ProtocolOptions sub = opt;
  sub.threads = 1;
  sub.record_trajectory = false;
  parallel_for(comps.size(), opt.threads,
               [&](std::size_t i) { parts[i] = run_pure(p, FockField{comps[i].n}, sub); });

  ProtocolReport r;
  r.n_atoms = p.n_atoms();
  r.alpha = p.alpha();
  const ProtocolPlan pl = plan(p, opt.branch);
  r.t_m = pl.t_m;
  r.phi = opt.phi_override.value_or(pl.phi);
  r.branch = pl.branch;
  r.components = comps;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const double w = comps[i].weight;
    const ProtocolReport& q = parts[i];
    r.fidelity_subradiant += w * q.fidelity_subradiant;
    r.dfs_weight += w * q.dfs_weight;
    r.emission_expectation += w * q.emission_expectation;
    r.delta_e1 += w * q.delta_e1;
    r.delta_ei += w * q.delta_ei;
    r.mean_photons += w * comps[i].n;
    r.norm_error = std::max(r.norm_error, q.norm_error);
    r.n_max = std::max(r.n_max, q.n_max);
    r.basis_dim = std::max(r.basis_dim, q.basis_dim);
    r.truncated_weight += w * q.truncated_weight;
    for (int b : q.compiled_blocks)
      if (std::find(r.compiled_blocks.begin(), r.compiled_blocks.end(), b) == r.compiled_blocks.end())
        r.compiled_blocks.push_back(b);
    if (q.pt_coefficient_error && w >= kMixturePtWeight) {
      r.pt_coefficient_error = std::max(r.pt_coefficient_error.value_or(0.0), *q.pt_coefficient_error);
      r.pt_entrywise_error = std::max(r.pt_entrywise_error.value_or(0.0), q.pt_entrywise_error.value_or(0.0));
    }
  }
  std::sort(r.compiled_blocks.begin(), r.compiled_blocks.end());
  r.mean_photons = field.mean_n;
  r.validity = validity_parameter(p, field.mean_n);
  r.validity_class = classify_validity(r.validity);
  return r;
}

/// Full scheme: initial state, exact evolution to t_m, phase gate, metrics.
inline ProtocolReport run(const SystemParams& p, const FieldSpec& field, const ProtocolOptions& opt = {}) {
  if (const auto* th = std::get_if<ThermalField>(&field)) return run_mixture(p, *th, opt);
  return run_pure(p, field, opt);
}

/// Product-basis coefficients of the slow model after the planned gate.
inline Eigen::VectorXcd gated_effective_coefficients(const SystemParams& p, const ProtocolPlan& pl, int control = 0) {
  Eigen::VectorXcd v = effective_evolve(p, pl.t_m).product_vector(p.n_atoms(), control);
  v(control) *= std::polar(1.0, -pl.phi);
  return v;
}

}  // namespace subrad
