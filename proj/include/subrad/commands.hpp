#pragma once

// Implementations behind the `subrad` command-line tool. Each command reads a
// RunConfig, writes its files into an output directory and returns a process
// exit code: 0 success, 1 error, 2 refused for lying outside the
// perturbative window.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "subrad/config.hpp"
#include "subrad/dynamics.hpp"
#include "subrad/error.hpp"
#include "subrad/fields.hpp"
#include "subrad/io.hpp"
#include "subrad/parallel.hpp"
#include "subrad/perturb.hpp"
#include "subrad/protocol.hpp"

namespace subrad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitRefused = 2;

struct CommandContext {
  std::filesystem::path out_dir = ".";
  unsigned jobs = 1;
  std::ostream* log = &std::cout;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw Error("cannot write " + (dir / name).string());
  return os;
}

inline void write_json(const std::filesystem::path& dir, const std::string& name, const json& j) {
  auto os = open_output(dir, name);
  os << j.dump(2) << '\n';
}

inline double cfg_mean_n(const RunConfig& c) { return mean_photon_number(c.field); }

}  // namespace detail

inline int cmd_protocol(const RunConfig& cfg, const CommandContext& ctx) {
  const SystemParams p = cfg.params();
  if (p.n_atoms() < 2) throw PreconditionError("no subradiant sector for N = 1");
  const double validity = validity_parameter(p, detail::cfg_mean_n(cfg));
  if (classify_validity(validity) == Validity::Invalid && !cfg.allow_invalid) {
    *ctx.log << "refused: validity parameter " << io::format_double(validity)
             << " exceeds 0.3 (set \"allow_invalid\": true to run anyway)\n";
    return kExitRefused;
  }
  ProtocolOptions opt = cfg.protocol;
  opt.threads = ctx.jobs;
  opt.record_trajectory = true;
  const ProtocolReport r = run(p, cfg.field, opt);

  detail::write_json(ctx.out_dir, cfg.report_file, report_document(cfg, r));
  if (!r.trajectory.empty()) {
    auto os = detail::open_output(ctx.out_dir, cfg.trajectory_file);
    write_trajectory_csv(os, r.trajectory);
  }
  *ctx.log << "t_m = " << io::format_double(r.t_m * 1e6) << " us, fidelity = " << io::format_double(r.fidelity_subradiant)
           << ", dfs_weight = " << io::format_double(r.dfs_weight) << ", validity = " << io::format_double(r.validity) << " ("
           << to_string(r.validity_class) << ")\n";
  return kExitOk;
}

struct SweepRow {
  double value = 0.0;
  int n_atoms = 0;
  std::optional<double> delta_ratio;
  double mean_n = 0.0;
  double t_m = 0.0;
  double alpha = 0.0;
  double fidelity = 0.0;
  double dfs_weight = 0.0;
  double emission = 0.0;
  std::optional<double> pt_error;
  double validity = 0.0;
  Validity flag = Validity::Ok;
  std::string error;
};

/// Config for one sweep point.
inline RunConfig sweep_point(const RunConfig& base, const std::string& axis, double value) {
  RunConfig c = base;
  if (axis == "N") {
    if (value != std::floor(value) || value < 1) throw PreconditionError("sweep: N values must be positive integers");
    c.n_atoms = static_cast<int>(value);
  } else if (axis == "delta_ratio") {
    if (!base.delta_ratio) throw PreconditionError("sweep: delta_ratio axis needs a delta_ratio config");
    c.delta_ratio = value;
  } else if (axis == "mean_n") {
    if (value < 0) throw PreconditionError("sweep: mean_n values must be >= 0");
    if (std::holds_alternative<FockField>(c.field)) {
      if (value != std::floor(value)) throw PreconditionError("sweep: Fock fields need integer mean_n");
      c.field = FockField{static_cast<int>(value)};
    } else if (std::holds_alternative<CoherentField>(c.field)) {
      c.field = CoherentField{cplx{std::sqrt(value), 0.0}};
    } else {
      c.field = ThermalField{value};
    }
  } else {
    throw PreconditionError("sweep: axis must be N, delta_ratio or mean_n (got '" + axis + "')");
  }
  c.validate();
  return c;
}

inline std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::string& axis, const std::vector<double>& grid,
                                       unsigned jobs) {
  if (grid.empty()) throw PreconditionError("sweep: grid is empty");
  std::vector<SweepRow> rows(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.value = grid[i];
    try {
      const RunConfig c = sweep_point(cfg, axis, grid[i]);
      row.n_atoms = c.n_atoms;
      row.delta_ratio = c.delta_ratio;
      row.mean_n = mean_photon_number(c.field);
      const SystemParams p = c.params();
      row.alpha = p.alpha();
      row.validity = validity_parameter(p, row.mean_n);
      row.flag = classify_validity(row.validity);
      ProtocolOptions opt = c.protocol;
      opt.threads = 1;
      const ProtocolReport r = run(p, c.field, opt);
      row.t_m = r.t_m;
      row.fidelity = r.fidelity_subradiant;
      row.dfs_weight = r.dfs_weight;
      row.emission = r.emission_expectation;
      row.pt_error = r.pt_coefficient_error;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + '"';
}

inline void write_sweep_csv(std::ostream& os, const std::string& axis, const std::vector<SweepRow>& rows) {
  io::write_row(os, {"axis", "value", "n_atoms", "delta_ratio", "mean_n", "t_m_s", "alpha_per_s", "fidelity", "dfs_weight",
                     "emission", "pt_error", "validity", "validity_flag", "error"});
  for (const auto& r : rows) {
    const auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("nan"); };
    io::write_row(os, {axis, io::format_double(r.value), std::to_string(r.n_atoms), opt(r.delta_ratio), io::format_double(r.mean_n),
                       io::format_double(r.t_m), io::format_double(r.alpha), io::format_double(r.fidelity),
                       io::format_double(r.dfs_weight), io::format_double(r.emission), opt(r.pt_error),
                       io::format_double(r.validity), to_string(r.flag), csv_escape(r.error)});
  }
}

inline int cmd_sweep(const RunConfig& cfg, const CommandContext& ctx, const std::optional<SweepSpec>& override_spec = {}) {
  const std::optional<SweepSpec> spec = override_spec ? override_spec : cfg.sweep;
  if (!spec) throw PreconditionError("sweep: no axis/grid given (config \"sweep\" or --axis/--grid)");
  const auto rows = run_sweep(cfg, spec->axis, spec->values, ctx.jobs);
  auto os = detail::open_output(ctx.out_dir, "sweep.csv");
  write_sweep_csv(os, spec->axis, rows);
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.error.empty(); });
  *ctx.log << "sweep over " << spec->axis << ": " << rows.size() << " points, " << failed << " failed\n";
  return kExitOk;
}

struct SpectrumRow {
  std::size_t index = 0;
  double eigenvalue = 0.0;     ///< absolute, rad/s
  double shift = 0.0;          ///< eigenvalue minus unperturbed level of its dominant sector
  int atomic_excitation = 0;   ///< dominant k
  double sector_weight = 0.0;  ///< eigenvector weight in that sector
  std::string pt_level;        ///< symmetric | subradiant | unperturbed
  std::optional<double> pt_shift;
  std::optional<double> abs_error;
  std::optional<double> rel_error;
};

struct SpectrumSummary {
  int block = 0;
  bool g_zero = false;
  std::optional<double> splitting;
  std::optional<double> splitting_pt;
  std::optional<double> splitting_rel_error;
  double sector_spread = 0.0;  ///< eigenvalue range of the single-excitation-dominated states
  std::vector<SpectrumRow> rows;
};

inline SpectrumSummary compute_spectrum(const SystemParams& p, int block, bool g_zero, std::optional<int> n_max_override = {}) {
  if (block < 0) throw PreconditionError("spectrum: block must be >= 0");
  const int n_max = n_max_override.value_or(std::max(block, 0));
  const BasisPtr basis = build_basis(p.n_atoms(), n_max);
  if (!basis->has_block(block)) throw PreconditionError("spectrum: block M=" + std::to_string(block) + " out of range");
  if (basis->block(block).truncated)
    throw TruncationError("spectrum: block M=" + std::to_string(block) + " is clipped by n_max=" + std::to_string(n_max));
  CompileOptions co;
  co.blocks = {block};
  co.with_coupling = !g_zero;
  const Propagator prop = compile(p, basis, co);
  const BlockSpectrum& sp = prop.spectrum(block);
  const Block& b = basis->block(block);

  SpectrumSummary out;
  out.block = block;
  out.g_zero = g_zero;
  const int N = p.n_atoms();
  std::optional<EffectiveModel> em;
  if (block >= 1) em = closed_form_corrections(p, block);
  const Eigen::VectorXd sym = symmetric_atomic(N);

  std::vector<double> sym_levels;
  std::vector<double> sub_levels;
  for (Eigen::Index c = 0; c < sp.energies.size(); ++c) {
    std::vector<double> sector(static_cast<std::size_t>(N + 1), 0.0);
    for (std::size_t i = 0; i < b.size; ++i)
      sector[static_cast<std::size_t>(basis->state(b.offset + i).atoms.excitation_count())] +=
          sp.vectors(static_cast<Eigen::Index>(i), c) * sp.vectors(static_cast<Eigen::Index>(i), c);
    const auto k = static_cast<int>(std::max_element(sector.begin(), sector.end()) - sector.begin());
    SpectrumRow row;
    row.index = static_cast<std::size_t>(c);
    row.eigenvalue = sp.shift + sp.energies(c);
    row.atomic_excitation = k;
    row.sector_weight = sector[static_cast<std::size_t>(k)];
    row.shift = sp.energies(c) + k * p.delta();
    row.pt_level = "unperturbed";
    if (k == 1 && em) {
      double w_sym = 0.0;
      for (int i = 0; i < N; ++i)
        w_sym += sym(i) * sp.vectors(static_cast<Eigen::Index>(basis->single_index(i, block - 1) - b.offset), c);
      w_sym *= w_sym;
      const bool symmetric = N == 1 || w_sym > 0.5 * row.sector_weight;
      row.pt_level = symmetric ? "symmetric" : "subradiant";
      row.pt_shift = symmetric ? em->delta_e1 : *em->delta_ei;
      row.abs_error = std::abs(row.shift - *row.pt_shift);
      if (*row.pt_shift != 0.0) row.rel_error = std::abs(row.shift - *row.pt_shift) / std::abs(*row.pt_shift);
      (symmetric ? sym_levels : sub_levels).push_back(sp.energies(c));
    }
    out.rows.push_back(row);
  }
  std::vector<double> all = sym_levels;
  all.insert(all.end(), sub_levels.begin(), sub_levels.end());
  if (!all.empty()) out.sector_spread = *std::max_element(all.begin(), all.end()) - *std::min_element(all.begin(), all.end());
  if (!sym_levels.empty() && !sub_levels.empty()) {
    double mean_sub = 0.0;
    for (double v : sub_levels) mean_sub += v;
    mean_sub /= static_cast<double>(sub_levels.size());
    out.splitting = mean_sub - sym_levels.front();
    out.splitting_pt = N * p.g() * p.g() / p.delta();
    out.splitting_rel_error = std::abs(*out.splitting - *out.splitting_pt) / std::abs(*out.splitting_pt);
  }
  return out;
}

inline int cmd_spectrum(const RunConfig& cfg, const CommandContext& ctx) {
  const SystemParams p = cfg.params();
  const SpectrumSummary s = compute_spectrum(p, cfg.spectrum.block, cfg.spectrum.g_zero, cfg.protocol.n_max);
  auto os = detail::open_output(ctx.out_dir, "spectrum.csv");
  io::write_row(os, {"index", "eigenvalue_rad_s", "shift_rad_s", "atomic_excitation", "sector_weight", "pt_level",
                     "pt_shift_rad_s", "abs_error_rad_s", "rel_error"});
  const auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("nan"); };
  for (const auto& r : s.rows)
    io::write_row(os, {std::to_string(r.index), io::format_double(r.eigenvalue), io::format_double(r.shift),
                       std::to_string(r.atomic_excitation), io::format_double(r.sector_weight), r.pt_level, opt(r.pt_shift),
                       opt(r.abs_error), opt(r.rel_error)});
  json j;
  j["block"] = s.block;
  j["g_zero"] = s.g_zero;
  subrad::detail::put_opt(j, "splitting_rad_s", s.splitting);
  subrad::detail::put_opt(j, "splitting_pt_rad_s", s.splitting_pt);
  subrad::detail::put_opt(j, "splitting_rel_error", s.splitting_rel_error);
  j["sector_spread_rad_s"] = s.sector_spread;
  detail::write_json(ctx.out_dir, "spectrum.json", j);
  *ctx.log << "block M=" << s.block << ": " << s.rows.size() << " eigenvalues";
  if (s.splitting_rel_error) *ctx.log << ", splitting rel. error vs N g^2/Delta = " << io::format_double(*s.splitting_rel_error);
  *ctx.log << '\n';
  return kExitOk;
}

/// Free evolution of the initial state (no phase gate), sampled on a grid.
inline int cmd_evolve(const RunConfig& cfg, const CommandContext& ctx) {
  const SystemParams p = cfg.params();
  if (std::holds_alternative<ThermalField>(cfg.field))
    throw PreconditionError("evolve: thermal fields are mixtures; use a fock or coherent field");
  const int n_max = cfg.protocol.n_max.value_or(auto_n_max(cfg.field, p.n_atoms()));
  const BasisPtr basis = build_basis(p.n_atoms(), n_max);
  const Eigen::VectorXcd c = field_amplitudes(cfg.field, n_max);
  const PureState psi0 = cfg.protocol.excite_control ? control_excited_state(basis, c, cfg.protocol.control)
                                                     : product_state(basis, AtomConfig(p.n_atoms(), 0), c);
  const Propagator prop = compile_for(p, psi0, ctx.jobs);
  const double t_end = cfg.evolve.t_end_s.value_or(2.0 * std::numbers::pi / std::abs(p.alpha()));
  const auto times = uniform_grid(0.0, t_end, cfg.evolve.points);
  const auto traj = sample_trajectory(prop, psi0, times, cfg.protocol.control);
  {
    auto os = detail::open_output(ctx.out_dir, cfg.trajectory_file);
    write_trajectory_csv(os, traj);
  }
  PureState last = evolve(prop, psi0, t_end);
  if (cfg.evolve.interaction_picture) last = to_interaction_picture(last, p, t_end);
  auto os = detail::open_output(ctx.out_dir, "amplitudes.csv");
  io::write_row(os, {"index", "atoms", "photons", "re", "im"});
  for (std::size_t i = 0; i < basis->dim(); ++i) {
    if (last[i] == cplx{}) continue;
    const BasisState& st = basis->state(i);
    io::write_row(os, {std::to_string(i), st.atoms.to_string(), std::to_string(st.photons), io::format_double(last[i].real()),
                       io::format_double(last[i].imag())});
  }
  *ctx.log << "evolved over [0, " << io::format_double(t_end) << "] s at " << times.size() << " points\n";
  return kExitOk;
}

/// Dispatches a command and maps exceptions onto exit codes.
inline int run_command(const std::string& name, const RunConfig& cfg, const CommandContext& ctx,
                       const std::optional<SweepSpec>& sweep_override = {}) {
  try {
    if (name == "protocol") return cmd_protocol(cfg, ctx);
    if (name == "sweep") return cmd_sweep(cfg, ctx, sweep_override);
    if (name == "spectrum") return cmd_spectrum(cfg, ctx);
    if (name == "evolve") return cmd_evolve(cfg, ctx);
    std::cerr << "unknown command '" << name << "'\n";
    return kExitError;
  } catch (const ValidityError& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return kExitRefused;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace subrad::cli
