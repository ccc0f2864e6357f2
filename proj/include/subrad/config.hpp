#pragma once

// Run configuration and report (de)serialization. Frequencies in configs are
// cyclic (Hz, the "/2pi" quantities); everything inside the library is rad/s.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "subrad/error.hpp"
#include "subrad/fields.hpp"
#include "subrad/model.hpp"
#include "subrad/perturb.hpp"
#include "subrad/protocol.hpp"

namespace subrad {

using json = nlohmann::json;

struct SweepSpec {
  std::string axis;  ///< "N", "delta_ratio" or "mean_n"
  std::vector<double> values;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct SpectrumSpec {
  int block = 1;
  bool g_zero = false;
  friend bool operator==(const SpectrumSpec&, const SpectrumSpec&) = default;
};

struct EvolveSpec {
  std::optional<double> t_end_s;  ///< default 2 pi / |alpha|
  int points = 400;
  bool interaction_picture = false;
  friend bool operator==(const EvolveSpec&, const EvolveSpec&) = default;
};

struct RunConfig {
  int n_atoms = 10;
  double g_over_2pi_hz = 24.0e3;
  std::optional<double> delta_ratio = 30.0;
  std::optional<double> omega_a_over_2pi_hz;
  std::optional<double> omega_c_over_2pi_hz;
  FieldSpec field = FockField{0};
  ProtocolOptions protocol;
  bool allow_invalid = false;
  std::string report_file = "report.json";
  std::string trajectory_file = "trajectory.csv";
  std::optional<SweepSpec> sweep;
  SpectrumSpec spectrum;
  EvolveSpec evolve;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  void validate() const {
    if (n_atoms < 1) throw PreconditionError("config: n_atoms must be >= 1");
    if (!(g_over_2pi_hz > 0.0)) throw PreconditionError("config: g_over_2pi_hz must be positive");
    const bool pair = omega_c_over_2pi_hz.has_value();
    if (delta_ratio.has_value() == pair)
      throw PreconditionError("config: give exactly one of delta_ratio or the omega_a/omega_c pair");
    if (pair && !omega_a_over_2pi_hz) throw PreconditionError("config: omega_c_over_2pi_hz needs omega_a_over_2pi_hz");
    if (delta_ratio && !(*delta_ratio > 0.0)) throw PreconditionError("config: delta_ratio must be positive");
    if (omega_a_over_2pi_hz && !(*omega_a_over_2pi_hz > 0.0)) throw PreconditionError("config: omega_a_over_2pi_hz must be positive");
    if (omega_c_over_2pi_hz && !(*omega_c_over_2pi_hz > 0.0)) throw PreconditionError("config: omega_c_over_2pi_hz must be positive");
    if (omega_c_over_2pi_hz && *omega_c_over_2pi_hz == *omega_a_over_2pi_hz)
      throw PreconditionError("config: omega_a and omega_c must differ");
  }

  SystemParams params() const {
    validate();
    const double g = kTwoPi * g_over_2pi_hz;
    if (delta_ratio)
      return SystemParams::from_detuning_ratio(n_atoms, g, *delta_ratio,
                                               kTwoPi * omega_a_over_2pi_hz.value_or(kDefaultOmegaAOver2PiHz));
    return SystemParams(n_atoms, kTwoPi * *omega_a_over_2pi_hz, kTwoPi * (*omega_c_over_2pi_hz - *omega_a_over_2pi_hz), g);
  }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw PreconditionError("config: unknown key '" + k + "' in " + where);
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

template <class T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline json field_to_json(const FieldSpec& f) {
  if (const auto* x = std::get_if<FockField>(&f)) return {{"kind", "fock"}, {"n", x->n}};
  if (const auto* x = std::get_if<CoherentField>(&f))
    return {{"kind", "coherent"}, {"amplitude_re", x->amplitude.real()}, {"amplitude_im", x->amplitude.imag()}};
  const auto& t = std::get<ThermalField>(f);
  return {{"kind", "thermal"}, {"mean_n", t.mean_n}};
}

inline FieldSpec field_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fock") {
    detail::reject_unknown(j, {"kind", "n"}, "field");
    const int n = j.value("n", 0);
    if (n < 0) throw PreconditionError("config: fock n must be >= 0");
    return FockField{n};
  }
  if (kind == "coherent") {
    detail::reject_unknown(j, {"kind", "amplitude_re", "amplitude_im"}, "field");
    return CoherentField{cplx{j.value("amplitude_re", 0.0), j.value("amplitude_im", 0.0)}};
  }
  if (kind == "thermal") {
    detail::reject_unknown(j, {"kind", "mean_n"}, "field");
    const double m = j.value("mean_n", 0.0);
    if (!(m >= 0.0)) throw PreconditionError("config: thermal mean_n must be >= 0");
    return ThermalField{m};
  }
  throw PreconditionError("config: field kind must be fock, coherent or thermal (got '" + kind + "')");
}

inline json options_to_json(const ProtocolOptions& o) {
  json j;
  j["branch"] = o.branch;
  detail::put_opt(j, "phi_override", o.phi_override);
  detail::put_opt(j, "n_max", o.n_max);
  j["excite_control"] = o.excite_control;
  j["control_index"] = o.control;
  j["pt_grid_points"] = o.pt_grid_points;
  j["trajectory_points"] = o.trajectory_points;
  j["mixture"] = o.mixture == MixtureMode::Exact ? "exact" : "sampled";
  j["samples"] = o.samples;
  return j;
}

inline ProtocolOptions options_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"branch", "phi_override", "n_max", "excite_control", "control_index", "pt_grid_points",
                          "trajectory_points", "mixture", "samples"},
                         "protocol");
  ProtocolOptions o;
  o.branch = j.value("branch", 0);
  o.phi_override = detail::opt_get<double>(j, "phi_override");
  o.n_max = detail::opt_get<int>(j, "n_max");
  o.excite_control = j.value("excite_control", true);
  o.control = j.value("control_index", 0);
  o.pt_grid_points = j.value("pt_grid_points", 401);
  o.trajectory_points = j.value("trajectory_points", 400);
  const std::string mix = j.value("mixture", std::string("exact"));
  if (mix != "exact" && mix != "sampled") throw PreconditionError("config: mixture must be exact or sampled");
  o.mixture = mix == "exact" ? MixtureMode::Exact : MixtureMode::Sampled;
  o.samples = j.value("samples", 256);
  if (o.pt_grid_points < 1 || o.trajectory_points < 1) throw PreconditionError("config: grid sizes must be >= 1");
  return o;
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["n_atoms"] = c.n_atoms;
  j["g_over_2pi_hz"] = c.g_over_2pi_hz;
  detail::put_opt(j, "delta_ratio", c.delta_ratio);
  detail::put_opt(j, "omega_a_over_2pi_hz", c.omega_a_over_2pi_hz);
  detail::put_opt(j, "omega_c_over_2pi_hz", c.omega_c_over_2pi_hz);
  j["field"] = field_to_json(c.field);
  j["protocol"] = options_to_json(c.protocol);
  j["allow_invalid"] = c.allow_invalid;
  j["seed"] = c.protocol.seed;
  j["output"] = {{"report", c.report_file}, {"trajectory", c.trajectory_file}};
  if (c.sweep) j["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}};
  j["spectrum"] = {{"block", c.spectrum.block}, {"g_zero", c.spectrum.g_zero}};
  json ev;
  detail::put_opt(ev, "t_end_s", c.evolve.t_end_s);
  ev["points"] = c.evolve.points;
  ev["interaction_picture"] = c.evolve.interaction_picture;
  j["evolve"] = ev;
  return j;
}

inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw PreconditionError("config: top level must be a JSON object");
  detail::reject_unknown(j,
                         {"n_atoms", "g_over_2pi_hz", "delta_ratio", "omega_a_over_2pi_hz", "omega_c_over_2pi_hz", "field",
                          "protocol", "allow_invalid", "seed", "output", "sweep", "spectrum", "evolve"},
                         "config");
  RunConfig c;
  try {
    c.n_atoms = j.at("n_atoms").get<int>();
    c.g_over_2pi_hz = j.at("g_over_2pi_hz").get<double>();
    c.delta_ratio = detail::opt_get<double>(j, "delta_ratio");
    c.omega_a_over_2pi_hz = detail::opt_get<double>(j, "omega_a_over_2pi_hz");
    c.omega_c_over_2pi_hz = detail::opt_get<double>(j, "omega_c_over_2pi_hz");
    if (j.contains("field")) c.field = field_from_json(j.at("field"));
    if (j.contains("protocol")) c.protocol = options_from_json(j.at("protocol"));
    c.allow_invalid = j.value("allow_invalid", false);
    c.protocol.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("output")) {
      detail::reject_unknown(j.at("output"), {"report", "trajectory"}, "output");
      c.report_file = j.at("output").value("report", c.report_file);
      c.trajectory_file = j.at("output").value("trajectory", c.trajectory_file);
    }
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
      const json& s = j.at("sweep");
      detail::reject_unknown(s, {"axis", "values"}, "sweep");
      c.sweep = SweepSpec{s.at("axis").get<std::string>(), s.at("values").get<std::vector<double>>()};
    }
    if (j.contains("spectrum")) {
      detail::reject_unknown(j.at("spectrum"), {"block", "g_zero"}, "spectrum");
      c.spectrum.block = j.at("spectrum").value("block", 1);
      c.spectrum.g_zero = j.at("spectrum").value("g_zero", false);
    }
    if (j.contains("evolve")) {
      const json& e = j.at("evolve");
      detail::reject_unknown(e, {"t_end_s", "points", "interaction_picture"}, "evolve");
      c.evolve.t_end_s = detail::opt_get<double>(e, "t_end_s");
      c.evolve.points = e.value("points", 400);
      c.evolve.interaction_picture = e.value("interaction_picture", false);
    }
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw PreconditionError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------

/// Perturbative summary record.
inline json perturbative_json(const ProtocolReport& r) {
  json j;
  j["delta_e1"] = r.delta_e1;
  j["delta_ei"] = r.delta_ei;
  j["alpha"] = r.alpha;
  j["validity"] = r.validity;
  detail::put_opt(j, "pt_vs_exact_error", r.pt_coefficient_error);
  return j;
}

inline json report_to_json(const ProtocolReport& r) {
  json j;
  j["n_atoms"] = r.n_atoms;
  j["alpha"] = r.alpha;
  j["delta_e1"] = r.delta_e1;
  j["delta_ei"] = r.delta_ei;
  j["t_m"] = r.t_m;
  j["phi"] = r.phi;
  j["branch"] = r.branch;
  j["fidelity_subradiant"] = r.fidelity_subradiant;
  j["dfs_weight"] = r.dfs_weight;
  j["emission_expectation"] = r.emission_expectation;
  j["mean_photons"] = r.mean_photons;
  j["validity"] = r.validity;
  j["validity_class"] = to_string(r.validity_class);
  detail::put_opt(j, "pt_coefficient_error", r.pt_coefficient_error);
  detail::put_opt(j, "pt_entrywise_error", r.pt_entrywise_error);
  j["norm_error"] = r.norm_error;
  j["n_max"] = r.n_max;
  j["basis_dim"] = r.basis_dim;
  j["compiled_blocks"] = r.compiled_blocks;
  j["truncated_weight"] = r.truncated_weight;
  json comps = json::array();
  for (const auto& c : r.components) comps.push_back({{"n", c.n}, {"weight", c.weight}});
  j["components"] = comps;
  return j;
}

inline Validity validity_from_string(const std::string& s) {
  if (s == "ok") return Validity::Ok;
  if (s == "marginal") return Validity::Marginal;
  if (s == "invalid") return Validity::Invalid;
  throw PreconditionError("unknown validity class '" + s + "'");
}

inline ProtocolReport report_from_json(const json& j) {
  ProtocolReport r;
  r.n_atoms = j.at("n_atoms").get<int>();
  r.alpha = j.at("alpha").get<double>();
  r.delta_e1 = j.at("delta_e1").get<double>();
  r.delta_ei = j.at("delta_ei").get<double>();
  r.t_m = j.at("t_m").get<double>();
  r.phi = j.at("phi").get<double>();
  r.branch = j.at("branch").get<int>();
  r.fidelity_subradiant = j.at("fidelity_subradiant").get<double>();
  r.dfs_weight = j.at("dfs_weight").get<double>();
  r.emission_expectation = j.at("emission_expectation").get<double>();
  r.mean_photons = j.at("mean_photons").get<double>();
  r.validity = j.at("validity").get<double>();
  r.validity_class = validity_from_string(j.at("validity_class").get<std::string>());
  r.pt_coefficient_error = detail::opt_get<double>(j, "pt_coefficient_error");
  r.pt_entrywise_error = detail::opt_get<double>(j, "pt_entrywise_error");
  r.norm_error = j.at("norm_error").get<double>();
  r.n_max = j.at("n_max").get<int>();
  r.basis_dim = j.at("basis_dim").get<std::size_t>();
  r.compiled_blocks = j.at("compiled_blocks").get<std::vector<int>>();
  r.truncated_weight = j.at("truncated_weight").get<double>();
  for (const auto& c : j.at("components")) r.components.push_back({c.at("weight").get<double>(), c.at("n").get<int>()});
  return r;
}

/// Full report document: the config that produced it, raw results in rad/s
/// and seconds, and the same headline numbers in Hz and microseconds.
inline json report_document(const RunConfig& c, const ProtocolReport& r) {
  json j;
  j["config"] = config_to_json(c);
  j["results"] = report_to_json(r);
  j["perturbative"] = perturbative_json(r);
  j["display"] = {{"t_m_us", r.t_m * 1e6},
                  {"alpha_over_2pi_hz", r.alpha / kTwoPi},
                  {"delta_e1_over_2pi_hz", r.delta_e1 / kTwoPi},
                  {"delta_ei_over_2pi_hz", r.delta_ei / kTwoPi},
                  {"phi_deg", r.phi * 180.0 / std::numbers::pi}};
  return j;
}

}  // namespace subrad
