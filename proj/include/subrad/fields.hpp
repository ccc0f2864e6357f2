#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "subrad/error.hpp"
#include "subrad/hilbert.hpp"

namespace subrad {

inline constexpr double kFieldTailTolerance = 1e-8;

struct FockField {
  int n = 0;
  friend bool operator==(const FockField&, const FockField&) = default;
};
struct CoherentField {
  cplx amplitude{};
  friend bool operator==(const CoherentField&, const CoherentField&) = default;
};
struct ThermalField {
  double mean_n = 0.0;
  friend bool operator==(const ThermalField&, const ThermalField&) = default;
};

using FieldSpec = std::variant<FockField, CoherentField, ThermalField>;

inline std::string field_kind(const FieldSpec& f) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, FockField>) return "fock";
        else if constexpr (std::is_same_v<T, CoherentField>) return "coherent";
        else return "thermal";
      },
      f);
}

inline double mean_photon_number(const FieldSpec& f) {
  return std::visit(
      [](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, FockField>) return x.n;
        else if constexpr (std::is_same_v<T, CoherentField>) return std::norm(x.amplitude);
        else return x.mean_n;
      },
      f);
}

inline Eigen::VectorXcd fock(int n, int n_max) {
  if (n < 0 || n > n_max)
    throw PreconditionError("fock: n = " + std::to_string(n) + " outside truncation [0, " + std::to_string(n_max) + "]");
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n_max + 1);
  c(n) = 1.0;
  return c;
}

/// Smallest n_max whose dropped tail is below tolerance both in weight and
/// in its contribution to <n> (which equals <n> times the weight beyond n_max - 1).
inline int coherent_required_n_max(cplx amplitude, double tail = kFieldTailTolerance) {
  const double mean = std::norm(amplitude);
  double p = std::exp(-mean);
  double acc = p;
  double prev = 0.0;
  int n = 0;
  while ((1.0 - acc > tail || mean * (1.0 - prev) > tail) && n < 100000) {
    ++n;
    p *= mean / n;
    prev = acc;
    acc += p;
  }
  return n;
}

/// c_n = e^{-|a|^2/2} a^n / sqrt(n!), renormalized after truncation.
inline Eigen::VectorXcd coherent(cplx amplitude, int n_max) {
  if (n_max < 0) throw PreconditionError("coherent: n_max must be >= 0");
  Eigen::VectorXcd c(n_max + 1);
  c(0) = std::exp(-0.5 * std::norm(amplitude));
  for (int n = 1; n <= n_max; ++n) c(n) = c(n - 1) * amplitude / std::sqrt(static_cast<double>(n));
  const double kept = c.squaredNorm();
  if (1.0 - kept > kFieldTailTolerance)
    throw TruncationError("coherent: truncation tail " + std::to_string(1.0 - kept) + " exceeds 1e-8; use n_max >= " +
                          std::to_string(coherent_required_n_max(amplitude)));
  return c / std::sqrt(kept);
}

struct FockWeight {
  double weight = 0.0;
  int n = 0;
  friend bool operator==(const FockWeight&, const FockWeight&) = default;
};

/// Bose-Einstein occupation p_n = m^n / (1+m)^{n+1}, cut where the remaining
/// tail drops below tolerance and renormalized.
inline std::vector<FockWeight> thermal(double mean_n, double tail = kFieldTailTolerance) {
  if (!(mean_n >= 0.0)) throw PreconditionError("thermal: mean photon number must be >= 0");
  if (mean_n == 0.0) return {{1.0, 0}};
  const double q = mean_n / (1.0 + mean_n);
  std::vector<FockWeight> out;
  double p = 1.0 / (1.0 + mean_n);
  double remaining = 1.0;  // P(n >= current)
  for (int n = 0; remaining > tail; ++n) {
    out.push_back({p, n});
    remaining = std::pow(q, n + 1);
    p *= q;
  }
  double total = 0.0;
  for (const auto& w : out) total += w.weight;
  for (auto& w : out) w.weight /= total;
  return out;
}

/// Fock truncation for a pure field on N atoms: n_init + N + ceil(6 sqrt(<n>) + 4).
inline int auto_n_max(int n_init, double mean_n, int n_atoms) {
  return n_init + n_atoms + static_cast<int>(std::ceil(6.0 * std::sqrt(std::max(0.0, mean_n)) + 4.0));
}

inline int auto_n_max(const FieldSpec& f, int n_atoms) {
  const double mean = mean_photon_number(f);
  if (const auto* fk = std::get_if<FockField>(&f)) return auto_n_max(fk->n, mean, n_atoms);
  return auto_n_max(static_cast<int>(std::ceil(mean)), mean, n_atoms);
}

/// Amplitudes of a pure field over 0..n_max. Thermal fields are mixtures and
/// have no amplitude vector.
inline Eigen::VectorXcd field_amplitudes(const FieldSpec& f, int n_max) {
  if (const auto* fk = std::get_if<FockField>(&f)) return fock(fk->n, n_max);
  if (const auto* co = std::get_if<CoherentField>(&f)) return coherent(co->amplitude, n_max);
  throw PreconditionError("thermal fields are Fock mixtures, not pure states");
}

inline double mean_photon_number(const Eigen::VectorXcd& c) {
  double m = 0.0;
  for (Eigen::Index n = 0; n < c.size(); ++n) m += static_cast<double>(n) * std::norm(c(n));
  return m;
}

}  // namespace subrad
