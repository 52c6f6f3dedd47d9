#pragma once

// Physical system definition and conversions between atomic units, SI and
// dimensionless oscillator units (lengths in b_t, energies in hbar*omega).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bosetrap::units {

/// CODATA 2018 constants. Atomic units: hbar = m_e = a_0 = E_h = 1.
namespace codata {
inline constexpr double electron_masses_per_amu = 1822.888486209;
inline constexpr double atomic_time_s = 2.4188843265857e-17;
inline constexpr double bohr_radius_m = 5.29177210903e-11;
inline constexpr double hartree_j = 4.3597447222071e-18;
inline constexpr double hbar_si = 1.054571817e-34;
inline constexpr double hbar_au = 1.0;
}  // namespace codata

/// A trapped species: particle mass and isotropic trap frequency.
/// Immutable once built; every derived quantity is a pure function of
/// (mass, omega).
class PhysicalSystem {
 public:
  /// mass_au in electron masses, omega_au in inverse atomic time units.
  static PhysicalSystem from_atomic_units(double mass_au, double omega_au) {
    if (!(mass_au > 0.0) || !(omega_au > 0.0)) {
      throw std::invalid_argument("PhysicalSystem: mass and omega must be positive");
    }
    return PhysicalSystem(mass_au, omega_au);
  }

  double mass() const { return mass_; }
  double omega() const { return omega_; }
  double hbar() const { return codata::hbar_au; }

  double mass_amu() const { return mass_ / codata::electron_masses_per_amu; }
  double freq_hz() const {
    return omega_ / codata::atomic_time_s / (2.0 * std::numbers::pi);
  }

  /// b_t = sqrt(hbar / (m omega)) in bohr.
  double trap_length() const { return std::sqrt(hbar() / (mass_ * omega_)); }
  /// hbar*omega in hartree.
  double energy_quantum() const { return hbar() * omega_; }

  double trap_length_si() const { return trap_length() * codata::bohr_radius_m; }
  double energy_quantum_si() const { return energy_quantum() * codata::hartree_j; }

 private:
  PhysicalSystem(double mass_au, double omega_au) : mass_(mass_au), omega_(omega_au) {}

  double mass_;
  double omega_;
};

/// Builds the system from laboratory parameters (mass in amu, trap frequency
/// nu in Hz, omega = 2 pi nu).
inline PhysicalSystem make_system(double mass_amu, double freq_hz) {
  if (!(mass_amu > 0.0) || !(freq_hz > 0.0)) {
    throw std::invalid_argument("make_system: mass_amu and freq_hz must be positive");
  }
  const double mass_au = mass_amu * codata::electron_masses_per_amu;
  const double omega_au = 2.0 * std::numbers::pi * freq_hz * codata::atomic_time_s;
  return PhysicalSystem::from_atomic_units(mass_au, omega_au);
}

/// Rb-87 in the 77.87 Hz trap used throughout the reference calculations.
inline PhysicalSystem reference_system() { return make_system(86.909, 77.87); }

enum class Dimension { length, energy };

inline Dimension parse_dimension(std::string_view tag) {
  if (tag == "length") return Dimension::length;
  if (tag == "energy") return Dimension::energy;
  throw std::invalid_argument("unknown dimension tag '" + std::string(tag) + "'");
}

/// A value in atomic units tagged with its dimension.
struct Quantity {
  double value;
  Dimension dimension;
};

inline double to_oscillator(const Quantity& q, const PhysicalSystem& system) {
  switch (q.dimension) {
    case Dimension::length: return q.value / system.trap_length();
    case Dimension::energy: return q.value / system.energy_quantum();
  }
  throw std::invalid_argument("to_oscillator: unknown dimension");
}

inline Quantity from_oscillator(double value, Dimension dimension, const PhysicalSystem& system) {
  switch (dimension) {
    case Dimension::length: return {value * system.trap_length(), dimension};
    case Dimension::energy: return {value * system.energy_quantum(), dimension};
  }
  throw std::invalid_argument("from_oscillator: unknown dimension");
}

inline double length_to_oscillator(double au, const PhysicalSystem& s) {
  return to_oscillator({au, Dimension::length}, s);
}
inline double energy_to_oscillator(double au, const PhysicalSystem& s) {
  return to_oscillator({au, Dimension::energy}, s);
}

}  // namespace bosetrap::units
