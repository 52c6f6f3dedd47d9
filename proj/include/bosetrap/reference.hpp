#pragma once

// Published reference values for N bosons of mass 86.909 amu in a 77.87 Hz
// trap, with the tolerances the comparison reports and acceptance suite use.
// Energies in hbar omega, lengths in au.

#include <array>

namespace bosetrap::reference {

inline constexpr double trap_length_au = 23095.0;
inline constexpr double gaussian_range_au = 11.65;
inline constexpr double scattering_length_au = 100.0;

struct Table1Row {
  int n;
  double gp;
  double hard_sphere;
  double zero_range;
  double attractive;
};

/// Energies at a = 100 au. The GP and hard-sphere columns are external
/// numbers kept for the report only.
inline constexpr std::array<Table1Row, 4> table1{{
    {3, 4.51032, 4.51036, 4.5103, 4.510},
    {5, 7.53432, 7.53443, 7.5342, 7.534},
    {10, 15.1534, 15.1537, 15.1533, 15.154},
    {20, 30.638, 30.640, 30.6394, 30.640},
}};

struct Table2Row {
  double v0_au;
  double a_au;
  double e_pair;
  double e_full;
};

/// N = 4, Gaussian range 11.65 au.
inline constexpr std::array<Table2Row, 9> table2{{
    {-1.400e-7, 119.4, 6.025, 6.025},
    {-1.300e-7, 327.0, 6.067, 6.067},
    {-1.290e-7, 402.4, 6.083, 6.083},
    {-1.280e-7, 525.4, 6.108, 6.108},
    {-1.270e-7, 761.0, 6.155, 6.156},
    {-1.260e-7, 1400.0, 6.282, 6.283},
    {-1.255e-7, 2430.0, 6.478, 6.481},
    {-1.252e-7, 4370.0, 6.818, 6.848},
    {-1.251e-7, 5962.0, 7.059, 7.112},
}};

namespace tolerance {
inline constexpr double scattering_length_rel = 5e-3;
inline constexpr double zero_range_abs = 2e-3;
inline constexpr double attractive_abs = 5e-3;
inline constexpr double table2_rel = 1e-2;
inline constexpr double ideal_gas_abs = 1e-8;
inline constexpr double condensate_ideal_abs = 1e-9;
inline constexpr double perturbative_shift_rel = 2e-2;
}  // namespace tolerance

}  // namespace bosetrap::reference
