#pragma once

#include <cmath>
#include <string_view>

#include "coulomb_hbt/units.hpp"

namespace coulomb_hbt {

/// CODATA 2018 values rounded to six significant figures.
struct PhysicalConstants {
  EnergyLength e2;  // Coulomb constant e^2
  EnergyTime hbar;
  Energy mc2;  // electron rest energy
  Velocity c;
  Length a0;  // Bohr radius
  Energy ry;  // Rydberg energy

  /// Electron mass as mc^2 / c^2, in eV*ns^2/nm^2.
  Mass electron_mass() const { return mc2 / (c * c); }
};

inline constexpr std::string_view kConstantsVersion = "CODATA-2018/6sf";

inline constexpr PhysicalConstants kConstants{
    EnergyLength::from_canonical(1.43996),     // eV*nm
    EnergyTime::from_canonical(6.58212e-7),    // eV*ns (6.58212e-16 eV*s)
    Energy::from_canonical(510998.95),         // eV
    Velocity::from_canonical(2.99792e8),       // nm/ns (2.99792e10 cm/s)
    Length::from_canonical(0.0529177),         // nm
    Energy::from_canonical(13.6057),           // eV
};

/// Bohr radius recomputed as hbar^2 c^2 / (mc^2 e^2).
inline Length derived_bohr_radius(const PhysicalConstants& k = kConstants) {
  const auto hbar_c = k.hbar * k.c;
  return hbar_c * hbar_c / (k.mc2 * k.e2);
}

/// Rydberg recomputed as e^2 / (2 a0).
inline Energy derived_rydberg(const PhysicalConstants& k = kConstants) {
  return k.e2 / (2.0 * k.a0);
}

}  // namespace coulomb_hbt
