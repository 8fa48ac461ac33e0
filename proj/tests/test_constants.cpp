#include <gtest/gtest.h>

#include "coulomb_hbt/constants.hpp"

using namespace coulomb_hbt;

TEST(Constants, VersionIsRecorded) { EXPECT_EQ(kConstantsVersion, "CODATA-2018/6sf"); }

TEST(Constants, BohrRadiusIsConsistent) {
  const double derived = derived_bohr_radius().in(Unit::nm);
  EXPECT_NEAR(derived, 0.0529177335, 1e-9);
  EXPECT_NEAR(derived / kConstants.a0.canonical(), 1.0, 1e-5);
}

TEST(Constants, RydbergIsConsistent) {
  const double derived = derived_rydberg().in(Unit::eV);
  EXPECT_NEAR(derived, 13.60566, 1e-4);
  EXPECT_NEAR(derived / kConstants.ry.canonical(), 1.0, 1e-5);
}

TEST(Constants, FineStructureVelocity) {
  // e^2 / hbar = alpha c
  const Velocity v = kConstants.e2 / kConstants.hbar;
  EXPECT_NEAR(v.in(Unit::m_per_s) / 2.18768e6, 1.0, 1e-5);
  EXPECT_NEAR(v / kConstants.c, 1.0 / 137.036, 1e-7);
}

TEST(Constants, ElectronMassFromRestEnergy) {
  const Mass m = kConstants.electron_mass();
  const Energy rest = m * kConstants.c * kConstants.c;
  EXPECT_DOUBLE_EQ(rest.in(Unit::eV), 510998.95);
}
