#pragma once

#include <numbers>

namespace sbf::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bohr magneton over Planck constant, mu_B / h = 13.996 244 936 GHz/T
// (CODATA 2018 recommended value). Multiply by 2*pi for mu_B / hbar.
inline constexpr double kBohrMagnetonHzPerTesla = 13.996244936e9;
inline constexpr double kBohrMagnetonRadPerSecondPerTesla = kTwoPi * kBohrMagnetonHzPerTesla;

// 88Sr+ reference data. Sources:
//   tau(5p 2P1/2) = 7.39(7) ns   -- Pinnington et al., fast-ion-beam lifetime
//   tau(4d 2D3/2) = 435(4) ms    -- Mannervik et al. storage-ring lifetime
//   tau(4d 2D5/2) = 390.8 ms     -- Letchumanan et al.
//   p = 0.9453                   -- measured P1/2 -> S1/2 branching fraction used as
//                                   the first-order input for systematic shifts
inline constexpr double kTauP12 = 7.39e-9;
inline constexpr double kTauP12Uncertainty = 0.07e-9;
inline constexpr double kTauD32 = 435e-3;
inline constexpr double kTauD52 = 390.8e-3;
inline constexpr double kBranchingFractionNominal = 0.9453;

// Nominal drive parameters of the acquisition (angular frequencies).
inline constexpr double kRabiBlueNominal = kTwoPi * 8.7e6;
inline constexpr double kRabiRepumpNominal = kTwoPi * 18e6;
inline constexpr double kDetuningBlueNominal = -kTwoPi * 27.5e6;
inline constexpr double kDetuningRepumpNominal = kTwoPi * 80e6;
inline constexpr double kMagneticFieldNominal = 1e-4;  // tesla
inline constexpr double kExtinctionNominalDb = -77.0;

// Detection chain.
inline constexpr double kDetectionEfficiencyNominal = 1.0e-3;
inline constexpr double kDeadTimeNominal = 70e-9;

}  // namespace sbf::constants
