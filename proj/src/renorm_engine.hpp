#pragma once

#include "prethermal/renorm.hpp"

#include <functional>

namespace prethermal::detail {

/// Strategy bundle shared by the U(1) and Z_n iterations.
struct EngineConfig {
  GraphPtr graph;
  const ChargeOperator* zone_charge = nullptr; ///< strong-support zones for norm bookkeeping
  int num_angles = 1;
  int slow_component = 0;
  double omega = 0.0;
  double big = 0.0; ///< ν or ν/n
  double nu0 = 0.0;
  RenormSchedule schedule;
  RenormOptions opt;
  std::array<int, 2> grid{64, 1};
  std::function<std::pair<ModeFamily, ModeFamily>(const ModeFamily&)> split;
  std::function<ModeFamily(const ModeFamily&)> solve;
  std::function<std::pair<ColoredPotential, ColoredPotential>(const ColoredPotential&)> split_pot;
  std::function<ColoredPotential(const ColoredPotential&)> solve_pot;
  /// Fills diag_residual (and quasi certificates) for a level sampled on `sizes`.
  std::function<void(RenormStep&, std::array<int, 2> sizes)> certify;
};

EffectiveDecomposition run_engine(const EngineConfig& cfg, const ModeFamily& H, const ColoredPotential& H_pot);

/// Hermitian part in mode language: M_n ← (M_n + M_{−n}†)/2.
void hermitize(ModeFamily& f);

} // namespace prethermal::detail
