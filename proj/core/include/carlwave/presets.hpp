#pragma once

#include <string>

#include "carlwave/grid.hpp"

namespace carlwave {

/// Named closed-form spatial profile. Kinds:
///   zero          0
///   constant      base
///   bump          base + amp (1 - u^2)^3,  u = |x - center| / width (0 outside)
///   sine          base + amp sin(pi xi) [sin(pi zeta)]  (vanishing on the boundary
///                 only when base = 0)
///   offset_cosine base + amp cos(pi xi) [cos(pi zeta)]
/// xi, zeta are coordinates rescaled to [0,1] over the domain.
struct ProfileSpec {
  std::string kind = "zero";
  double amp = 1.0;
  double base = 0.0;
  Point center{0.5, 0.5};
  double width = 0.25;
};

SpatialField make_profile(const Grid& g, const ProfileSpec& spec);

/// Separable excitation R(x,t) = rho(t) with rho(0) = 1. Kinds:
///   one       1
///   cosine    cos(omega t)
///   expdecay  exp(-rate t)
struct ExcitationSpec {
  std::string kind = "one";
  double omega = 1.0;
  double rate = 1.0;
};

SpaceTimeField make_excitation(const Grid& g, const ExcitationSpec& spec);

}  // namespace carlwave
