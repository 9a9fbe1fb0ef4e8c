#include "carlwave/presets.hpp"

#include <algorithm>
#include <cmath>

#include "carlwave/errors.hpp"
#include "carlwave/geometry.hpp"

namespace carlwave {

SpatialField make_profile(const Grid& g, const ProfileSpec& spec) {
  const double a0 = g.domain.lo[0], b0 = g.domain.hi[0];
  const double a1 = g.domain.lo[1], b1 = g.domain.hi[1];
  const bool two_d = g.domain.dim == 2;

  if (spec.kind == "zero") {
    return SpatialField::zeros(g);
  }
  if (spec.kind == "constant") {
    return SpatialField::sample(g, [&](Point) { return spec.base; });
  }
  if (spec.kind == "bump") {
    if (spec.width <= 0.0) throw ConfigError("bump profile needs width > 0");
    return SpatialField::sample(g, [&](Point x) {
      const double dx = x.x - spec.center.x;
      const double dy = two_d ? x.y - spec.center.y : 0.0;
      const double u = std::sqrt(dx * dx + dy * dy) / spec.width;
      if (u >= 1.0) return spec.base;
      const double c = 1.0 - u * u;
      return spec.base + spec.amp * c * c * c;
    });
  }
  if (spec.kind == "sine") {
    return SpatialField::sample(g, [&](Point x) {
      double v = spec.amp * std::sin(M_PI * (x.x - a0) / (b0 - a0));
      if (two_d) v *= std::sin(M_PI * (x.y - a1) / (b1 - a1));
      return spec.base + v;
    });
  }
  if (spec.kind == "offset_cosine") {
    return SpatialField::sample(g, [&](Point x) {
      double v = spec.amp * std::cos(M_PI * (x.x - a0) / (b0 - a0));
      if (two_d) v *= std::cos(M_PI * (x.y - a1) / (b1 - a1));
      return spec.base + v;
    });
  }
  throw ConfigError("unknown spatial profile kind '" + spec.kind + "'");
}

SpaceTimeField make_excitation(const Grid& g, const ExcitationSpec& spec) {
  if (spec.kind == "one") {
    return SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double) { return 1.0; });
  }
  if (spec.kind == "cosine") {
    return SpaceTimeField::sample(g, TimeSpan::ZeroToT,
                                  [&](Point, double t) { return std::cos(spec.omega * t); });
  }
  if (spec.kind == "expdecay") {
    return SpaceTimeField::sample(g, TimeSpan::ZeroToT,
                                  [&](Point, double t) { return std::exp(-spec.rate * t); });
  }
  throw ConfigError("unknown excitation kind '" + spec.kind + "'");
}

}  // namespace carlwave
