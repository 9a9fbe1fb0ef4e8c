#include "carlwave/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace carlwave {

double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::vector<Point> Domain::corners() const {
  if (dim == 1) return {{lo[0], 0.0}, {hi[0], 0.0}};
  return {{lo[0], lo[1]}, {hi[0], lo[1]}, {lo[0], hi[1]}, {hi[0], hi[1]}};
}

Domain make_interval(double a, double b) {
  if (!(a < b)) throw std::invalid_argument("interval endpoints must satisfy a < b");
  Domain d;
  d.dim = 1;
  d.lo = {a, 0.0};
  d.hi = {b, 0.0};
  return d;
}

Domain make_rectangle(double ax, double bx, double ay, double by) {
  if (!(ax < bx) || !(ay < by)) throw std::invalid_argument("rectangle extents must be nonempty");
  Domain d;
  d.dim = 2;
  d.lo = {ax, ay};
  d.hi = {bx, by};
  return d;
}

Point face_normal(const Domain& dom, int face) {
  if (face < 0 || face >= dom.face_count()) throw std::out_of_range("face index");
  switch (face) {
    case kFaceLeft: return {-1.0, 0.0};
    case kFaceRight: return {1.0, 0.0};
    case kFaceBottom: return {0.0, -1.0};
    default: return {0.0, 1.0};
  }
}

std::vector<Point> face_extremes(const Domain& dom, int face) {
  if (face < 0 || face >= dom.face_count()) throw std::out_of_range("face index");
  if (dom.dim == 1) {
    return {face == kFaceLeft ? Point{dom.lo[0], 0.0} : Point{dom.hi[0], 0.0}};
  }
  switch (face) {
    case kFaceLeft: return {{dom.lo[0], dom.lo[1]}, {dom.lo[0], dom.hi[1]}};
    case kFaceRight: return {{dom.hi[0], dom.lo[1]}, {dom.hi[0], dom.hi[1]}};
    case kFaceBottom: return {{dom.lo[0], dom.lo[1]}, {dom.hi[0], dom.lo[1]}};
    default: return {{dom.lo[0], dom.hi[1]}, {dom.hi[0], dom.hi[1]}};
  }
}

std::string face_name(int face) {
  switch (face) {
    case kFaceLeft: return "left";
    case kFaceRight: return "right";
    case kFaceBottom: return "bottom";
    case kFaceTop: return "top";
    default: return "face" + std::to_string(face);
  }
}

namespace {

bool on_face(const Domain& dom, const Point& p, int face, double tol) {
  switch (face) {
    case kFaceLeft: return std::abs(p.x - dom.lo[0]) <= tol;
    case kFaceRight: return std::abs(p.x - dom.hi[0]) <= tol;
    case kFaceBottom: return std::abs(p.y - dom.lo[1]) <= tol;
    case kFaceTop: return std::abs(p.y - dom.hi[1]) <= tol;
    default: return false;
  }
}

}  // namespace

int owning_face(const Domain& dom, const Point& p) {
  const double tol = 1e-12 * std::max({1.0, std::abs(dom.hi[0]), std::abs(dom.hi[1])});
  for (int f = 0; f < dom.face_count(); ++f) {
    if (on_face(dom, p, f, tol)) return f;
  }
  return -1;
}

std::vector<int> gamma0_from_x0(const Domain& dom, const Point& x0) {
  std::vector<int> faces;
  for (int f = 0; f < dom.face_count(); ++f) {
    const Point nu = face_normal(dom, f);
    double best = -1.0;
    for (const Point& p : face_extremes(dom, f)) {
      const double dot = (p.x - x0.x) * nu.x + (p.y - x0.y) * nu.y;
      best = std::max(best, dot);
    }
    if (best >= 0.0) faces.push_back(f);
  }
  return faces;
}

double min_observation_time(const Domain& dom, const Point& x0) {
  double worst = 0.0;
  for (const Point& c : dom.corners()) worst = std::max(worst, distance(c, x0));
  return worst;
}

double distance_to_domain(const Domain& dom, const Point& x0) {
  double d2 = 0.0;
  for (int axis = 0; axis < dom.dim; ++axis) {
    const double v = x0[axis];
    double gap = 0.0;
    if (v < dom.lo[axis]) gap = dom.lo[axis] - v;
    else if (v > dom.hi[axis]) gap = v - dom.hi[axis];
    d2 += gap * gap;
  }
  return std::sqrt(d2);
}

ObservationGeometry make_observation_geometry(const Domain& dom, const Point& x0, double T) {
  ObservationGeometry g;
  g.domain = dom;
  g.x0 = x0;
  g.gamma0 = gamma0_from_x0(dom, x0);
  g.T = T;
  return g;
}

std::string GeometryReport::describe() const {
  std::ostringstream os;
  os << "x0_exterior=" << (x0_exterior ? "yes" : "no") << " (margin " << x0_margin << "), "
     << "gamma0_covers=" << (gamma0_covers ? "yes" : "no") << ", "
     << "time_admissible=" << (time_admissible ? "yes" : "no") << " (margin " << time_margin << ")";
  return os.str();
}

GeometryReport validate_geometry(const ObservationGeometry& geom) {
  GeometryReport r;
  r.x0_margin = distance_to_domain(geom.domain, geom.x0);
  r.x0_exterior = r.x0_margin > 0.0;

  const std::vector<int> required = gamma0_from_x0(geom.domain, geom.x0);
  r.gamma0_covers = std::all_of(required.begin(), required.end(), [&](int f) {
    return std::find(geom.gamma0.begin(), geom.gamma0.end(), f) != geom.gamma0.end();
  });

  r.time_margin = geom.T - min_observation_time(geom.domain, geom.x0);
  r.time_admissible = r.time_margin > 0.0;
  return r;
}

}  // namespace carlwave
