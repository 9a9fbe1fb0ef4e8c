#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace carlwave {

/// Point in R^n with n <= 2. The second component is ignored in 1D.
struct Point {
  double x = 0.0;
  double y = 0.0;

  double operator[](int axis) const { return axis == 0 ? x : y; }
  double& operator[](int axis) { return axis == 0 ? x : y; }
};

double distance(const Point& a, const Point& b);

/// Axis-aligned interval (1D) or rectangle (2D).
struct Domain {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  int face_count() const { return 2 * dim; }
  std::vector<Point> corners() const;
};

Domain make_interval(double a, double b);
Domain make_rectangle(double ax, double bx, double ay, double by);

/// Boundary faces of a box, indexed left, right, bottom, top.
/// In 1D only left (x = lo) and right (x = hi) exist.
enum Face : int { kFaceLeft = 0, kFaceRight = 1, kFaceBottom = 2, kFaceTop = 3 };

/// Outward unit normal of a face.
Point face_normal(const Domain& dom, int face);

/// Endpoints of a face: a single point in 1D, the two segment ends in 2D.
std::vector<Point> face_extremes(const Domain& dom, int face);

/// Name used in reports and CSV columns ("left", "right", "bottom", "top").
std::string face_name(int face);

/// A corner shared by two faces is owned by the lower-indexed one.
/// Returns the owning face of a boundary point (2D) or boundary end (1D).
int owning_face(const Domain& dom, const Point& p);

/// Faces whose outward normal satisfies (x - x0) . nu >= 0 somewhere on the
/// face. On axis-aligned boxes the product is constant along each face, so
/// faces are kept or dropped whole; the sign is evaluated at the extremes.
std::vector<int> gamma0_from_x0(const Domain& dom, const Point& x0);

/// sup over the closure of |x - x0|: any admissible observation time must
/// exceed this value.
double min_observation_time(const Domain& dom, const Point& x0);

/// Distance from x0 to the closure of the domain (0 if inside).
double distance_to_domain(const Domain& dom, const Point& x0);

/// Observation setup: domain, exterior focusing point, observed boundary
/// faces, and the time horizon on which the flux is recorded.
struct ObservationGeometry {
  Domain domain;
  Point x0;
  std::vector<int> gamma0;
  double T = 0.0;
};

/// Builds the geometry with gamma0 derived from x0.
ObservationGeometry make_observation_geometry(const Domain& dom, const Point& x0, double T);

struct GeometryReport {
  bool x0_exterior = false;
  double x0_margin = 0.0;      // dist(x0, closure)
  bool gamma0_covers = false;  // gamma0 contains every face with (x-x0).nu >= 0
  bool time_admissible = false;
  double time_margin = 0.0;    // T - sup |x - x0|
  bool ok() const { return x0_exterior && gamma0_covers && time_admissible; }
  std::string describe() const;
};

/// Checks the support conditions the estimates rely on: x0 strictly outside
/// the closure, gamma0 covering the outflow faces, T beyond the sup distance.
GeometryReport validate_geometry(const ObservationGeometry& geom);

}  // namespace carlwave
