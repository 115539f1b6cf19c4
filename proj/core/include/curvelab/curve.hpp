#pragma once

#include <string>
#include <vector>

#include "curvelab/convex.hpp"
#include "curvelab/net.hpp"

namespace curvelab {

// Holomorphic map X = (X1, X2) from a disc or annulus into C^2, stored as
// power (disc) or Laurent (annulus) coefficients.  Construction verifies the
// immersion property on a sample grid and records the minimum of |X'|.
class AnalyticMap {
 public:
  enum class Domain { Disc, Annulus };

  // Coefficients are ascending powers starting at exponent low (0 for discs).
  static AnalyticMap disc_map(double rho, std::vector<Complex> c1,
                              std::vector<Complex> c2);
  static AnalyticMap annulus_map(double r_inner, double r_outer,
                                 std::vector<Complex> c1, std::vector<Complex> c2,
                                 int low1 = 0, int low2 = 0);

  Domain domain() const { return domain_; }
  double disc_radius() const;
  double inner_radius() const;
  double outer_radius() const;
  bool in_domain(Complex z, double tol = 1e-12) const;

  PointC2 value(Complex z) const;
  PointC2 derivative(Complex z) const;

  double min_immersion() const { return min_immersion_; }

  std::size_t boundary_circle_count() const { return domain_ == Domain::Disc ? 1 : 2; }
  double boundary_circle_radius(std::size_t i) const;  // outer first

  const std::vector<Complex>& coef1() const { return coef_[0]; }
  const std::vector<Complex>& coef2() const { return coef_[1]; }
  int low1() const { return low_[0]; }
  int low2() const { return low_[1]; }

  std::string to_text() const;
  static AnalyticMap from_text(const std::string& text);

 private:
  AnalyticMap() = default;
  void finish_construction();

  Domain domain_ = Domain::Disc;
  double rho_ = 1.0;  // disc radius, or annulus outer radius
  double r_ = 0.0;    // annulus inner radius
  std::vector<Complex> coef_[2];
  int low_[2] = {0, 0};
  double min_immersion_ = 0.0;
};

// CSV rows (param_re, param_im, re1, im1, re2, im2) for external plotting.
std::string curve_csv(const AnalyticMap& map, const std::vector<Complex>& params);

// max over the samples of max(|f-g|, |f'-g'|); the maps must share a domain.
double c1_distance(const AnalyticMap& f, const AnalyticMap& g,
                   const std::vector<Complex>& samples);

// Euclidean length of the image of a parameter polyline, by adaptive
// Simpson quadrature of |X'| along each segment.
double image_length(const AnalyticMap& map, const std::vector<Complex>& path);

struct DoublePoint {
  PointC2 w;          // shared image point
  Complex p, q;       // distinct preimages, lexicographically ordered
  bool normal_crossing = false;
};

// All parameter pairs identified by the map within tol, located by coarse
// grid pairing and damped Newton refinement; classified by complex-linear
// independence of the two derivative directions.  Non-generic coincidence
// sets (overlapping branches) throw.
std::vector<DoublePoint> double_points(const AnalyticMap& map, double tol = 1e-6);

struct ImagePathResult {
  double value = 0.0;
  bool reachable = false;
  std::vector<Complex> params;  // graph path in parameter space
};

// Shortest image path between parameter sets on a grid graph with pullback
// edge weights; pairs in glue contribute zero-length identification edges.
// The value upper-bounds the true image distance and converges as the grid
// spacing shrinks.
ImagePathResult image_distance_sets(const AnalyticMap& map,
                                    const std::vector<Complex>& sources,
                                    const std::vector<Complex>& sinks,
                                    double spacing,
                                    const std::vector<DoublePoint>& glue);

// Point-to-point version; computes the gluing pairs itself.
double image_distance(const AnalyticMap& map, Complex p, Complex q, double spacing);

// True when the image tangent plane leaves Fr D at every boundary sample:
// |<<X', nu>>| / |X'| >= angle_tol.  The boundary image must sit on Fr D
// within boundary_tol.
bool transversal_boundary(const AnalyticMap& map, const ConvexBody& d_body,
                          double boundary_tol = 1e-6, double angle_tol = 1e-4);

struct BoundaryArcInterval {
  double t0 = 0.0, t1 = 0.0;  // angle interval on the parameter circle
  Complex q0, q1;             // junction parameters (circle points)
  std::size_t slab = 0;       // assigned skeleton index
};

struct CirclePartition {
  double radius = 1.0;  // parameter-circle radius
  std::vector<BoundaryArcInterval> arcs;
};

struct BoundaryPartition {
  std::vector<CirclePartition> circles;
  int j = 0;  // arcs per circle
};

struct PartitionCheck {
  bool ok = false;
  std::string detail;
};

// Invariants: arcs cover each circle, consecutive arcs share exactly one
// junction, non-consecutive arcs are disjoint, and each image arc lies in
// its assigned slab intersected with the delta-neighborhood of D.
PartitionCheck validate_partition(const BoundaryPartition& part, const AnalyticMap& map,
                                  const TangentNet& net, const ConvexBody& d_body,
                                  double delta);

// Splits each boundary circle into J >= 3 equal arcs, doubling J until every
// image arc fits inside a single slab; arcs start at angle phase0.  Requires
// the boundary image to lie in the slab union intersected with the
// delta-neighborhood of D.
BoundaryPartition split_boundary(const AnalyticMap& map, const TangentNet& net,
                                 const ConvexBody& d_body, double delta,
                                 double phase0 = 0.0);

}  // namespace curvelab
