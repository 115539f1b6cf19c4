#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "curvelab/convex.hpp"

namespace curvelab {

// Thickened tangent hyperplane of a convex body.
struct Slab {
  PointC2 base;    // tangency point on Fr D
  PointC2 normal;  // outward unit normal at the base
  double radius;   // half-thickness

  double coordinate(const PointC2& q) const { return dot(q - base, normal); }
  bool contains(const PointC2& q) const { return std::abs(coordinate(q)) < radius; }
};

// Sampled arc on the boundary of a body, with an arclength table.
struct BoundaryArc {
  std::vector<PointC2> samples;
  std::vector<double> cumlen;  // cumlen[i] = polyline length up to samples[i]
  bool closed = false;

  static BoundaryArc make(std::vector<PointC2> samples, bool closed);
  double length() const;
  // Point at arclength s (wrapping for closed arcs), by linear interpolation.
  PointC2 at_arclength(double s) const;
};

struct BoundaryArcSet {
  std::vector<BoundaryArc> arcs;

  double big_l() const;  // 1 + max arc length
  std::size_t mu() const { return arcs.size(); }
};

// Arc of the curve t -> boundary point in direction cos(t) u + sin(t) v.
BoundaryArc boundary_circle_arc(const ConvexBody& body, const Vec4& u, const Vec4& v,
                                double t0, double t1, std::size_t n, bool closed);

// Finite family of tangent slabs of equal radius.
struct TangentNet {
  std::vector<PointC2> skeleton;
  std::vector<PointC2> normals;
  double radius = 0.0;

  // Construction metadata, present when the net came from build_net.
  bool from_build = false;
  int m = 0;           // points per arc
  std::size_t mu = 0;  // number of arcs
  double eps_m = 0.0;  // sagitta value used as radius
  double big_l = 0.0;

  std::size_t size() const { return skeleton.size(); }
  Slab slab(std::size_t i) const { return {skeleton[i], normals[i], radius}; }

  std::string to_text() const;
  static TangentNet from_text(const std::string& text);
};

// Distance from q to the nearest slab hyperplane: min_i |<q - p_i, nu_i>|.
double net_distance(const TangentNet& net, const PointC2& q);
bool net_contains(const TangentNet& net, const PointC2& q);

// Builds the tangent net over the arc skeleton: scans for the smallest m with
// max{eps_m, 4 (m mu + 1) eps_m / sqrt((d0 k0 + 1)^2 - 1)} < eps, where
// eps_m = (1/k0)(1 - cos(L k0 / m)) is the sagitta of the geodesic L/m-ball on
// the rolling sphere (the scan stays in the regime L k0 / m <= pi/2 where the
// sagitta formula is meaningful).  Skeleton points split each arc into m
// pieces of equal length and are reprojected onto Fr D.
TangentNet build_net(const BoundaryArcSet& arcs, const ConvexBody& d_body,
                     const ConvexBody& dp_body, double eps);

struct CoverReport {
  bool covered = false;
  std::size_t worst_arc = 0;
  std::size_t worst_sample = 0;
  double worst_margin = 0.0;  // min over samples of (radius - |slab coordinate|)
};

// Checks that every arc sample lies in a slab whose base is within the
// guaranteed intrinsic distance (big_l / m along the arc for built nets).
CoverReport covers(const TangentNet& net, const BoundaryArcSet& arcs,
                   const ConvexBody& d_body);

// Pairwise generic position: no two skeleton normals are complex-collinear.
bool generic_position_ok(const TangentNet& net, double tol = 1e-9);

// Returns a repaired copy, nudging offending points along Fr D with an
// escalating deterministic step.  Throws after the retry budget.
TangentNet generic_position(const TangentNet& net, const ConvexBody& d_body,
                            double tol = 1e-9, int budget = 48);

// Unit direction in T_{p1} cap T_{p2} with both Hermitian pairings
// <<v, nu_k>> nonzero (maximized min modulus).  For coincident normals the
// canonical choice J(nu) is returned.  Complex-collinear distinct normals
// throw (excluded by generic position).
PointC2 common_tangent_direction(const ConvexBody& d_body, const PointC2& p1,
                                 const PointC2& p2);

struct GridSpec {
  double slab_spacing = 0.25;
  double seam_spacing = 0.25;
  std::size_t max_nodes = 200000;
};

struct OracleRow {
  std::size_t source = 0;
  std::size_t sink = 0;
  double length = 0.0;
};

struct PathOracleResult {
  double min_length = std::numeric_limits<double>::infinity();
  double slack = 0.0;  // max graph edge length along the minimizing path
  bool reachable = false;
  std::vector<PointC2> path;  // straightened polyline realizing min_length
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::vector<OracleRow> rows;  // best (source, length) per reached sink
  std::vector<PointC2> sources;
  std::vector<PointC2> sinks;
};

// Graph oracle for paths inside the net between Fr D and Fr Dp: samples the
// slab hyperplanes, the pairwise seam planes, boundary caps (sources) and
// outer slices (sinks); connects near neighbors that share a slab; runs
// Dijkstra and straightens the best path inside the net.
PathOracleResult min_path_length(const TangentNet& net, const ConvexBody& d_body,
                                 const ConvexBody& dp_body, const GridSpec& grid);

// Certified bound dee(D, Dp) - 4 (m mu + 1) eps_m / sqrt((d0 k0 + 1)^2 - 1);
// requires build_net metadata.
double analytic_lower_bound(const TangentNet& net, const ConvexBody& d_body,
                            const ConvexBody& dp_body);

// f(t) = (t^2 k - t) / sqrt(t^2 k^2 - 1): increasing for t > 1/k, with
// f(d + 1/k) equal to the dee comparison quantity.
double dee_growth(double t, double kappa0);

}  // namespace curvelab
