#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvelab/approx.hpp"

namespace curvelab {

// Angular sector of the extended parameter disc together with its push
// compactum K.  The sector spans angles [t0, t1] between two attached radial
// arcs; K fills [k_r0, rho_out] radially, with an angular safety margin of
// arc length k_w against each radial side, so K meets the outer circle in a
// closed sub-arc away from the arc endpoints.  k_w = 0 is allowed only for a
// full-circle sector, where K degenerates to a slit annulus and the corner
// checks are vacuous.
struct SectorPiece {
  std::size_t slab = 0;  // skeleton index of the governing slab
  double t0 = 0.0;
  double t1 = 0.0;   // t1 > t0; t1 - t0 <= 2 pi
  double k_r0 = 0.0;
  double k_w = 0.0;
};

// One recursion in flight: the current immersion on the extended disc, the
// per-piece frames and push constants, and the C1 drift ledger on the inner
// disc.  States are produced by make_stretch_state and advanced by
// stretch_step; the ledger never exceeds delta.
struct StretchState {
  AnalyticMap y;
  double rho_in = 0.0;
  double rho_out = 0.0;
  TangentNet net;
  ConvexBody d_body;
  ConvexBody dp_body;
  double delta = 0.0;
  std::vector<SectorPiece> pieces;   // processing order
  std::vector<ComplexFrame> frames;  // (w, u) per piece, w = slab normal
  std::vector<Complex> zetas;        // push constants per piece
  int steps_done = 0;
  double ledger = 0.0;   // accumulated C1 drift on the inner disc
  double quantum = 0.0;  // delta / (1 + piece count)
};

// Push constant for the affine line zeta u + span_C(w): the modulus is the
// support radius of the body's u-projection plus margin, and the line is
// verified disjoint from the closed body at >= 10^3 sampled points.  A
// failed verification bumps the modulus once and retries; a second failure
// throws.
Complex choose_zeta(const PointC2& u, const PointC2& w, const ConvexBody& dp_body,
                    double margin);

// Sector pieces for a one-circle partition: piece j spans arc j's angular
// interval; K keeps radial_margin above the inner circle and corner_margin
// (arc length) away from both radial arcs.
std::vector<SectorPiece> carve_pieces(const BoundaryPartition& part, double rho_out,
                                      double radial_margin, double corner_margin);

// Bundles a start state: frames from the slab normals via complex_orthogonal,
// push constants from choose_zeta, drift quantum delta / (1 + pieces).
// initial_drift charges the ledger for the extension that produced y0.
StretchState make_stretch_state(AnalyticMap y0, double rho_in, const TangentNet& net,
                                const ConvexBody& d_body, const ConvexBody& dp_body,
                                double delta, std::vector<SectorPiece> pieces,
                                double zeta_margin = 0.25, double initial_drift = 0.0);

// Worst sampled value of one verified property, with its parameter witness.
// ok means worst < bound when below is set, worst > bound otherwise.
struct PropertyCheck {
  std::string tag;
  bool ok = false;
  double worst = 0.0;
  double bound = 0.0;
  bool below = true;
  int step = 0;  // recursion step of the worst sample (0 = base map)
  Complex where;
  std::string note;
};

// Runs recursion step n (1-based): fits the u-frame component to the
// piecewise target (current component in C1 on the complement compactum, the
// push constant in C0 on K), reassembles the map, and verifies properties
// (1_n)..(6_n) by sampling.  Any violation throws naming the property and
// the worst sample.  When trace is given the checks are appended to it.
StretchState stretch_step(const StretchState& state, int n, int degree,
                          std::vector<PropertyCheck>* trace = nullptr);

struct TrimGrid {
  std::size_t nr = 160;
  std::size_t nt = 640;
};

// Connected component of {gauge_{D'}(Y) < 1} on a polar parameter grid.
struct ParameterRegion {
  double rho = 0.0;  // parameter disc radius
  std::size_t nr = 0;
  std::size_t nt = 0;
  std::vector<std::uint8_t> inside;  // (nr + 1) * nt node flags, radius-major
  bool touches_rim = false;
  double area = 0.0;
  std::size_t node_count = 0;
  std::vector<Complex> frontier;  // component nodes with an excluded neighbor
  std::vector<Complex> boundary;  // bisection-refined preimages of Fr D'

  Complex node(std::size_t ir, std::size_t it) const;
  bool flagged(std::size_t ir, std::size_t it) const;
};

// Flood fill of the component containing the center; every frontier edge is
// bisected until the image meets Fr D' to ~1e-10, so boundary tracks the
// preimage of Fr D'.  Throws when the center image is not inside the body.
ParameterRegion trim_to_component(const AnalyticMap& y, const ConvexBody& dp_body,
                                  const TrimGrid& resolution = {});

// Euler characteristic and edge-connectivity of the region cells whose inner
// radius is at least r_min (r_min = rho_in isolates the added annulus).
struct RegionTopology {
  int euler = 0;
  int components = 0;
  std::size_t cells = 0;
};
RegionTopology region_topology(const ParameterRegion& region, double r_min = 0.0);

struct LemmaReport {
  std::vector<PropertyCheck> checks;  // "1_n".."6_n" then "a".."e"
  int i = 1;
  int j = 0;
  int degree = 0;
  double delta = 0.0;
  double ledger = 0.0;
  std::size_t region_samples = 0;
  bool ok = false;
  std::string to_text() const;  // JSON keyed by the property tags
};

struct LemmaResult {
  ParameterRegion region;
  AnalyticMap y;
  LemmaReport report;
};

// Full deformation run on a disc-domain map: boundary split (phase chosen to
// maximize the slab margin), arc attachment along common tangent directions
// with the projection length rule, polynomial extension, compacta selection,
// the piecewise push recursion, and the trim, followed by the conclusion
// report (a)..(e).  Stage failures propagate with a stage tag.
LemmaResult run_lemma_main(const AnalyticMap& x, const ConvexBody& d_body,
                           const ConvexBody& dp_body, const TangentNet& net,
                           double delta, int degree);

}  // namespace curvelab
