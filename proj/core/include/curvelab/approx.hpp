#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "curvelab/curve.hpp"

namespace curvelab {

// Polynomial held in an orthonormal-basis recurrence (constant first basis
// value, Hessenberg columns, solution coefficients).  Evaluation replays the
// recurrence, which stays stable on geometries where a monomial expansion
// overflows; monomial export is provided for single-disc geometries where the
// conversion is benign.
class Polynomial1 {
 public:
  Polynomial1() = default;
  Polynomial1(double q0, std::vector<std::vector<Complex>> h, std::vector<Complex> c);

  int degree() const { return int(c_.size()) - 1; }
  Complex value(Complex z) const;
  Complex derivative(Complex z) const;
  std::vector<Complex> monomial_coefficients() const;

 private:
  double q0_ = 1.0;
  std::vector<std::vector<Complex>> h_;  // h_[k] holds entries 0..k+1 of column k
  std::vector<Complex> c_;
};

struct CompactSet {
  std::vector<Complex> boundary;  // closed polyline, at least 16 samples
  bool filled = true;             // set includes the enclosed region
};

struct CompactaSpec {
  std::vector<CompactSet> sets;
  // The union must leave the complement connected for polynomial
  // approximation to make sense; the caller asserts it with this flag.
  bool connected_complement = false;
};

// Minimum distance between distinct sets (0 when boundaries cross or one
// set sits inside another filled set).
double min_pairwise_distance(const CompactaSpec& spec);

struct SetTarget {
  std::function<Complex(Complex)> value;
  std::function<Complex(Complex)> derivative;  // required when c1 is set
  bool c1 = false;  // fit penalizes derivative residuals on this set
};

SetTarget constant_target(Complex c, bool c1 = false);
// component is 1 or 2.
SetTarget map_component_target(const AnalyticMap& map, int component, bool c1);

struct FitReport {
  struct PerSet {
    double c0 = 0.0;
    double c1 = 0.0;  // 0 when the target carries no derivative
  };
  std::vector<PerSet> per_set;  // sup errors over samples and midpoints
  int degree = 0;
  double condition_estimate = 0.0;
  double residual = 0.0;  // weighted least-squares residual
  std::string to_text() const;
};

// Weighted least-squares polynomial fit over all sets at once; C1 sets
// contribute value and derivative rows.  Boundary sampling suffices for
// interior control on filled sets by the maximum principle.  Success is not
// guaranteed: callers compare the reported errors against their budgets.
std::pair<Polynomial1, FitReport> runge_fit(const CompactaSpec& spec,
                                            const std::vector<SetTarget>& targets,
                                            int degree);

// Radial parameter segment [rho, rho_out] e^{i angle} with image targets.
struct AttachedArc {
  double angle = 0.0;
  std::function<PointC2(double)> target;  // radial position -> image point
};

struct ExtendReport {
  double c1_inner = 0.0;        // C1 error against X on the inner disc
  std::vector<double> c0_arcs;  // sup image error along each arc
  int degree = 0;
  double condition_estimate = 0.0;
  bool within_budget = false;  // c1_inner < budget
  std::string to_text() const;
};

// Re-expands X to a polynomial map on the disc of radius rho_out that stays
// within budget of X in C1 on the inner disc while tracking the arc targets
// in C0.  The fitting degree escalates (16, 32, 64, 96) until the budget is
// met with headroom or the ladder is exhausted; exceedance is reported, not
// thrown.  max_degree caps the ladder for decay studies.
std::pair<AnalyticMap, ExtendReport> mergelyan_extend(const AnalyticMap& x,
                                                      const std::vector<AttachedArc>& arcs,
                                                      double rho_out, double budget,
                                                      int max_degree = 96);

// Seeded uniform perturbation of every coefficient, for breaking
// degeneracies detected downstream; re-validates the immersion property.
AnalyticMap nudge_coefficients(const AnalyticMap& map, double magnitude,
                               std::uint64_t seed);

}  // namespace curvelab
