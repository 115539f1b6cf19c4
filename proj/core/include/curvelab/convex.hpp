#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "curvelab/geometry.hpp"

namespace curvelab {

// Quasi-uniform direction set on the unit sphere of R^4 (low-discrepancy
// lattice pushed through the double-polar parameterization).  Deterministic.
std::vector<Vec4> s3_lattice(std::size_t n);

// Smoothly bounded strictly convex body in R^4 ~ C^2.
//
// Supported kinds: round ball, ellipsoid (orthonormal frame + semi-axes),
// smooth level set of a caller-supplied convex function, and parallel
// (offset) bodies of the former.  Parallel bodies keep a handle to their
// base body so metric quantities use the exact normal correspondence.
class ConvexBody {
 public:
  enum class Kind { Ball, Ellipsoid, LevelSet, Offset };

  using ScalarField = std::function<double(const Vec4&)>;
  using GradField = std::function<Vec4(const Vec4&)>;
  using HessField = std::function<Eigen::Matrix4d(const Vec4&)>;

  static ConvexBody ball(const PointC2& center, double radius);
  // Columns of frame are the axis directions (must be orthonormal).
  static ConvexBody ellipsoid(const PointC2& center, const Vec4& semi_axes,
                              const Eigen::Matrix4d& frame = Eigen::Matrix4d::Identity());
  // f < 0 inside, f = 0 on the boundary; grad/hess are analytic evaluators.
  // Strict convexity is checked at boundary samples; failures throw.
  static ConvexBody level_set(ScalarField f, GradField grad, HessField hess,
                              const PointC2& interior_point);

  Kind kind() const { return kind_; }
  PointC2 center() const { return center_; }
  double radius() const;  // balls only

  bool contains(const PointC2& q) const;        // open interior
  double gauge(const PointC2& q) const;         // radial gauge wrt center; 1 on boundary
  PointC2 boundary_point(const Vec4& direction) const;
  PointC2 outward_normal(const PointC2& p_on_boundary) const;
  // Principal curvatures wrt the inner normal (positive for convex), ascending.
  Eigen::Vector3d principal_curvatures(const PointC2& p_on_boundary) const;
  // Supremum of the largest principal curvature over the boundary.
  // Balls are closed form; other kinds use lattice sampling with local
  // refinement; the value is cached.
  double kappa_max() const;
  double signed_boundary_distance(const PointC2& q) const;  // < 0 inside
  PointC2 project_to_boundary(const PointC2& q) const;
  double support(const Vec4& direction) const;
  double diameter() const;

  // Parallel body at oriented distance t; requires t > -1/kappa_max().
  ConvexBody parallel(double t) const;
  // Total offset from the underlying non-offset body (0 unless Kind::Offset).
  double offset_from_base() const { return offset_t_; }
  bool same_offset_family(const ConvexBody& other) const;

  // Structured-text (JSON) serialization; exact decimal round-trip.
  // Level-set bodies cannot be serialized and throw.
  std::string to_text() const;
  static ConvexBody from_text(const std::string& text);

 private:
  ConvexBody() = default;

  const ConvexBody& root_base() const;
  Eigen::Matrix4d defining_hessian(const Vec4& x) const;
  Vec4 defining_gradient(const Vec4& x) const;
  double sampled_kappa_max() const;

  Kind kind_ = Kind::Ball;
  PointC2 center_;
  double radius_ = 1.0;                  // ball
  Vec4 semi_axes_ = Vec4::Ones();        // ellipsoid
  Eigen::Matrix4d frame_ = Eigen::Matrix4d::Identity();
  ScalarField f_;                        // level set
  GradField grad_;
  HessField hess_;
  std::shared_ptr<const ConvexBody> base_;  // offset
  double offset_t_ = 0.0;
  mutable std::optional<double> kappa_cache_;
};

// dist(D-bar, Fr Dp) for strictly nested bodies D inside Dp.
// Sampled minimization over Fr Dp with local refinement; closed form for
// ball pairs and common-base offset families.
double dist_pair(const ConvexBody& inner, const ConvexBody& outer);

struct PairMetrics {
  double dist = 0.0;   // dist(D-bar, Fr Dp)
  double kappa = 0.0;  // kappa_max of the inner body
  double dee = 0.0;    // (dist + 1/kappa) sqrt(dist / (dist + 2/kappa))
};

// The comparison quantity d(D, Fr Dp); always larger than dist itself.
PairMetrics dee(const ConvexBody& inner, const ConvexBody& outer);

// Symmetric Hausdorff distance between finite samples.
double hausdorff(const std::vector<PointC2>& a, const std::vector<PointC2>& b);

// Interpolated chain C^0 = inner, ..., C^m strictly inside outer, built from
// harmonic-sum offsets; the per-step dee values sum to at least 1.
struct RefineChain {
  std::vector<ConvexBody> chain;     // size m + 1, chain[0] == inner
  std::vector<double> offsets;       // offsets of chain[a] from inner, a >= 1
  std::vector<PairMetrics> steps;    // consecutive pair metrics, size m
  int m = 0;
  double threshold = 0.0;            // harmonic-sum target for m
  double dee_sum = 0.0;
};

RefineChain refine_pair(const ConvexBody& inner, const ConvexBody& outer);

// Exhaustion with interleaved refine_pair chains and running dee budget.
struct DProperSequence {
  std::vector<ConvexBody> bodies;    // refined, strictly nested
  std::vector<PairMetrics> steps;    // metrics for consecutive bodies
  std::vector<double> partial_sums;  // running dee totals per step
  double total = 0.0;
  double target = 0.0;
  bool reached = false;
  std::size_t pairs_used = 0;        // consumed input pairs
};

DProperSequence d_proper_sequence(const std::vector<ConvexBody>& exhaustion,
                                  double target);

}  // namespace curvelab
