#pragma once

#include <complex>
#include <Eigen/Dense>

namespace curvelab {

using Complex = std::complex<double>;
using Vec4 = Eigen::Vector4d;

// Point of C^2, identified with R^4 as (Re z1, Im z1, Re z2, Im z2).
struct PointC2 {
  Complex z1{0.0, 0.0};
  Complex z2{0.0, 0.0};

  PointC2() = default;
  PointC2(Complex a, Complex b) : z1(a), z2(b) {}
  PointC2(double x1, double y1, double x2, double y2) : z1(x1, y1), z2(x2, y2) {}

  static PointC2 from_vec4(const Vec4& v) { return {{v[0], v[1]}, {v[2], v[3]}}; }
  Vec4 to_vec4() const { return {z1.real(), z1.imag(), z2.real(), z2.imag()}; }

  double norm() const { return std::sqrt(std::norm(z1) + std::norm(z2)); }
  double squared_norm() const { return std::norm(z1) + std::norm(z2); }

  PointC2 operator+(const PointC2& o) const { return {z1 + o.z1, z2 + o.z2}; }
  PointC2 operator-(const PointC2& o) const { return {z1 - o.z1, z2 - o.z2}; }
  PointC2 operator-() const { return {-z1, -z2}; }
  PointC2 operator*(double s) const { return {z1 * s, z2 * s}; }
  PointC2 operator*(Complex s) const { return {z1 * s, z2 * s}; }
  PointC2 operator/(double s) const { return {z1 / s, z2 / s}; }
  PointC2& operator+=(const PointC2& o) { z1 += o.z1; z2 += o.z2; return *this; }
  PointC2& operator-=(const PointC2& o) { z1 -= o.z1; z2 -= o.z2; return *this; }
};

inline PointC2 operator*(double s, const PointC2& p) { return p * s; }
inline PointC2 operator*(Complex s, const PointC2& p) { return p * s; }

// Hermitian product <<p,q>> = p1 conj(q1) + p2 conj(q2).
inline Complex hermitian(const PointC2& p, const PointC2& q) {
  return p.z1 * std::conj(q.z1) + p.z2 * std::conj(q.z2);
}

// Euclidean inner product of R^4 representatives; equals Re <<p,q>>.
inline double dot(const PointC2& p, const PointC2& q) {
  return hermitian(p, q).real();
}

inline double distance(const PointC2& p, const PointC2& q) { return (p - q).norm(); }

// Multiplication by i on both coordinates (the complex structure of C^2).
inline PointC2 jmap(const PointC2& p) {
  constexpr Complex i{0.0, 1.0};
  return {i * p.z1, i * p.z2};
}

// Orthonormal pair (w, u) with u complex-orthogonal to w: <<u,w>> = 0.
struct ComplexFrame {
  PointC2 w;
  PointC2 u;
};

// Builds the frame for p != 0: w = p/|p|; u is the normalized projection of the
// standard basis vector farthest from the complex line spanned by w, so the
// choice is deterministic.  Throws std::invalid_argument on |p| ~ 0.
ComplexFrame complex_orthogonal(const PointC2& p);

// Orthonormal basis {n, t1, t2, t3} of R^4 with first vector n/|n|.
// Deterministic completion used by tangent space computations.
Eigen::Matrix4d orthonormal_completion(const Vec4& n);

}  // namespace curvelab
