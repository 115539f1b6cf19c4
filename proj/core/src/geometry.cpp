#include "curvelab/geometry.hpp"

#include <stdexcept>

namespace curvelab {

ComplexFrame complex_orthogonal(const PointC2& p) {
  const double n = p.norm();
  if (n < 1e-14) throw std::invalid_argument("complex_orthogonal: zero vector");
  const PointC2 w = p / n;

  // e_k is farthest from span_C(w) when |w_k| is smallest: the squared distance
  // of e_k to the complex line is 1 - |w_k|^2.
  const PointC2 e = (std::abs(w.z1) <= std::abs(w.z2)) ? PointC2{1.0, 0.0, 0.0, 0.0}
                                                       : PointC2{0.0, 0.0, 1.0, 0.0};
  PointC2 u = e - hermitian(e, w) * w;
  const double un = u.norm();
  if (un < 1e-14) throw std::invalid_argument("complex_orthogonal: degenerate projection");
  u = u / un;
  return {w, u};
}

Eigen::Matrix4d orthonormal_completion(const Vec4& n) {
  const double len = n.norm();
  if (len < 1e-14) throw std::invalid_argument("orthonormal_completion: zero vector");
  Eigen::Matrix4d basis;
  basis.col(0) = n / len;
  // Gram-Schmidt over the standard basis, skipping the most aligned axis.
  int skip = 0;
  n.cwiseAbs().maxCoeff(&skip);
  int col = 1;
  for (int k = 0; k < 4 && col < 4; ++k) {
    if (k == skip) continue;
    Vec4 v = Vec4::Unit(k);
    for (int j = 0; j < col; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    const double vn = v.norm();
    if (vn < 1e-12) continue;
    basis.col(col++) = v / vn;
  }
  if (col != 4) throw std::runtime_error("orthonormal_completion: failed");
  return basis;
}

}  // namespace curvelab
