#include "curvelab/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "curvelab/geometry.hpp"

namespace curvelab {
namespace {

constexpr double kPi = std::numbers::pi;

double pair_det(const PointC2& a, const PointC2& b) {
  return std::abs(a.z1 * b.z2 - a.z2 * b.z1);
}

PointC2 canonical_sign(PointC2 v) {
  const Vec4 w = v.to_vec4();
  for (int i = 0; i < 4; ++i) {
    if (std::abs(w(i)) > 1e-8) {
      if (w(i) < 0) v = v * -1.0;
      break;
    }
  }
  return v;
}

// Fibonacci point idx of n on the unit sphere of the tangent 3-space
// spanned by columns 1..3 of the frame.
Vec4 tangent_sphere_dir(int idx, int n, const Eigen::Matrix4d& frame) {
  const double z = 1.0 - 2.0 * (double(idx) + 0.5) / double(n);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.399963229728653 * double(idx);
  return r * std::cos(phi) * frame.col(1) + r * std::sin(phi) * frame.col(2) +
         z * frame.col(3);
}

}  // namespace

BoundaryArc BoundaryArc::make(std::vector<PointC2> pts, bool closed) {
  if (pts.size() < (closed ? 3u : 2u))
    throw std::invalid_argument("BoundaryArc: need two samples, three if closed");
  BoundaryArc arc;
  arc.samples = std::move(pts);
  arc.closed = closed;
  arc.cumlen.resize(arc.samples.size() + (closed ? 1 : 0));
  arc.cumlen[0] = 0.0;
  for (std::size_t i = 1; i < arc.cumlen.size(); ++i) {
    const PointC2& a = arc.samples[i - 1];
    const PointC2& b = arc.samples[i % arc.samples.size()];
    arc.cumlen[i] = arc.cumlen[i - 1] + (b - a).norm();
  }
  if (!(arc.length() > 0)) throw std::invalid_argument("BoundaryArc: zero length");
  return arc;
}

double BoundaryArc::length() const { return cumlen.empty() ? 0.0 : cumlen.back(); }

PointC2 BoundaryArc::at_arclength(double s) const {
  const double len = length();
  if (closed) {
    s = std::fmod(s, len);
    if (s < 0) s += len;
  } else {
    s = std::clamp(s, 0.0, len);
  }
  auto it = std::upper_bound(cumlen.begin(), cumlen.end(), s);
  std::size_t seg = (it == cumlen.begin()) ? 0 : std::size_t(it - cumlen.begin()) - 1;
  seg = std::min(seg, cumlen.size() - 2);
  const double t0 = cumlen[seg];
  const double t1 = cumlen[seg + 1];
  const double w = t1 > t0 ? (s - t0) / (t1 - t0) : 0.0;
  const PointC2& a = samples[seg];
  const PointC2& b = samples[(seg + 1) % samples.size()];
  return a + (b - a) * w;
}

double BoundaryArcSet::big_l() const {
  double longest = 0.0;
  for (const BoundaryArc& arc : arcs) longest = std::max(longest, arc.length());
  return 1.0 + longest;
}

BoundaryArc boundary_circle_arc(const ConvexBody& body, const Vec4& u, const Vec4& v,
                                double t0, double t1, std::size_t n, bool closed) {
  if (n < (closed ? 3u : 2u))
    throw std::invalid_argument("boundary_circle_arc: too few samples");
  if (std::abs(u.norm() - 1.0) > 1e-9 || std::abs(v.norm() - 1.0) > 1e-9 ||
      std::abs(u.dot(v)) > 1e-9)
    throw std::invalid_argument("boundary_circle_arc: u, v must be orthonormal");
  std::vector<PointC2> pts;
  pts.reserve(n);
  const double denom = closed ? double(n) : double(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + (t1 - t0) * double(k) / denom;
    pts.push_back(body.boundary_point(std::cos(t) * u + std::sin(t) * v));
  }
  return BoundaryArc::make(std::move(pts), closed);
}

double net_distance(const TangentNet& net, const PointC2& q) {
  if (net.size() == 0) throw std::invalid_argument("net_distance: empty net");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < net.size(); ++k)
    best = std::min(best, std::abs(net.slab(k).coordinate(q)));
  return best;
}

bool net_contains(const TangentNet& net, const PointC2& q) {
  return net_distance(net, q) < net.radius;
}

TangentNet build_net(const BoundaryArcSet& arcs, const ConvexBody& d_body,
                     const ConvexBody& dp_body, double eps) {
  if (arcs.arcs.empty()) throw std::invalid_argument("build_net: empty arc family");
  const double kappa0 = d_body.kappa_max();
  const double d0 = dist_pair(d_body, dp_body);
  const double cap = std::min(d0, 1.0 / kappa0);
  if (!(eps > 0.0) || !(eps < cap))
    throw std::invalid_argument("build_net: eps must lie in (0, " +
                                std::to_string(cap) + "), got " + std::to_string(eps));
  for (std::size_t i = 0; i < arcs.arcs.size(); ++i) {
    for (std::size_t j = 0; j < arcs.arcs[i].samples.size(); ++j) {
      const double g = d_body.gauge(arcs.arcs[i].samples[j]);
      if (std::abs(g - 1.0) > 1e-6)
        throw std::invalid_argument("build_net: arc " + std::to_string(i) +
                                    " sample " + std::to_string(j) +
                                    " is off Fr D (gauge " + std::to_string(g) + ")");
    }
  }

  const double big_l = arcs.big_l();
  const std::size_t mu = arcs.mu();
  const double denom =
      std::sqrt((d0 * kappa0 + 1.0) * (d0 * kappa0 + 1.0) - 1.0);
  int m = 0;
  double eps_m = 0.0;
  for (int cand = 1; cand <= 5000000; ++cand) {
    const double theta = big_l * kappa0 / double(cand);
    if (theta > kPi / 2.0) continue;  // sagitta formula needs theta <= pi/2
    const double e = (1.0 - std::cos(theta)) / kappa0;
    const double guard = 4.0 * (double(cand) * double(mu) + 1.0) * e / denom;
    if (std::max(e, guard) < eps) {
      m = cand;
      eps_m = e;
      break;
    }
  }
  if (m == 0) throw std::runtime_error("build_net: no admissible split count");

  TangentNet net;
  net.radius = eps_m;
  net.from_build = true;
  net.m = m;
  net.mu = mu;
  net.eps_m = eps_m;
  net.big_l = big_l;
  const PointC2 c = d_body.center();
  for (const BoundaryArc& arc : arcs.arcs) {
    const double len = arc.length();
    for (int k = 0; k < m; ++k) {
      const double s = arc.closed ? len * double(k) / double(m)
                                  : len * (double(k) + 0.5) / double(m);
      const PointC2 p = d_body.boundary_point((arc.at_arclength(s) - c).to_vec4());
      net.skeleton.push_back(p);
      net.normals.push_back(d_body.outward_normal(p));
    }
  }
  return net;
}

CoverReport covers(const TangentNet& net, const BoundaryArcSet& arcs,
                   const ConvexBody& d_body) {
  if (net.size() == 0) throw std::invalid_argument("covers: empty net");
  for (std::size_t i = 0; i < arcs.arcs.size(); ++i) {
    for (std::size_t j = 0; j < arcs.arcs[i].samples.size(); ++j) {
      const double g = d_body.gauge(arcs.arcs[i].samples[j]);
      if (std::abs(g - 1.0) > 1e-6)
        throw std::invalid_argument("covers: arc " + std::to_string(i) + " sample " +
                                    std::to_string(j) + " is off Fr D");
    }
  }
  const bool intrinsic = net.from_build && net.mu == arcs.mu() &&
                         net.size() == net.mu * std::size_t(net.m);

  CoverReport rep;
  rep.covered = true;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < arcs.arcs.size(); ++i) {
    const BoundaryArc& arc = arcs.arcs[i];
    const double len = arc.length();
    for (std::size_t j = 0; j < arc.samples.size(); ++j) {
      double best = -std::numeric_limits<double>::infinity();
      if (intrinsic) {
        const double s = arc.cumlen[j];
        const double window = 0.5 * len / double(net.m) * (1.0 + 1e-9) + 1e-12;
        for (int k = 0; k < net.m; ++k) {
          const double sk = arc.closed ? len * double(k) / double(net.m)
                                       : len * (double(k) + 0.5) / double(net.m);
          double gap = std::abs(s - sk);
          if (arc.closed) gap = std::min(gap, len - gap);
          if (gap > window) continue;
          const std::size_t idx = i * std::size_t(net.m) + std::size_t(k);
          best = std::max(best,
                          net.radius - std::abs(net.slab(idx).coordinate(arc.samples[j])));
        }
      } else {
        for (std::size_t k = 0; k < net.size(); ++k)
          best = std::max(best,
                          net.radius - std::abs(net.slab(k).coordinate(arc.samples[j])));
      }
      if (best < rep.worst_margin) {
        rep.worst_margin = best;
        rep.worst_arc = i;
        rep.worst_sample = j;
      }
      if (!(best > 0)) rep.covered = false;
    }
  }
  return rep;
}

bool generic_position_ok(const TangentNet& net, double tol) {
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = i + 1; j < net.size(); ++j)
      if (pair_det(net.normals[i], net.normals[j]) <= tol) return false;
  return true;
}

TangentNet generic_position(const TangentNet& net, const ConvexBody& d_body,
                            double tol, int budget) {
  TangentNet out = net;
  const double scale = d_body.diameter();
  const PointC2 c = d_body.center();
  for (int attempt = 0; attempt < budget; ++attempt) {
    std::size_t bad_j = 0;
    bool found = false;
    for (std::size_t i = 0; i < out.size() && !found; ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (pair_det(out.normals[i], out.normals[j]) <= tol) {
          bad_j = j;
          found = true;
          break;
        }
      }
    }
    if (!found) return out;
    const double step = 1e-3 * scale * std::pow(2.0, attempt / 6);
    const Eigen::Matrix4d frame = orthonormal_completion(out.normals[bad_j].to_vec4());
    const Vec4 dir = frame.col(1 + attempt % 3);
    const PointC2 moved = d_body.boundary_point(
        ((out.skeleton[bad_j] + PointC2::from_vec4(step * dir)) - c).to_vec4());
    out.skeleton[bad_j] = moved;
    out.normals[bad_j] = d_body.outward_normal(moved);
  }
  throw std::runtime_error("generic_position: retry budget exhausted");
}

PointC2 common_tangent_direction(const ConvexBody& d_body, const PointC2& p1,
                                 const PointC2& p2) {
  const PointC2 n1 = d_body.outward_normal(p1);
  const PointC2 n2 = d_body.outward_normal(p2);
  if ((n1 - n2).norm() < 1e-9 || (n1 + n2).norm() < 1e-9)
    return canonical_sign(jmap(n1));
  if (pair_det(n1, n2) < 1e-12)
    throw std::runtime_error(
        "common_tangent_direction: normals are complex-collinear");

  Eigen::Matrix<double, 2, 4> a;
  a.row(0) = n1.to_vec4().transpose();
  a.row(1) = n2.to_vec4().transpose();
  Eigen::JacobiSVD<Eigen::Matrix<double, 2, 4>> svd(a, Eigen::ComputeFullV);
  const Vec4 b1 = svd.matrixV().col(2);
  const Vec4 b2 = svd.matrixV().col(3);

  auto value = [&](double theta) {
    const PointC2 v = PointC2::from_vec4(std::cos(theta) * b1 + std::sin(theta) * b2);
    return std::min(std::abs(hermitian(v, n1)), std::abs(hermitian(v, n2)));
  };
  double best_theta = 0.0;
  double best = -1.0;
  const int n0 = 4096;
  for (int k = 0; k < n0; ++k) {
    const double th = kPi * double(k) / double(n0);
    const double f = value(th);
    if (f > best) {
      best = f;
      best_theta = th;
    }
  }
  double h = kPi / double(n0);
  for (int round = 0; round < 4; ++round) {
    const double lo = best_theta - h;
    for (int k = 0; k <= 64; ++k) {
      const double th = lo + 2.0 * h * double(k) / 64.0;
      const double f = value(th);
      if (f > best) {
        best = f;
        best_theta = th;
      }
    }
    h /= 16.0;
  }
  if (best <= 1e-12)
    throw std::runtime_error(
        "common_tangent_direction: no direction with nonzero pairings");
  Vec4 w = std::cos(best_theta) * b1 + std::sin(best_theta) * b2;
  w.normalize();
  return canonical_sign(PointC2::from_vec4(w));
}

namespace {

struct CellKey {
  int a, b, c, d;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : {k.a, k.b, k.c, k.d}) {
      h ^= std::size_t(std::uint32_t(v));
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace

PathOracleResult min_path_length(const TangentNet& net, const ConvexBody& d_body,
                                 const ConvexBody& dp_body, const GridSpec& grid) {
  const std::size_t kk = net.size();
  if (kk == 0) throw std::invalid_argument("min_path_length: empty net");
  if (!(grid.slab_spacing > 0.0) || !(grid.seam_spacing > 0.0))
    throw std::invalid_argument("min_path_length: spacings must be positive");

  const std::size_t words = (kk + 63) / 64;
  std::vector<PointC2> pts;
  std::vector<std::uint64_t> masks;

  auto outer_ok = [&](const PointC2& q) { return dp_body.gauge(q) <= 1.0 + 1e-9; };
  auto push_node = [&](const PointC2& q) {
    pts.push_back(q);
    masks.resize(masks.size() + words, 0);
    std::uint64_t* w = &masks[(pts.size() - 1) * words];
    for (std::size_t k = 0; k < kk; ++k) {
      if (std::abs(net.slab(k).coordinate(q)) < net.radius + 1e-12)
        w[k / 64] |= (1ull << (k % 64));
    }
    if (pts.size() > grid.max_nodes)
      throw std::runtime_error("min_path_length: node budget " +
                               std::to_string(grid.max_nodes) +
                               " exceeded; increase grid spacing");
    return pts.size() - 1;
  };

  // Lattice on each slab hyperplane, clipped to the outer body.
  for (std::size_t k = 0; k < kk; ++k) {
    const Slab s = net.slab(k);
    const Eigen::Matrix4d frame = orthonormal_completion(s.normal.to_vec4());
    Vec4 t[3] = {frame.col(1), frame.col(2), frame.col(3)};
    double lo[3], hi[3];
    bool empty = false;
    for (int i = 0; i < 3; ++i) {
      const double proj = s.base.to_vec4().dot(t[i]);
      hi[i] = dp_body.support(t[i]) - proj;
      lo[i] = -dp_body.support(-t[i]) - proj;
      if (hi[i] < lo[i]) empty = true;
    }
    if (empty) continue;
    long n[3];
    double start[3];
    for (int i = 0; i < 3; ++i) {
      n[i] = long((hi[i] - lo[i]) / grid.slab_spacing) + 1;
      start[i] = lo[i] + 0.5 * ((hi[i] - lo[i]) - double(n[i] - 1) * grid.slab_spacing);
    }
    for (long ia = 0; ia < n[0]; ++ia) {
      for (long ib = 0; ib < n[1]; ++ib) {
        for (long ic = 0; ic < n[2]; ++ic) {
          const Vec4 off = (start[0] + double(ia) * grid.slab_spacing) * t[0] +
                           (start[1] + double(ib) * grid.slab_spacing) * t[1] +
                           (start[2] + double(ic) * grid.slab_spacing) * t[2];
          const PointC2 q = s.base + PointC2::from_vec4(off);
          if (outer_ok(q)) push_node(q);
        }
      }
    }
  }

  // Lattice on each pairwise seam plane H_k cap H_l.
  for (std::size_t k = 0; k < kk; ++k) {
    for (std::size_t l = k + 1; l < kk; ++l) {
      Eigen::Matrix<double, 2, 4> a;
      a.row(0) = net.normals[k].to_vec4().transpose();
      a.row(1) = net.normals[l].to_vec4().transpose();
      const Eigen::Matrix2d gram = a * a.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(gram);
      if (es.eigenvalues()(0) < 1e-12) continue;  // parallel hyperplanes, no seam
      Eigen::Vector2d rhs(dot(net.skeleton[k], net.normals[k]),
                          dot(net.skeleton[l], net.normals[l]));
      const Vec4 x0 = a.transpose() * gram.ldlt().solve(rhs);
      Eigen::JacobiSVD<Eigen::Matrix<double, 2, 4>> svd(a, Eigen::ComputeFullV);
      const Vec4 c1 = svd.matrixV().col(2);
      const Vec4 c2 = svd.matrixV().col(3);
      const PointC2 anchor = PointC2::from_vec4(x0);
      const Vec4 axes[2] = {c1, c2};
      double lo[2], hi[2];
      bool empty = false;
      for (int i = 0; i < 2; ++i) {
        const double proj = anchor.to_vec4().dot(axes[i]);
        hi[i] = dp_body.support(axes[i]) - proj;
        lo[i] = -dp_body.support(-axes[i]) - proj;
        if (hi[i] < lo[i]) empty = true;
      }
      if (empty) continue;
      long n[2];
      double start[2];
      for (int i = 0; i < 2; ++i) {
        n[i] = long((hi[i] - lo[i]) / grid.seam_spacing) + 1;
        start[i] = lo[i] + 0.5 * ((hi[i] - lo[i]) - double(n[i] - 1) * grid.seam_spacing);
      }
      for (long ia = 0; ia < n[0]; ++ia) {
        for (long ib = 0; ib < n[1]; ++ib) {
          const Vec4 off = (start[0] + double(ia) * grid.seam_spacing) * c1 +
                           (start[1] + double(ib) * grid.seam_spacing) * c2;
          const PointC2 q = anchor + PointC2::from_vec4(off);
          if (outer_ok(q)) push_node(q);
        }
      }
    }
  }

  // Sources: skeleton points plus the surrounding boundary caps inside each slab.
  std::vector<std::size_t> source_ids;
  const PointC2 dc = d_body.center();
  const double src_h = 0.5 * grid.slab_spacing;
  for (std::size_t k = 0; k < kk; ++k) {
    const Slab s = net.slab(k);
    source_ids.push_back(push_node(s.base));
    const Eigen::Matrix4d frame = orthonormal_completion(s.normal.to_vec4());
    const int ndir = 24;
    bool grew = true;
    for (int ring = 1; ring <= 64 && grew; ++ring) {
      grew = false;
      for (int idx = 0; idx < ndir; ++idx) {
        const Vec4 dir = double(ring) * src_h * tangent_sphere_dir(idx, ndir, frame);
        const PointC2 q =
            d_body.boundary_point(((s.base + PointC2::from_vec4(dir)) - dc).to_vec4());
        if (std::abs(s.coordinate(q)) < net.radius) {
          source_ids.push_back(push_node(q));
          grew = true;
        }
      }
    }
  }

  // Sinks: the slice of the far boundary cut by each slab hyperplane, reached
  // by radial root-finding from the (interior) base point.
  std::vector<std::size_t> sink_ids;
  const int nsink = 64;
  for (std::size_t k = 0; k < kk; ++k) {
    const Slab s = net.slab(k);
    if (dp_body.gauge(s.base) >= 1.0) continue;
    const Eigen::Matrix4d frame = orthonormal_completion(s.normal.to_vec4());
    for (int idx = 0; idx < nsink; ++idx) {
      const PointC2 dir = PointC2::from_vec4(tangent_sphere_dir(idx, nsink, frame));
      double t_lo = 0.0;
      double t_hi = dp_body.diameter();
      int expand = 0;
      while (dp_body.gauge(s.base + dir * t_hi) < 1.0 && expand++ < 60) t_hi *= 2.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (t_lo + t_hi);
        (dp_body.gauge(s.base + dir * mid) < 1.0 ? t_lo : t_hi) = mid;
      }
      sink_ids.push_back(push_node(s.base + dir * (0.5 * (t_lo + t_hi))));
    }
  }

  const std::size_t n_nodes = pts.size();
  PathOracleResult res;
  res.nodes = n_nodes;
  for (std::size_t id : source_ids) res.sources.push_back(pts[id]);
  for (std::size_t id : sink_ids) res.sinks.push_back(pts[id]);

  // Neighbor edges between nodes that share a slab.
  const double r_nb = 2.2 * std::max(grid.slab_spacing, grid.seam_spacing);
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> cells;
  auto key_of = [&](const PointC2& q) {
    const Vec4 w = q.to_vec4();
    return CellKey{int(std::floor(w(0) / r_nb)), int(std::floor(w(1) / r_nb)),
                   int(std::floor(w(2) / r_nb)), int(std::floor(w(3) / r_nb))};
  };
  for (std::size_t i = 0; i < n_nodes; ++i) cells[key_of(pts[i])].push_back(std::uint32_t(i));

  auto share_slab = [&](std::size_t i, std::size_t j) {
    const std::uint64_t* a = &masks[i * words];
    const std::uint64_t* b = &masks[j * words];
    for (std::size_t w = 0; w < words; ++w)
      if (a[w] & b[w]) return true;
    return false;
  };

  std::vector<std::vector<std::uint32_t>> adj(n_nodes);
  std::size_t edge_count = 0;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const CellKey base = key_of(pts[i]);
    for (int da = -1; da <= 1; ++da) {
      for (int db = -1; db <= 1; ++db) {
        for (int dc2 = -1; dc2 <= 1; ++dc2) {
          for (int dd = -1; dd <= 1; ++dd) {
            const auto it = cells.find(
                CellKey{base.a + da, base.b + db, base.c + dc2, base.d + dd});
            if (it == cells.end()) continue;
            for (std::uint32_t j : it->second) {
              if (j >= i) continue;
              if ((pts[i] - pts[j]).squared_norm() > r_nb * r_nb) continue;
              if (!share_slab(i, j)) continue;
              adj[i].push_back(j);
              adj[j].push_back(std::uint32_t(i));
              if (++edge_count > 40000000)
                throw std::runtime_error(
                    "min_path_length: edge budget exceeded; increase grid spacing");
            }
          }
        }
      }
    }
  }
  res.edges = edge_count;

  // Multi-source Dijkstra.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n_nodes, inf);
  std::vector<std::int64_t> parent(n_nodes, -1);
  std::vector<std::uint32_t> origin(n_nodes, std::uint32_t(-1));
  using QItem = std::pair<double, std::uint32_t>;
  std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> pq;
  for (std::size_t si = 0; si < source_ids.size(); ++si) {
    const std::size_t id = source_ids[si];
    if (dist[id] > 0.0) {
      dist[id] = 0.0;
      origin[id] = std::uint32_t(si);
      pq.push({0.0, std::uint32_t(id)});
    }
  }
  while (!pq.empty()) {
    const auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[i]) continue;
    for (std::uint32_t j : adj[i]) {
      const double cand = d + (pts[i] - pts[j]).norm();
      if (cand < dist[j]) {
        dist[j] = cand;
        parent[j] = i;
        origin[j] = origin[i];
        pq.push({cand, j});
      }
    }
  }

  for (std::size_t ti = 0; ti < sink_ids.size(); ++ti) {
    if (dist[sink_ids[ti]] < inf)
      res.rows.push_back({origin[sink_ids[ti]], ti, dist[sink_ids[ti]]});
  }
  if (res.rows.empty()) return res;
  res.reachable = true;

  // Straighten the best graph paths inside the net; report the shortest.
  auto in_net = [&](const PointC2& q) {
    return net_distance(net, q) < net.radius + 1e-12;
  };
  const double sample_step = 0.25 * std::min(grid.slab_spacing, grid.seam_spacing);
  auto segment_ok = [&](const PointC2& a, const PointC2& b) {
    const double len = (b - a).norm();
    const int steps = std::max(2, int(len / sample_step) + 1);
    for (int s2 = 0; s2 <= steps; ++s2) {
      if (!in_net(a + (b - a) * (double(s2) / double(steps)))) return false;
    }
    return true;
  };

  std::vector<std::size_t> order(res.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return res.rows[x].length < res.rows[y].length;
  });
  const std::size_t tries = std::min<std::size_t>(order.size(), 64);
  for (std::size_t oi = 0; oi < tries; ++oi) {
    const OracleRow& row = res.rows[order[oi]];
    std::vector<PointC2> raw;
    double max_edge = 0.0;
    for (std::int64_t at = std::int64_t(sink_ids[row.sink]); at >= 0; at = parent[at]) {
      raw.push_back(pts[std::size_t(at)]);
      if (parent[at] >= 0)
        max_edge = std::max(max_edge, (pts[std::size_t(at)] - pts[std::size_t(parent[at])]).norm());
    }
    std::reverse(raw.begin(), raw.end());
    std::vector<PointC2> straight{raw.front()};
    std::size_t i = 0;
    while (i + 1 < raw.size()) {
      std::size_t next = i + 1;
      for (std::size_t j = raw.size() - 1; j > i; --j) {
        if (segment_ok(raw[i], raw[j])) {
          next = j;
          break;
        }
      }
      straight.push_back(raw[next]);
      i = next;
    }
    double len = 0.0;
    for (std::size_t s2 = 1; s2 < straight.size(); ++s2)
      len += (straight[s2] - straight[s2 - 1]).norm();
    if (len < res.min_length) {
      res.min_length = len;
      res.path = straight;
      res.slack = max_edge;
    }
  }
  return res;
}

double analytic_lower_bound(const TangentNet& net, const ConvexBody& d_body,
                            const ConvexBody& dp_body) {
  if (!net.from_build)
    throw std::logic_error("analytic_lower_bound: net lacks construction metadata");
  const double kappa0 = d_body.kappa_max();
  const double d0 = dist_pair(d_body, dp_body);
  const double denom =
      std::sqrt((d0 * kappa0 + 1.0) * (d0 * kappa0 + 1.0) - 1.0);
  const double guard = 4.0 * (double(net.m) * double(net.mu) + 1.0) * net.eps_m / denom;
  return dee(d_body, dp_body).dee - guard;
}

double dee_growth(double t, double kappa0) {
  if (!(t * kappa0 > 1.0))
    throw std::invalid_argument("dee_growth: need t > 1/kappa0");
  return (t * t * kappa0 - t) / std::sqrt(t * t * kappa0 * kappa0 - 1.0);
}

std::string TangentNet::to_text() const {
  nlohmann::ordered_json j;
  j["schema"] = "curvelab-net/1";
  j["radius"] = radius;
  auto enc = [](const PointC2& p) {
    return nlohmann::ordered_json::array(
        {p.z1.real(), p.z1.imag(), p.z2.real(), p.z2.imag()});
  };
  j["skeleton"] = nlohmann::ordered_json::array();
  for (const PointC2& p : skeleton) j["skeleton"].push_back(enc(p));
  j["normals"] = nlohmann::ordered_json::array();
  for (const PointC2& p : normals) j["normals"].push_back(enc(p));
  j["from_build"] = from_build;
  j["m"] = m;
  j["mu"] = mu;
  j["eps_m"] = eps_m;
  j["big_l"] = big_l;
  return j.dump(2);
}

TangentNet TangentNet::from_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "curvelab-net/1")
    throw std::invalid_argument("TangentNet::from_text: unknown schema");
  auto dec = [](const nlohmann::json& a) {
    return PointC2{Complex(a.at(0).get<double>(), a.at(1).get<double>()),
                   Complex(a.at(2).get<double>(), a.at(3).get<double>())};
  };
  TangentNet net;
  net.radius = j.at("radius").get<double>();
  for (const auto& a : j.at("skeleton")) net.skeleton.push_back(dec(a));
  for (const auto& a : j.at("normals")) net.normals.push_back(dec(a));
  if (net.skeleton.size() != net.normals.size())
    throw std::invalid_argument("TangentNet::from_text: skeleton/normal mismatch");
  net.from_build = j.at("from_build").get<bool>();
  net.m = j.at("m").get<int>();
  net.mu = j.at("mu").get<std::size_t>();
  net.eps_m = j.at("eps_m").get<double>();
  net.big_l = j.at("big_l").get<double>();
  return net;
}

}  // namespace curvelab
