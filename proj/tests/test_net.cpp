#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "curvelab/convex.hpp"
#include "curvelab/net.hpp"

using namespace curvelab;

namespace {

constexpr double kPi = std::numbers::pi;

Vec4 axis(int i) {
  Vec4 v = Vec4::Zero();
  v(i) = 1.0;
  return v;
}

Vec4 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Vec4 v;
  do {
    for (int i = 0; i < 4; ++i) v(i) = gauss(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Orthonormal pair spanning a random 2-plane.
std::pair<Vec4, Vec4> random_plane(std::mt19937_64& rng) {
  const Vec4 u = random_unit(rng);
  Vec4 v = random_unit(rng);
  v -= u * u.dot(v);
  while (v.norm() < 1e-6) {
    v = random_unit(rng);
    v -= u * u.dot(v);
  }
  return {u, v.normalized()};
}

}  // namespace

TEST_CASE("boundary arcs carry arclength structure") {
  const ConvexBody ball = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);
  const BoundaryArc circle = boundary_circle_arc(ball, axis(0), axis(2), 0.0, 2.0 * kPi, 1024, true);
  CHECK(circle.samples.size() == 1024);
  CHECK(circle.length() == doctest::Approx(2.0 * kPi).epsilon(1e-4));

  // quarter-way point of the closed circle sits a right angle away from the start
  const PointC2 q = circle.at_arclength(circle.length() / 4.0);
  CHECK(dot(q, circle.samples[0]) == doctest::Approx(0.0).epsilon(1e-2));
  CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-4));

  // wrapping
  const PointC2 w = circle.at_arclength(circle.length() + 0.25);
  const PointC2 w2 = circle.at_arclength(0.25);
  CHECK((w - w2).norm() < 1e-12);

  const BoundaryArc open_arc = boundary_circle_arc(ball, axis(0), axis(2), 0.0, 0.5, 64, false);
  CHECK(open_arc.length() == doctest::Approx(0.5).epsilon(1e-4));
  CHECK((open_arc.at_arclength(0.0) - open_arc.samples.front()).norm() < 1e-12);
  CHECK((open_arc.at_arclength(1e9) - open_arc.samples.back()).norm() < 1e-12);

  CHECK_THROWS_AS(BoundaryArc::make({PointC2{1.0, 0.0, 0.0, 0.0}}, false), std::invalid_argument);
}

TEST_CASE("build_net splits a great circle into the frozen slab count") {
  const ConvexBody inner = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);
  const ConvexBody outer = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 2.0);
  BoundaryArcSet arcs;
  arcs.arcs.push_back(boundary_circle_arc(inner, axis(0), axis(2), 0.0, 2.0 * kPi, 2048, true));

  const TangentNet net = build_net(arcs, inner, outer, 0.1);
  CHECK(net.from_build);
  CHECK(net.mu == 1);
  CHECK(net.m == 614);
  CHECK(net.size() == 614);
  CHECK(net.big_l == doctest::Approx(1.0 + 2.0 * kPi).epsilon(1e-5));

  // radius is the sagitta at the chosen split
  const double theta = net.big_l / 614.0;
  CHECK(net.radius == doctest::Approx(1.0 - std::cos(theta)).epsilon(1e-12));
  CHECK(net.radius == doctest::Approx(7.0357e-5).epsilon(1e-3));

  // the scan stopped at the first admissible split: one notch coarser violates
  const double t613 = net.big_l / 613.0;
  const double e613 = 1.0 - std::cos(t613);
  CHECK(4.0 * (613.0 + 1.0) * e613 / std::sqrt(3.0) > 0.1);
  CHECK(4.0 * (614.0 + 1.0) * net.eps_m / std::sqrt(3.0) < 0.1);

  // tangency data is consistent
  for (std::size_t i = 0; i < net.size(); i += 41) {
    CHECK(net.skeleton[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((net.normals[i] - net.skeleton[i]).norm() < 1e-12);
  }

  SUBCASE("the built net covers its arcs; a decimated one does not") {
    const CoverReport ok = covers(net, arcs, inner);
    CHECK(ok.covered);
    CHECK(ok.worst_margin > 0.0);

    TangentNet sparse;
    sparse.radius = net.radius;
    for (std::size_t i = 0; i < net.size(); i += 3) {
      sparse.skeleton.push_back(net.skeleton[i]);
      sparse.normals.push_back(net.normals[i]);
    }
    const CoverReport bad = covers(sparse, arcs, inner);
    CHECK_FALSE(bad.covered);
    CHECK(bad.worst_margin < 0.0);
  }

  SUBCASE("slab points stay out of the eroded body") {
    std::mt19937_64 rng(411);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t k = std::uniform_int_distribution<std::size_t>(0, net.size() - 1)(rng);
      const Slab s = net.slab(k);
      const Eigen::Matrix4d frame = orthonormal_completion(s.normal.to_vec4());
      Vec4 off = unit(rng) * net.radius * frame.col(0);
      for (int i = 1; i < 4; ++i) off += unit(rng) * 1.5 * frame.col(i);
      const PointC2 q = s.base + PointC2::from_vec4(off);
      CHECK(inner.signed_boundary_distance(q) >= -net.radius - 1e-9);
    }
  }

  SUBCASE("closed even nets have antipodal degeneracies") {
    CHECK_FALSE(generic_position_ok(net));
  }

  SUBCASE("net distance from the center equals the tangency radius") {
    CHECK(net_distance(net, {0.0, 0.0, 0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("analytic lower bound matches its ingredients") {
    const double bound = analytic_lower_bound(net, inner, outer);
    const double guard = 4.0 * (614.0 + 1.0) * net.eps_m / std::sqrt(3.0);
    CHECK(bound == doctest::Approx(2.0 / std::sqrt(3.0) - guard).epsilon(1e-12));
    CHECK(bound > 2.0 / std::sqrt(3.0) - 0.1);

    TangentNet hand;
    hand.skeleton = {PointC2{1.0, 0.0, 0.0, 0.0}};
    hand.normals = {PointC2{1.0, 0.0, 0.0, 0.0}};
    hand.radius = 0.1;
    CHECK_THROWS_AS(analytic_lower_bound(hand, inner, outer), std::logic_error);
  }

  SUBCASE("serialization round-trips exactly") {
    const TangentNet back = TangentNet::from_text(net.to_text());
    REQUIRE(back.size() == net.size());
    CHECK(back.radius == net.radius);
    CHECK(back.m == net.m);
    CHECK(back.mu == net.mu);
    CHECK(back.eps_m == net.eps_m);
    CHECK(back.big_l == net.big_l);
    CHECK(back.from_build == net.from_build);
    for (std::size_t i = 0; i < net.size(); ++i) {
      CHECK(back.skeleton[i].z1 == net.skeleton[i].z1);
      CHECK(back.skeleton[i].z2 == net.skeleton[i].z2);
      CHECK(back.normals[i].z1 == net.normals[i].z1);
      CHECK(back.normals[i].z2 == net.normals[i].z2);
    }
    CHECK_THROWS_AS(TangentNet::from_text("{\"schema\":\"nope\"}"), std::invalid_argument);
  }
}

TEST_CASE("build_net rejects bad inputs") {
  const ConvexBody inner = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);
  const ConvexBody outer = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 2.0);
  BoundaryArcSet arcs;
  arcs.arcs.push_back(boundary_circle_arc(inner, axis(0), axis(2), 0.0, 0.5, 64, false));

  CHECK_THROWS_AS(build_net(arcs, inner, outer, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_net(arcs, inner, outer, 1.0), std::invalid_argument);  // = min(d0, 1/k0)
  CHECK_THROWS_AS(build_net(BoundaryArcSet{}, inner, outer, 0.3), std::invalid_argument);

  BoundaryArcSet off_surface;
  off_surface.arcs.push_back(BoundaryArc::make(
      {PointC2{1.1, 0.0, 0.0, 0.0}, PointC2{0.0, 0.0, 1.1, 0.0}}, false));
  CHECK_THROWS_AS(build_net(off_surface, inner, outer, 0.3), std::invalid_argument);
}

TEST_CASE("generic position repair separates an equatorial net") {
  const ConvexBody ball = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);
  TangentNet net;
  net.radius = 0.05;
  for (int j = 0; j < 6; ++j) {
    const double phi = 2.0 * kPi * double(j) / 6.0;
    const PointC2 p{std::cos(phi), std::sin(phi), 0.0, 0.0};
    net.skeleton.push_back(p);
    net.normals.push_back(p);
  }
  CHECK_FALSE(generic_position_ok(net));

  const TangentNet fixed = generic_position(net, ball, 1e-9, 48);
  CHECK(generic_position_ok(fixed));
  CHECK(fixed.radius == net.radius);
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    CHECK(fixed.skeleton[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((fixed.normals[i] - ball.outward_normal(fixed.skeleton[i])).norm() < 1e-12);
    // points moved only slightly
    CHECK((fixed.skeleton[i] - net.skeleton[i]).norm() < 0.2);
  }

  // an unreachable separation target exhausts the budget
  CHECK_THROWS_AS(generic_position(net, ball, 10.0, 12), std::runtime_error);
}

TEST_CASE("common tangent directions pair against both normals") {
  const ConvexBody ball = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);

  SUBCASE("orthogonal tangency points split the pairing evenly") {
    const PointC2 p1{1.0, 0.0, 0.0, 0.0};
    const PointC2 p2{0.0, 0.0, 1.0, 0.0};
    const PointC2 v = common_tangent_direction(ball, p1, p2);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(dot(v, p1)) < 1e-9);
    CHECK(std::abs(dot(v, p2)) < 1e-9);
    CHECK(std::abs(hermitian(v, p1)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    CHECK(std::abs(hermitian(v, p2)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  }

  SUBCASE("a repeated point gives the rotated normal") {
    const PointC2 p{0.6, 0.0, 0.8, 0.0};
    const PointC2 v = common_tangent_direction(ball, p, p);
    CHECK(std::abs(hermitian(v, ball.outward_normal(p))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(dot(v, p)) < 1e-12);
  }

  SUBCASE("complex-collinear normals are rejected") {
    const PointC2 p1{1.0, 0.0, 0.0, 0.0};
    const PointC2 p2{std::cos(0.7), std::sin(0.7), 0.0, 0.0};
    CHECK_THROWS_AS(common_tangent_direction(ball, p1, p2), std::runtime_error);
  }

  SUBCASE("random pairs satisfy the tangency and pairing properties") {
    const ConvexBody body = ConvexBody::ellipsoid({0.0, 0.0, 0.0, 0.0},
                                                  Vec4(1.3, 1.0, 0.8, 1.1));
    std::mt19937_64 rng(5512);
    int checked = 0;
    while (checked < 40) {
      const PointC2 p1 = body.boundary_point(random_unit(rng));
      const PointC2 p2 = body.boundary_point(random_unit(rng));
      const PointC2 n1 = body.outward_normal(p1);
      const PointC2 n2 = body.outward_normal(p2);
      if (std::abs(n1.z1 * n2.z2 - n1.z2 * n2.z1) < 1e-3) continue;  // skip near-degenerate
      const PointC2 v = common_tangent_direction(body, p1, p2);
      CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(dot(v, n1)) < 1e-9);
      CHECK(std::abs(dot(v, n2)) < 1e-9);
      const double got = std::min(std::abs(hermitian(v, n1)), std::abs(hermitian(v, n2)));
      CHECK(got > 1e-4);

      // dense sweep over the same tangent intersection cannot do much better
      Eigen::Matrix<double, 2, 4> a;
      a.row(0) = n1.to_vec4().transpose();
      a.row(1) = n2.to_vec4().transpose();
      Eigen::JacobiSVD<Eigen::Matrix<double, 2, 4>> svd(a, Eigen::ComputeFullV);
      const Vec4 b1 = svd.matrixV().col(2);
      const Vec4 b2 = svd.matrixV().col(3);
      double best = 0.0;
      for (int k = 0; k < 20001; ++k) {
        const double th = kPi * double(k) / 20001.0;
        const PointC2 w = PointC2::from_vec4(std::cos(th) * b1 + std::sin(th) * b2);
        best = std::max(best, std::min(std::abs(hermitian(w, n1)), std::abs(hermitian(w, n2))));
      }
      CHECK(got >= best - 1e-6);
      ++checked;
    }
  }

  SUBCASE("off-boundary points are rejected") {
    CHECK_THROWS_AS(common_tangent_direction(ball, PointC2{0.5, 0.0, 0.0, 0.0},
                                             PointC2{0.0, 0.0, 1.0, 0.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("dee growth function reproduces the comparison quantity") {
  CHECK(dee_growth(2.0, 1.0) == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(dee_growth(0.9, 1.0), std::invalid_argument);

  std::mt19937_64 rng(618);
  std::uniform_real_distribution<double> rad(0.5, 1.5);
  std::uniform_real_distribution<double> gap(0.4, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double r = rad(rng);
    const double d0 = gap(rng);
    const ConvexBody inner = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, r);
    const ConvexBody outer = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, r + d0);
    const double kappa = 1.0 / r;
    CHECK(dee_growth(d0 + r, kappa) == doctest::Approx(dee(inner, outer).dee).epsilon(1e-9));
  }

  // monotone increasing past the pole
  double prev = dee_growth(1.05, 1.0);
  for (double t = 1.1; t < 6.0; t += 0.05) {
    const double cur = dee_growth(t, 1.0);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("single-slab path oracle recovers the tangent chord length") {
  const ConvexBody inner = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);
  const ConvexBody outer = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 2.0);
  TangentNet net;
  net.skeleton = {PointC2{1.0, 0.0, 0.0, 0.0}};
  net.normals = {PointC2{1.0, 0.0, 0.0, 0.0}};
  net.radius = 1e-4;

  GridSpec grid;
  grid.slab_spacing = 0.12;
  grid.seam_spacing = 0.12;
  const PathOracleResult res = min_path_length(net, inner, outer, grid);
  REQUIRE(res.reachable);
  CHECK(res.nodes > 1000);
  CHECK(res.edges > 0);
  CHECK(res.min_length == doctest::Approx(std::sqrt(3.0)).epsilon(1e-10));
  CHECK(std::abs(res.min_length - std::sqrt(3.0)) < 0.01 * std::sqrt(3.0));

  REQUIRE(res.path.size() >= 2);
  CHECK(inner.gauge(res.path.front()) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(outer.gauge(res.path.back()) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.rows.size() > 0);
}

TEST_CASE("built-net path oracle clears the certified bound") {
  const ConvexBody inner = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 1.0);
  const ConvexBody outer = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 2.0);
  BoundaryArcSet arcs;
  arcs.arcs.push_back(boundary_circle_arc(inner, axis(0), axis(2), 0.0, 0.6, 512, false));

  const double eps = 0.35;
  const TangentNet net = build_net(arcs, inner, outer, eps);
  CHECK(net.m == 10);
  CHECK(generic_position_ok(net));
  CHECK(covers(net, arcs, inner).covered);

  GridSpec grid;
  grid.slab_spacing = 0.25;
  grid.seam_spacing = 0.25;
  const PathOracleResult res = min_path_length(net, inner, outer, grid);
  REQUIRE(res.reachable);

  const double bound = analytic_lower_bound(net, inner, outer);
  CHECK(bound > 0.8);
  CHECK(res.min_length >= bound - 1e-7);
  CHECK(res.min_length >= dee(inner, outer).dee - eps - 1e-7);
  CHECK(res.min_length < 2.5);
  CHECK(res.slack <= 2.2 * 0.25 + 1e-12);

  // straightened path stays inside the slab family
  for (std::size_t i = 1; i < res.path.size(); ++i) {
    for (int s = 0; s <= 8; ++s) {
      const PointC2 q = res.path[i - 1] + (res.path[i] - res.path[i - 1]) * (double(s) / 8.0);
      CHECK(net_distance(net, q) < net.radius + 1e-9);
    }
  }
}

TEST_CASE("path oracle respects the lower bound across random configurations") {
  std::mt19937_64 rng(20260825);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int cfg = 0; cfg < 20; ++cfg) {
    const double r_in = 1.0 + 0.3 * unif(rng);
    const bool use_ellipsoid = (cfg % 5 == 2);
    const PointC2 shift{0.3 * (unif(rng) - 0.5), 0.3 * (unif(rng) - 0.5),
                        0.3 * (unif(rng) - 0.5), 0.3 * (unif(rng) - 0.5)};
    const ConvexBody inner =
        use_ellipsoid
            ? ConvexBody::ellipsoid(shift, Vec4(1.05 * r_in, 0.95 * r_in, r_in, 0.9 * r_in))
            : ConvexBody::ball(shift, r_in);
    const ConvexBody outer = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 2.4 + 0.5 * unif(rng));

    const double cap = std::min(dist_pair(inner, outer), 1.0 / inner.kappa_max());
    const double eps = cap * (0.5 + 0.2 * unif(rng));

    const auto [u, v] = random_plane(rng);
    const double t0 = 2.0 * kPi * unif(rng);
    const double ext = 0.25 + 0.15 * unif(rng);
    BoundaryArcSet arcs;
    arcs.arcs.push_back(boundary_circle_arc(inner, u, v, t0, t0 + ext, 256, false));

    CAPTURE(cfg);
    const TangentNet net = build_net(arcs, inner, outer, eps);
    CHECK(net.m >= 1);
    CHECK(covers(net, arcs, inner).covered);

    GridSpec grid;
    grid.slab_spacing = 0.35;
    grid.seam_spacing = 0.35;
    grid.max_nodes = 400000;
    const PathOracleResult res = min_path_length(net, inner, outer, grid);
    REQUIRE(res.reachable);

    const double bound = analytic_lower_bound(net, inner, outer);
    CHECK(res.min_length >= bound - 1e-7);
    CHECK(res.min_length >= dee(inner, outer).dee - eps - 1e-7);
    CHECK(res.min_length <= 2.0 * outer.diameter());
  }
}
