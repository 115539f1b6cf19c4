#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "curvelab/convex.hpp"

using namespace curvelab;

namespace {

std::mt19937_64 rng(77251u);

double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

PointC2 random_point(double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return {Complex{n(rng), n(rng)}, Complex{n(rng), n(rng)}};
}

ConvexBody quartic_bump_body() {
  // f = sum (x_i/a_i)^2 + 0.2 (x_i/a_i)^4 - 1: smooth and strictly convex.
  const Vec4 a{1.3, 1.0, 0.8, 1.1};
  auto f = [a](const Vec4& x) {
    double acc = -1.0;
    for (int i = 0; i < 4; ++i) {
      const double u = x[i] / a[i];
      acc += u * u + 0.2 * u * u * u * u;
    }
    return acc;
  };
  auto grad = [a](const Vec4& x) {
    Vec4 g;
    for (int i = 0; i < 4; ++i) {
      const double u = x[i] / a[i];
      g[i] = (2.0 * u + 0.8 * u * u * u) / a[i];
    }
    return g;
  };
  auto hess = [a](const Vec4& x) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 4; ++i) {
      const double u = x[i] / a[i];
      h(i, i) = (2.0 + 2.4 * u * u) / (a[i] * a[i]);
    }
    return h;
  };
  return ConvexBody::level_set(f, grad, hess, PointC2{0.0, 0.0, 0.0, 0.0});
}

// Independent curvature oracle: fit a quadric height function to reprojected
// boundary samples around p and read the eigenvalues of its Hessian.
Eigen::Vector3d quadric_curvatures(const ConvexBody& body, const PointC2& p,
                                   double s) {
  const PointC2 n = body.outward_normal(p);
  const Eigen::Matrix4d basis = orthonormal_completion(n.to_vec4());
  std::vector<Eigen::Vector3d> us;
  std::vector<double> hs;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      for (int k = -2; k <= 2; ++k) {
        Vec4 shift = p.to_vec4() + s * (i * basis.col(1) + j * basis.col(2) +
                                        k * basis.col(3));
        const PointC2 b =
            body.boundary_point(shift - body.center().to_vec4());
        const Vec4 d = (b - p).to_vec4();
        us.emplace_back(d.dot(basis.col(1)), d.dot(basis.col(2)),
                        d.dot(basis.col(3)));
        hs.push_back(d.dot(basis.col(0)));
      }
  // h ~ c0 + l.u + 1/2 u^T Q u; curvatures are eigenvalues of -Q.
  Eigen::MatrixXd m(us.size(), 10);
  Eigen::VectorXd rhs(us.size());
  for (std::size_t r = 0; r < us.size(); ++r) {
    const Eigen::Vector3d& u = us[r];
    m(r, 0) = 1.0;
    m(r, 1) = u[0];
    m(r, 2) = u[1];
    m(r, 3) = u[2];
    m(r, 4) = 0.5 * u[0] * u[0];
    m(r, 5) = 0.5 * u[1] * u[1];
    m(r, 6) = 0.5 * u[2] * u[2];
    m(r, 7) = u[0] * u[1];
    m(r, 8) = u[0] * u[2];
    m(r, 9) = u[1] * u[2];
    rhs(r) = hs[r];
  }
  const Eigen::VectorXd c = m.colPivHouseholderQr().solve(rhs);
  Eigen::Matrix3d q;
  q << c[4], c[7], c[8], c[7], c[5], c[9], c[8], c[9], c[6];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(-q);
  return es.eigenvalues();
}

}  // namespace

TEST_CASE("ball basics and closed forms") {
  const ConvexBody b = ConvexBody::ball({0.0, 0.0, 0.0, 0.0}, 2.0);
  CHECK(b.kappa_max() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(b.gauge({1.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.5).epsilon(1e-14));
  const PointC2 n = b.outward_normal({2.0, 0.0, 0.0, 0.0});
  CHECK((n - PointC2{1.0, 0.0, 0.0, 0.0}).norm() < 1e-14);
  CHECK(b.support(Vec4::UnitX()) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(b.diameter() == doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(ConvexBody::ball({0, 0, 0, 0}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(b.outward_normal({1.0, 0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("normals agree with finite differences of the signed distance") {
  const ConvexBody e =
      ConvexBody::ellipsoid({0.1, -0.2, 0.0, 0.3}, Vec4{1.5, 0.9, 1.1, 0.7});
  const ConvexBody q = quartic_bump_body();
  const double h = 1e-5;
  for (const ConvexBody* body : {&e, &q}) {
    for (const Vec4& dir : s3_lattice(24)) {
      const PointC2 p = body->boundary_point(dir);
      const PointC2 n = body->outward_normal(p);
      Vec4 fd;
      for (int i = 0; i < 4; ++i) {
        const Vec4 ei = Vec4::Unit(i);
        fd[i] = (body->signed_boundary_distance(PointC2::from_vec4(p.to_vec4() + h * ei)) -
                 body->signed_boundary_distance(PointC2::from_vec4(p.to_vec4() - h * ei))) /
                (2.0 * h);
      }
      CHECK((fd.normalized() - n.to_vec4()).norm() < 1e-5);
    }
  }
}

TEST_CASE("principal curvatures match the quadric-fit oracle") {
  const ConvexBody e = ConvexBody::ellipsoid({0, 0, 0, 0}, Vec4{2.0, 1.0, 1.0, 1.0});
  const PointC2 tip{2.0, 0.0, 0.0, 0.0};
  const Eigen::Vector3d at_tip = e.principal_curvatures(tip);
  CHECK(at_tip.maxCoeff() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(at_tip.minCoeff() == doctest::Approx(2.0).epsilon(1e-10));

  const ConvexBody q = quartic_bump_body();
  for (const Vec4& dir : s3_lattice(8)) {
    const PointC2 p = q.boundary_point(dir);
    const Eigen::Vector3d exact = q.principal_curvatures(p);
    const Eigen::Vector3d fit = quadric_curvatures(q, p, 2e-3);
    for (int i = 0; i < 3; ++i)
      CHECK(fit[i] == doctest::Approx(exact[i]).epsilon(2e-4));
  }
}

TEST_CASE("kappa_max of the long ellipsoid is the tip curvature") {
  const ConvexBody e = ConvexBody::ellipsoid({0, 0, 0, 0}, Vec4{2.0, 1.0, 1.0, 1.0});
  CHECK(e.kappa_max() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("boundary points sit at gauge one") {
  const ConvexBody e =
      ConvexBody::ellipsoid({0.2, 0.0, -0.1, 0.0}, Vec4{1.4, 1.0, 0.9, 1.2});
  const ConvexBody q = quartic_bump_body();
  const ConvexBody o = e.parallel(0.4);
  for (const ConvexBody* body : {&e, &q, &o}) {
    for (const Vec4& dir : s3_lattice(16)) {
      CHECK(body->gauge(body->boundary_point(dir)) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("parallel bodies: closed ball form and degeneracy") {
  const ConvexBody b = ConvexBody::ball({0, 0, 0, 0}, 1.0);
  const ConvexBody grown = b.parallel(0.5);
  CHECK(grown.kind() == ConvexBody::Kind::Ball);
  CHECK(grown.radius() == doctest::Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(b.parallel(-1.0), std::invalid_argument);
}

TEST_CASE("parallel curvature identity kappa/(1+t*kappa)") {
  const ConvexBody ball = ConvexBody::ball({0, 0, 0, 0}, 2.0);
  const ConvexBody ell =
      ConvexBody::ellipsoid({0, 0, 0, 0}, Vec4{1.2, 1.0, 1.0, 1.0});
  for (const ConvexBody* body : {&ball, &ell}) {
    const double k = body->kappa_max();
    for (double t : {-0.5, 0.5, 1.0, 2.0}) {
      const double expected = k / (1.0 + t * k);
      CHECK(body->parallel(t).kappa_max() ==
            doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("projection returns the nearest boundary point") {
  const ConvexBody e = ConvexBody::ellipsoid({0, 0, 0, 0}, Vec4{1.5, 0.8, 1.0, 1.2});
  for (int i = 0; i < 40; ++i) {
    const PointC2 qp = random_point(1.4);
    const PointC2 proj = e.project_to_boundary(qp);
    CHECK(e.gauge(proj) == doctest::Approx(1.0).epsilon(1e-9));
    const double d = (qp - proj).norm();
    // No sampled boundary point can be closer.
    for (const Vec4& dir : s3_lattice(64)) {
      CHECK((qp - e.boundary_point(dir)).norm() >= d - 1e-9);
    }
  }
}

TEST_CASE("dist_pair closed forms and sampled paths agree") {
  const ConvexBody b1 = ConvexBody::ball({0, 0, 0, 0}, 1.0);
  const ConvexBody b2 = ConvexBody::ball({0, 0, 0, 0}, 2.0);
  CHECK(dist_pair(b1, b2) == doctest::Approx(1.0).epsilon(1e-12));

  const ConvexBody shifted = ConvexBody::ball({0.5, 0.0, 0.0, 0.0}, 3.0);
  CHECK(dist_pair(b1, shifted) == doctest::Approx(1.5).epsilon(1e-12));

  // Sampled path vs dense brute force for an ellipsoid pair.
  const ConvexBody inner = ConvexBody::ellipsoid({0, 0, 0, 0}, Vec4{0.9, 0.7, 0.8, 0.6});
  const ConvexBody outer = ConvexBody::ellipsoid({0.1, 0.0, 0.0, 0.0}, Vec4{2.0, 1.8, 2.2, 1.9});
  const double fast = dist_pair(inner, outer);
  double brute = 1e300;
  for (const Vec4& dir : s3_lattice(20000)) {
    brute = std::min(brute,
                     inner.signed_boundary_distance(outer.boundary_point(dir)));
  }
  CHECK(fast <= brute + 1e-9);
  CHECK(fast >= brute - 5e-3);  // brute force is only lattice-accurate

  CHECK_THROWS_AS(dist_pair(b2, b1), std::invalid_argument);
}

TEST_CASE("dee of concentric unit and double ball is 2/sqrt(3)") {
  const ConvexBody b1 = ConvexBody::ball({0, 0, 0, 0}, 1.0);
  const ConvexBody b2 = ConvexBody::ball({0, 0, 0, 0}, 2.0);
  const PairMetrics m = dee(b1, b2);
  CHECK(m.dist == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.kappa == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.dee == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("dee strictly dominates dist on random nested pairs") {
  for (int i = 0; i < 200; ++i) {
    const double r = uniform(0.4, 1.5);
    const PointC2 c = random_point(0.3);
    const ConvexBody inner =
        (i % 3 == 0)
            ? ConvexBody::ellipsoid(c, Vec4{r, 0.8 * r, 1.1 * r, 0.9 * r})
            : ConvexBody::ball(c, r);
    const double pad = uniform(0.2, 2.0);
    const ConvexBody outer = ConvexBody::ball(
        {0, 0, 0, 0}, c.norm() + 1.2 * r + pad);
    const PairMetrics m = dee(inner, outer);
    CHECK(m.dee > m.dist);
  }
}

TEST_CASE("sqrt(dist)/dee approaches sqrt(2 kappa) for thin shells") {
  const ConvexBody b1 = ConvexBody::ball({0, 0, 0, 0}, 1.0);
  for (auto [t, tol] : {std::pair{1e-4, 1e-2}, std::pair{1e-6, 1e-3}}) {
    const ConvexBody b2 = ConvexBody::ball({0, 0, 0, 0}, 1.0 + t);
    const PairMetrics m = dee(b1, b2);
    const double ratio = std::sqrt(m.dist) / m.dee;
    CHECK(std::abs(ratio / std::sqrt(2.0 * m.kappa) - 1.0) < tol);
  }
}

TEST_CASE("hausdorff on hand-computed clouds") {
  const std::vector<PointC2> a{{0.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}};
  const std::vector<PointC2> b{{0.0, 0.0, 0.0, 0.0}, {4.0, 0.0, 0.0, 0.0}};
  CHECK(hausdorff(a, b) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(hausdorff(a, a) == doctest::Approx(0.0));
  CHECK_THROWS_AS(hausdorff({}, b), std::invalid_argument);
}

TEST_CASE("refine_pair on balls (1,2): harmonic threshold forces m = 4") {
  const ConvexBody b1 = ConvexBody::ball({0, 0, 0, 0}, 1.0);
  const ConvexBody b2 = ConvexBody::ball({0, 0, 0, 0}, 2.0);
  const RefineChain rc = refine_pair(b1, b2);
  CHECK(rc.threshold ==
        doctest::Approx(std::sqrt(1.0 + M_PI * M_PI / 3.0)).epsilon(1e-12));
  CHECK(rc.m == 4);
  CHECK(rc.offsets[0] == doctest::Approx(6.0 / (M_PI * M_PI)).epsilon(1e-12));
  CHECK(rc.offsets[3] ==
        doctest::Approx(6.0 / (M_PI * M_PI) * (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0))
            .epsilon(1e-12));
  CHECK(rc.offsets[0] == doctest::Approx(0.60793).epsilon(1e-4));
  CHECK(rc.offsets[3] == doctest::Approx(0.86551).epsilon(1e-4));
  CHECK(rc.dee_sum >= 1.0);
  // Chain curvature follows kappa/(1 + d_a kappa) exactly for balls.
  for (int a = 1; a <= rc.m; ++a) {
    CHECK(rc.chain[a].kappa_max() ==
          doctest::Approx(1.0 / (1.0 + rc.offsets[a - 1])).epsilon(1e-12));
  }
  // Distances between consecutive chain members are offset differences.
  CHECK(rc.steps[1].dist ==
        doctest::Approx(rc.offsets[1] - rc.offsets[0]).epsilon(1e-12));
}

TEST_CASE("refine_pair chain stays strictly nested") {
  const ConvexBody inner = ConvexBody::ellipsoid({0, 0, 0, 0}, Vec4{1.0, 0.9, 0.8, 1.1});
  const ConvexBody outer = ConvexBody::ball({0, 0, 0, 0}, 2.6);
  const RefineChain rc = refine_pair(inner, outer);
  CHECK(rc.dee_sum >= 1.0);
  for (std::size_t i = 0; i + 1 < rc.chain.size(); ++i) {
    for (const Vec4& dir : s3_lattice(64)) {
      CHECK(rc.chain[i + 1].contains(rc.chain[i].boundary_point(dir)));
    }
  }
}

TEST_CASE("d_proper_sequence reaches its target and reports metrics") {
  std::vector<ConvexBody> balls;
  for (double r : {1.0, 2.0, 3.0, 4.0}) balls.push_back(ConvexBody::ball({0, 0, 0, 0}, r));
  const DProperSequence seq = d_proper_sequence(balls, 3.0);
  CHECK(seq.reached);
  CHECK(seq.total >= 3.0);
  CHECK(seq.pairs_used <= 3);
  CHECK(seq.partial_sums.size() == seq.steps.size());
  for (std::size_t i = 1; i < seq.partial_sums.size(); ++i)
    CHECK(seq.partial_sums[i] > seq.partial_sums[i - 1]);
  for (std::size_t i = 0; i + 1 < seq.bodies.size(); ++i) {
    for (const Vec4& dir : s3_lattice(32))
      CHECK(seq.bodies[i + 1].contains(seq.bodies[i].boundary_point(dir)));
  }

  const DProperSequence one = d_proper_sequence(
      {ConvexBody::ball({0, 0, 0, 0}, 1.0), ConvexBody::ball({0, 0, 0, 0}, 2.0)}, 1.0);
  CHECK(one.reached);
  CHECK(one.pairs_used == 1);

  CHECK_THROWS_AS(d_proper_sequence({balls[0]}, 1.0), std::invalid_argument);
}

TEST_CASE("body serialization round-trips exactly") {
  const ConvexBody b = ConvexBody::ball({0.1, -0.25, 1.0 / 3.0, 0.0}, 1.75);
  const ConvexBody b2 = ConvexBody::from_text(b.to_text());
  CHECK((b.center() - b2.center()).norm() == 0.0);
  CHECK(b.radius() == b2.radius());

  const ConvexBody e = ConvexBody::ellipsoid({0.2, 0.0, -0.7, 0.05}, Vec4{1.5, 0.9, 1.1, 0.7});
  const ConvexBody e2 = ConvexBody::from_text(e.to_text());
  CHECK(e2.kind() == ConvexBody::Kind::Ellipsoid);
  for (const Vec4& dir : s3_lattice(16))
    CHECK((e.boundary_point(dir) - e2.boundary_point(dir)).norm() == 0.0);

  const ConvexBody o = e.parallel(0.3);
  const ConvexBody o2 = ConvexBody::from_text(o.to_text());
  CHECK(o2.kind() == ConvexBody::Kind::Offset);
  for (const Vec4& dir : s3_lattice(8))
    CHECK((o.boundary_point(dir) - o2.boundary_point(dir)).norm() < 1e-13);

  CHECK_THROWS_AS(quartic_bump_body().to_text(), std::invalid_argument);
}
