#include "curvelab/curve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace curvelab {
namespace {

constexpr double kPi = std::numbers::pi;

Complex ipow(Complex z, int n) {
  if (n < 0) return 1.0 / ipow(z, -n);
  Complex r = 1.0;
  while (n) {
    if (n & 1) r *= z;
    z *= z;
    n >>= 1;
  }
  return r;
}

Complex eval_series(const std::vector<Complex>& c, int low, Complex z) {
  Complex h = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) h = h * z + *it;
  return low == 0 ? h : h * ipow(z, low);
}

Complex eval_series_deriv(const std::vector<Complex>& c, int low, Complex z) {
  if (low == 0) {
    Complex h = 0.0;
    for (int k = int(c.size()) - 1; k >= 1; --k) h = h * z + c[std::size_t(k)] * double(k);
    return h;
  }
  Complex h = 0.0;
  for (int k = int(c.size()) - 1; k >= 0; --k)
    h = h * z + c[std::size_t(k)] * double(k + low);
  return h * ipow(z, low - 1);
}

double simpson_slice(double fa, double fm, double fb, double len) {
  return len * (fa + 4.0 * fm + fb) / 6.0;
}

template <typename F>
double adaptive_simpson(const F& f, double a, double fa, double m, double fm, double b,
                        double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_slice(fa, flm, fm, m - a);
  const double right = simpson_slice(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) < 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

void AnalyticMap::finish_construction() {
  for (int c = 0; c < 2; ++c) {
    for (const Complex& v : coef_[c]) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw std::invalid_argument("AnalyticMap: non-finite coefficient");
    }
  }
  if (domain_ == Domain::Disc) {
    if (!(rho_ > 0.0)) throw std::invalid_argument("AnalyticMap: disc radius must be positive");
  } else {
    if (!(r_ > 0.0) || !(r_ < rho_))
      throw std::invalid_argument("AnalyticMap: annulus needs 0 < r < R");
  }

  double worst = std::numeric_limits<double>::infinity();
  const int n_rad = 24, n_ang = 64;
  for (int j = 0; j <= n_rad; ++j) {
    const double rad = domain_ == Domain::Disc
                           ? rho_ * double(j) / double(n_rad)
                           : r_ + (rho_ - r_) * double(j) / double(n_rad);
    for (int i = 0; i < n_ang; ++i) {
      const double th = 2.0 * kPi * double(i) / double(n_ang);
      worst = std::min(worst, derivative(std::polar(rad, th)).norm());
    }
  }
  min_immersion_ = worst;
  if (!(worst > 1e-9))
    throw std::invalid_argument("AnalyticMap: not an immersion (min |X'| = " +
                                std::to_string(worst) + ")");
}

AnalyticMap AnalyticMap::disc_map(double rho, std::vector<Complex> c1,
                                  std::vector<Complex> c2) {
  AnalyticMap m;
  m.domain_ = Domain::Disc;
  m.rho_ = rho;
  m.coef_[0] = std::move(c1);
  m.coef_[1] = std::move(c2);
  m.finish_construction();
  return m;
}

AnalyticMap AnalyticMap::annulus_map(double r_inner, double r_outer,
                                     std::vector<Complex> c1, std::vector<Complex> c2,
                                     int low1, int low2) {
  AnalyticMap m;
  m.domain_ = Domain::Annulus;
  m.r_ = r_inner;
  m.rho_ = r_outer;
  m.coef_[0] = std::move(c1);
  m.coef_[1] = std::move(c2);
  m.low_[0] = low1;
  m.low_[1] = low2;
  m.finish_construction();
  return m;
}

double AnalyticMap::disc_radius() const {
  if (domain_ != Domain::Disc) throw std::logic_error("disc_radius: not a disc map");
  return rho_;
}

double AnalyticMap::inner_radius() const {
  if (domain_ != Domain::Annulus) throw std::logic_error("inner_radius: not an annulus map");
  return r_;
}

double AnalyticMap::outer_radius() const { return rho_; }

bool AnalyticMap::in_domain(Complex z, double tol) const {
  const double a = std::abs(z);
  if (domain_ == Domain::Disc) return a <= rho_ + tol;
  return a >= r_ - tol && a <= rho_ + tol;
}

PointC2 AnalyticMap::value(Complex z) const {
  return {eval_series(coef_[0], low_[0], z), eval_series(coef_[1], low_[1], z)};
}

PointC2 AnalyticMap::derivative(Complex z) const {
  return {eval_series_deriv(coef_[0], low_[0], z),
          eval_series_deriv(coef_[1], low_[1], z)};
}

double AnalyticMap::boundary_circle_radius(std::size_t i) const {
  if (domain_ == Domain::Disc) {
    if (i != 0) throw std::out_of_range("boundary_circle_radius: disc has one circle");
    return rho_;
  }
  if (i == 0) return rho_;
  if (i == 1) return r_;
  throw std::out_of_range("boundary_circle_radius: annulus has two circles");
}

std::string curve_csv(const AnalyticMap& map, const std::vector<Complex>& params) {
  std::string out = "param_re,param_im,re1,im1,re2,im2\n";
  char line[256];
  for (const Complex& z : params) {
    const PointC2 w = map.value(z);
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", z.real(),
                  z.imag(), w.z1.real(), w.z1.imag(), w.z2.real(), w.z2.imag());
    out += line;
  }
  return out;
}

double c1_distance(const AnalyticMap& f, const AnalyticMap& g,
                   const std::vector<Complex>& samples) {
  const bool same =
      f.domain() == g.domain() && std::abs(f.outer_radius() - g.outer_radius()) < 1e-12 &&
      (f.domain() == AnalyticMap::Domain::Disc ||
       std::abs(f.inner_radius() - g.inner_radius()) < 1e-12);
  if (!same) throw std::invalid_argument("c1_distance: domain mismatch");
  if (samples.empty()) throw std::invalid_argument("c1_distance: empty sample set");
  double worst = 0.0;
  for (const Complex& z : samples) {
    worst = std::max(worst, (f.value(z) - g.value(z)).norm());
    worst = std::max(worst, (f.derivative(z) - g.derivative(z)).norm());
  }
  return worst;
}

double image_length(const AnalyticMap& map, const std::vector<Complex>& path) {
  if (path.size() < 2) throw std::invalid_argument("image_length: need a polyline");
  double total = 0.0;
  for (std::size_t s = 1; s < path.size(); ++s) {
    const Complex a = path[s - 1];
    const Complex b = path[s];
    for (int i = 0; i <= 8; ++i) {
      if (!map.in_domain(a + (b - a) * (double(i) / 8.0), 1e-7))
        throw std::invalid_argument("image_length: path exits the domain");
    }
    auto speed = [&](double t) {
      return map.derivative(a + (b - a) * t).norm() * std::abs(b - a);
    };
    const double fa = speed(0.0), fm = speed(0.5), fb = speed(1.0);
    total += adaptive_simpson(speed, 0.0, fa, 0.5, fm, 1.0, fb,
                              simpson_slice(fa, fm, fb, 1.0), 1e-11, 24);
  }
  return total;
}

std::vector<DoublePoint> double_points(const AnalyticMap& map, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("double_points: tol must be positive");
  const int n = 200;
  const double big_r = map.outer_radius();
  const double h = 2.0 * big_r / double(n - 1);

  std::vector<Complex> params;
  std::vector<PointC2> images;
  std::vector<double> speeds;
  params.reserve(std::size_t(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Complex z(-big_r + double(i) * h, -big_r + double(j) * h);
      if (!map.in_domain(z, 1e-12)) continue;
      params.push_back(z);
      images.push_back(map.value(z));
      speeds.push_back(map.derivative(z).norm());
    }
  }
  double image_scale = 1.0, max_speed = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    image_scale = std::max(image_scale, images[i].norm());
    max_speed = std::max(max_speed, speeds[i]);
  }

  // image-space hash for candidate pairing
  const double cell = std::max(10.0 * tol, 2.6 * h * max_speed);
  struct Key4 {
    int a, b, c, d;
    bool operator==(const Key4&) const = default;
  };
  struct Key4Hash {
    std::size_t operator()(const Key4& k) const {
      std::size_t s = 14695981039346656037ull;
      for (int v : {k.a, k.b, k.c, k.d}) {
        s ^= std::size_t(std::uint32_t(v));
        s *= 1099511628211ull;
      }
      return s;
    }
  };
  std::unordered_map<Key4, std::vector<std::uint32_t>, Key4Hash> hash;
  auto key_of = [&](const PointC2& p) {
    const Vec4 v = p.to_vec4();
    return Key4{int(std::floor(v(0) / cell)), int(std::floor(v(1) / cell)),
                int(std::floor(v(2) / cell)), int(std::floor(v(3) / cell))};
  };
  for (std::size_t i = 0; i < params.size(); ++i) hash[key_of(images[i])].push_back(std::uint32_t(i));

  const double sep = std::max(4.0 * h, 1e-3 * big_r);
  const double conv_tol = 1e-13 * image_scale;

  auto refine = [&](Complex p, Complex q) -> std::optional<std::pair<Complex, Complex>> {
    PointC2 f = map.value(p) - map.value(q);
    for (int it = 0; it < 80; ++it) {
      if (f.norm() < conv_tol) break;
      const PointC2 dp_ = map.derivative(p);
      const PointC2 dq_ = map.derivative(q);
      const Complex j00 = dp_.z1, j01 = -dq_.z1, j10 = dp_.z2, j11 = -dq_.z2;
      const Complex det = j00 * j11 - j01 * j10;
      if (std::abs(det) < 1e-14) return std::nullopt;
      const Complex s1 = (j11 * f.z1 - j01 * f.z2) / det;
      const Complex s2 = (j00 * f.z2 - j10 * f.z1) / det;
      bool moved = false;
      for (double lam = 1.0; lam > 1.0 / 512.0; lam *= 0.5) {
        const Complex pn = p - lam * s1;
        const Complex qn = q - lam * s2;
        const PointC2 fn = map.value(pn) - map.value(qn);
        if (fn.norm() < f.norm() * (1.0 - 0.25 * lam)) {
          p = pn;
          q = qn;
          f = fn;
          moved = true;
          break;
        }
      }
      if (!moved) return std::nullopt;
    }
    if (!(f.norm() < conv_tol)) return std::nullopt;
    if (!map.in_domain(p, 1e-9) || !map.in_domain(q, 1e-9)) return std::nullopt;
    if (std::abs(p - q) <= sep) return std::nullopt;
    return std::make_pair(p, q);
  };

  auto lex_less = [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  };

  std::vector<DoublePoint> found;
  auto record = [&](Complex p, Complex q) {
    if (lex_less(q, p)) std::swap(p, q);
    for (const DoublePoint& d : found) {
      if (std::abs(d.p - p) < 1e-6 && std::abs(d.q - q) < 1e-6) return;
    }
    DoublePoint d;
    d.p = p;
    d.q = q;
    d.w = (map.value(p) + map.value(q)) * 0.5;
    const PointC2 a = map.derivative(p);
    const PointC2 b = map.derivative(q);
    d.normal_crossing =
        std::abs(a.z1 * b.z2 - a.z2 * b.z1) > 1e-8 * a.norm() * b.norm();
    found.push_back(d);
    if (found.size() > 64)
      throw std::runtime_error("double_points: coincidence set is not generic");
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Key4 base = key_of(images[i]);
    for (int da = -1; da <= 1; ++da) {
      for (int db = -1; db <= 1; ++db) {
        for (int dc = -1; dc <= 1; ++dc) {
          for (int dd = -1; dd <= 1; ++dd) {
            const auto it = hash.find(Key4{base.a + da, base.b + db, base.c + dc, base.d + dd});
            if (it == hash.end()) continue;
            for (std::uint32_t j : it->second) {
              if (j <= i) continue;
              if (std::abs(params[i] - params[j]) <= sep) continue;
              const double capture = std::max(
                  10.0 * tol, 2.6 * h * std::max(speeds[i], speeds[j]));
              if ((images[i] - images[j]).squared_norm() > capture * capture) continue;
              if (auto hit = refine(params[i], params[j])) record(hit->first, hit->second);
            }
          }
        }
      }
    }
  }

  std::sort(found.begin(), found.end(), [&](const DoublePoint& a, const DoublePoint& b) {
    if (a.p.real() != b.p.real()) return a.p.real() < b.p.real();
    if (a.p.imag() != b.p.imag()) return a.p.imag() < b.p.imag();
    if (a.q.real() != b.q.real()) return a.q.real() < b.q.real();
    return a.q.imag() < b.q.imag();
  });
  return found;
}

ImagePathResult image_distance_sets(const AnalyticMap& map,
                                    const std::vector<Complex>& sources,
                                    const std::vector<Complex>& sinks, double spacing,
                                    const std::vector<DoublePoint>& glue) {
  if (!(spacing > 0.0)) throw std::invalid_argument("image_distance: spacing must be positive");
  if (sources.empty() || sinks.empty())
    throw std::invalid_argument("image_distance: empty endpoint set");
  for (const Complex& z : sources)
    if (!map.in_domain(z, 1e-9)) throw std::invalid_argument("image_distance: source outside domain");
  for (const Complex& z : sinks)
    if (!map.in_domain(z, 1e-9)) throw std::invalid_argument("image_distance: sink outside domain");

  const double big_r = map.outer_radius();
  const int n = int(2.0 * big_r / spacing) + 2;
  std::vector<Complex> nodes;
  std::vector<int> grid_id(std::size_t(n) * n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Complex z(-big_r + double(i) * spacing, -big_r + double(j) * spacing);
      if (!map.in_domain(z, 1e-12)) continue;
      grid_id[std::size_t(i) * n + j] = int(nodes.size());
      nodes.push_back(z);
    }
  }
  const std::size_t lattice_count = nodes.size();

  auto add_extra = [&](Complex z) {
    nodes.push_back(z);
    return int(nodes.size()) - 1;
  };
  std::vector<int> source_nodes, sink_nodes;
  for (const Complex& z : sources) source_nodes.push_back(add_extra(z));
  for (const Complex& z : sinks) sink_nodes.push_back(add_extra(z));
  std::vector<std::pair<int, int>> glue_nodes;
  for (const DoublePoint& d : glue) glue_nodes.push_back({add_extra(d.p), add_extra(d.q)});

  auto edge_weight = [&](Complex a, Complex b) {
    const Complex m = 0.5 * (a + b);
    return std::abs(b - a) *
           (map.derivative(a).norm() + 4.0 * map.derivative(m).norm() +
            map.derivative(b).norm()) /
           6.0;
  };
  auto segment_in_domain = [&](Complex a, Complex b) {
    for (int s = 1; s < 4; ++s) {
      if (!map.in_domain(a + (b - a) * (double(s) / 4.0), 1e-9)) return false;
    }
    return true;
  };

  std::vector<std::vector<std::pair<int, double>>> adj(nodes.size());
  auto link = [&](int a, int b, double w) {
    adj[std::size_t(a)].push_back({b, w});
    adj[std::size_t(b)].push_back({a, w});
  };

  // knight-move neighborhood keeps the metric overshoot below 3 percent
  const int moves[8][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1},
                           {2, 1}, {2, -1}, {1, 2}, {1, -2}};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int a = grid_id[std::size_t(i) * n + j];
      if (a < 0) continue;
      for (const auto& mv : moves) {
        const int i2 = i + mv[0], j2 = j + mv[1];
        if (i2 < 0 || i2 >= n || j2 < 0 || j2 >= n) continue;
        const int b = grid_id[std::size_t(i2) * n + j2];
        if (b < 0) continue;
        if (!segment_in_domain(nodes[std::size_t(a)], nodes[std::size_t(b)])) continue;
        link(a, b, edge_weight(nodes[std::size_t(a)], nodes[std::size_t(b)]));
      }
    }
  }
  // extras connect to anything nearby
  for (std::size_t e = lattice_count; e < nodes.size(); ++e) {
    for (std::size_t o = 0; o < nodes.size(); ++o) {
      if (o == e) continue;
      const double gap = std::abs(nodes[e] - nodes[o]);
      if (gap > 2.05 * spacing) continue;
      if (!segment_in_domain(nodes[e], nodes[o])) continue;
      adj[e].push_back({int(o), edge_weight(nodes[e], nodes[o])});
      adj[o].push_back({int(e), edge_weight(nodes[e], nodes[o])});
    }
  }
  for (const auto& [a, b] : glue_nodes) link(a, b, 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nodes.size(), inf);
  std::vector<int> parent(nodes.size(), -1);
  using QItem = std::pair<double, int>;
  std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> pq;
  for (int s : source_nodes) {
    if (dist[std::size_t(s)] > 0.0) {
      dist[std::size_t(s)] = 0.0;
      pq.push({0.0, s});
    }
  }
  while (!pq.empty()) {
    const auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[std::size_t(i)]) continue;
    for (const auto& [j, w] : adj[std::size_t(i)]) {
      if (d + w < dist[std::size_t(j)]) {
        dist[std::size_t(j)] = d + w;
        parent[std::size_t(j)] = i;
        pq.push({d + w, j});
      }
    }
  }

  ImagePathResult res;
  res.value = inf;
  int best = -1;
  for (int t : sink_nodes) {
    if (dist[std::size_t(t)] < res.value) {
      res.value = dist[std::size_t(t)];
      best = t;
    }
  }
  if (best < 0 || res.value == inf) return res;
  res.reachable = true;
  for (int at = best; at >= 0; at = parent[std::size_t(at)]) res.params.push_back(nodes[std::size_t(at)]);
  std::reverse(res.params.begin(), res.params.end());
  return res;
}

double image_distance(const AnalyticMap& map, Complex p, Complex q, double spacing) {
  const std::vector<DoublePoint> glue = double_points(map, 1e-6);
  return image_distance_sets(map, {p}, {q}, spacing, glue).value;
}

bool transversal_boundary(const AnalyticMap& map, const ConvexBody& d_body,
                          double boundary_tol, double angle_tol) {
  const int n = 512;
  for (std::size_t c = 0; c < map.boundary_circle_count(); ++c) {
    const double rad = map.boundary_circle_radius(c);
    for (int i = 0; i < n; ++i) {
      const Complex z = std::polar(rad, 2.0 * kPi * double(i) / double(n));
      const PointC2 w = map.value(z);
      const double sd = d_body.signed_boundary_distance(w);
      if (std::abs(sd) > boundary_tol)
        throw std::invalid_argument(
            "transversal_boundary: boundary image is off Fr D (offset " +
            std::to_string(sd) + ")");
      const PointC2 nu = d_body.outward_normal(d_body.project_to_boundary(w));
      const PointC2 dw = map.derivative(z);
      if (std::abs(hermitian(dw, nu)) / dw.norm() < angle_tol) return false;
    }
  }
  return true;
}

PartitionCheck validate_partition(const BoundaryPartition& part, const AnalyticMap& map,
                                  const TangentNet& net, const ConvexBody& d_body,
                                  double delta) {
  if (part.circles.size() != map.boundary_circle_count())
    return {false, "circle count mismatch"};
  for (std::size_t c = 0; c < part.circles.size(); ++c) {
    const CirclePartition& cp = part.circles[c];
    const std::size_t jc = cp.arcs.size();
    if (int(jc) != part.j || part.j < 3) return {false, "arc count mismatch"};
    for (std::size_t a = 0; a < jc; ++a) {
      const BoundaryArcInterval& arc = cp.arcs[a];
      if (!(arc.t1 > arc.t0)) return {false, "empty arc interval"};
      const BoundaryArcInterval& next = cp.arcs[(a + 1) % jc];
      const double wrap = (a + 1 == jc) ? 2.0 * kPi : 0.0;
      if (std::abs(next.t0 + wrap - arc.t1) > 1e-9)
        return {false, "consecutive arcs do not share a junction"};
      if (std::abs(arc.q0 - std::polar(cp.radius, arc.t0)) > 1e-9 ||
          std::abs(arc.q1 - std::polar(cp.radius, arc.t1)) > 1e-9)
        return {false, "junction point off the parameter circle"};
      if (arc.slab >= net.size()) return {false, "slab index out of range"};
      const Slab s = net.slab(arc.slab);
      for (int k = 0; k <= 64; ++k) {
        const double t = arc.t0 + (arc.t1 - arc.t0) * double(k) / 64.0;
        const PointC2 w = map.value(std::polar(cp.radius, t));
        if (!(std::abs(s.coordinate(w)) < net.radius + 1e-12))
          return {false, "arc " + std::to_string(a) + " leaves its slab"};
        if (!(d_body.signed_boundary_distance(w) < delta + 1e-12))
          return {false, "arc " + std::to_string(a) + " leaves D_delta"};
      }
    }
    double span = 0.0;
    for (const BoundaryArcInterval& arc : cp.arcs) span += arc.t1 - arc.t0;
    if (std::abs(span - 2.0 * kPi) > 1e-9) return {false, "arcs do not cover the circle"};
  }
  return {true, ""};
}

BoundaryPartition split_boundary(const AnalyticMap& map, const TangentNet& net,
                                 const ConvexBody& d_body, double delta, double phase0) {
  // hypothesis: boundary image inside T cap D_delta
  for (std::size_t c = 0; c < map.boundary_circle_count(); ++c) {
    const double rad = map.boundary_circle_radius(c);
    for (int i = 0; i < 1024; ++i) {
      const Complex z = std::polar(rad, 2.0 * kPi * double(i) / 1024.0);
      const PointC2 w = map.value(z);
      if (!net_contains(net, w) || !(d_body.signed_boundary_distance(w) < delta))
        throw std::invalid_argument(
            "split_boundary: boundary image leaves the slab family near angle " +
            std::to_string(2.0 * kPi * double(i) / 1024.0));
    }
  }

  for (int j_try = 3; j_try <= 3072; j_try *= 2) {
    BoundaryPartition part;
    part.j = j_try;
    bool ok = true;
    for (std::size_t c = 0; c < map.boundary_circle_count() && ok; ++c) {
      const double rad = map.boundary_circle_radius(c);
      CirclePartition cp;
      cp.radius = rad;
      std::vector<double> cuts(std::size_t(j_try) + 1);
      std::vector<Complex> qs(std::size_t(j_try) + 1);
      for (int a = 0; a <= j_try; ++a) {
        cuts[std::size_t(a)] = phase0 + 2.0 * kPi * double(a) / double(j_try);
        qs[std::size_t(a)] = std::polar(rad, cuts[std::size_t(a)]);
      }
      for (int a = 0; a < j_try && ok; ++a) {
        std::vector<PointC2> samples;
        for (int k = 0; k <= 32; ++k) {
          const double t =
              cuts[std::size_t(a)] + (cuts[std::size_t(a) + 1] - cuts[std::size_t(a)]) * double(k) / 32.0;
          samples.push_back(map.value(std::polar(rad, t)));
        }
        PointC2 mid = samples[16];
        long best = -1;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < net.size(); ++k) {
          const Slab s = net.slab(k);
          double worst = 0.0;
          for (const PointC2& w : samples) worst = std::max(worst, std::abs(s.coordinate(w)));
          if (worst >= net.radius) continue;
          const double gap = (s.base - mid).norm();
          if (gap < best_gap) {
            best_gap = gap;
            best = long(k);
          }
        }
        if (best < 0) {
          ok = false;
          break;
        }
        BoundaryArcInterval arc;
        arc.t0 = cuts[std::size_t(a)];
        arc.t1 = cuts[std::size_t(a) + 1];
        arc.q0 = qs[std::size_t(a)];
        arc.q1 = qs[std::size_t(a) + 1];
        arc.slab = std::size_t(best);
        cp.arcs.push_back(arc);
      }
      part.circles.push_back(std::move(cp));
    }
    if (!ok) continue;
    if (validate_partition(part, map, net, d_body, delta).ok) return part;
  }
  throw std::runtime_error("split_boundary: no arc count up to 3072 fits the slab family");
}

std::string AnalyticMap::to_text() const {
  nlohmann::ordered_json j;
  j["schema"] = "curvelab-map/1";
  j["domain"] = domain_ == Domain::Disc ? "disc" : "annulus";
  j["rho"] = rho_;
  if (domain_ == Domain::Annulus) j["r"] = r_;
  j["low"] = {low_[0], low_[1]};
  for (int c = 0; c < 2; ++c) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const Complex& v : coef_[c]) arr.push_back({v.real(), v.imag()});
    j[c == 0 ? "coef1" : "coef2"] = std::move(arr);
  }
  return j.dump(2);
}

AnalyticMap AnalyticMap::from_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "curvelab-map/1")
    throw std::invalid_argument("AnalyticMap::from_text: unknown schema");
  auto coefs = [&](const char* key) {
    std::vector<Complex> c;
    for (const auto& v : j.at(key)) c.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    return c;
  };
  const std::string dom = j.at("domain").get<std::string>();
  if (dom == "disc") {
    if (j.at("low").at(0).get<int>() != 0 || j.at("low").at(1).get<int>() != 0)
      throw std::invalid_argument("AnalyticMap::from_text: disc maps need low = 0");
    return disc_map(j.at("rho").get<double>(), coefs("coef1"), coefs("coef2"));
  }
  if (dom == "annulus")
    return annulus_map(j.at("r").get<double>(), j.at("rho").get<double>(), coefs("coef1"),
                       coefs("coef2"), j.at("low").at(0).get<int>(),
                       j.at("low").at(1).get<int>());
  throw std::invalid_argument("AnalyticMap::from_text: unknown domain kind");
}

}  // namespace curvelab
