#include "curvelab/stretch.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace curvelab {

namespace {

constexpr double kPi = std::numbers::pi;

std::string zlabel(Complex z) {
  return "z = " + std::to_string(z.real()) + " + " + std::to_string(z.imag()) + "i";
}

bool full_span(const SectorPiece& pc) { return pc.t1 - pc.t0 >= 2.0 * kPi - 1e-9; }

// Polyline builders include the start point and exclude the end point, so
// chained pieces close up without duplicates.
void append_arc(std::vector<Complex>& pts, double r, double a0, double a1, double spacing) {
  auto n = std::max<std::size_t>(8, std::size_t(std::ceil(std::abs(a1 - a0) * r / spacing)));
  for (std::size_t k = 0; k < n; ++k)
    pts.push_back(std::polar(r, a0 + (a1 - a0) * double(k) / double(n)));
}

void append_segment(std::vector<Complex>& pts, Complex a, Complex b, double spacing) {
  auto n = std::max<std::size_t>(8, std::size_t(std::ceil(std::abs(b - a) / spacing)));
  for (std::size_t k = 0; k < n; ++k) pts.push_back(a + (b - a) * (double(k) / double(n)));
}

// Compactum side at constant arc-length margin from the sector edge:
// theta(r) = base + sgn_kw / r.
void append_k_side(std::vector<Complex>& pts, double r0, double r1, double base, double sgn_kw,
                   double spacing) {
  auto n = std::max<std::size_t>(8, std::size_t(std::ceil(std::abs(r1 - r0) / spacing)));
  for (std::size_t k = 0; k < n; ++k) {
    double r = r0 + (r1 - r0) * double(k) / double(n);
    pts.push_back(std::polar(r, base + sgn_kw / r));
  }
}

// Boundary of the kept compactum: the whole domain minus the open sector of
// the piece.  A full-circle sector keeps just the inner disc.
std::vector<Complex> e1_boundary(const SectorPiece& pc, double rho_in, double rho_out,
                                 double spacing) {
  std::vector<Complex> pts;
  if (full_span(pc)) {
    append_arc(pts, rho_in, 0.0, 2.0 * kPi, spacing);
    return pts;
  }
  append_arc(pts, rho_out, pc.t1, pc.t0 + 2.0 * kPi, spacing);
  append_segment(pts, std::polar(rho_out, pc.t0), std::polar(rho_in, pc.t0), spacing);
  append_arc(pts, rho_in, pc.t0, pc.t1, spacing);
  append_segment(pts, std::polar(rho_in, pc.t1), std::polar(rho_out, pc.t1), spacing);
  return pts;
}

// Boundary of the push compactum K.  The corner margin keeps an open channel
// between K and the sector edges, so K never encircles the kept region: a
// polynomial close to a constant on a surrounding ring would drag that
// constant inside by the maximum principle, and no fit degree could recover.
std::vector<Complex> k_boundary(const SectorPiece& pc, double rho_out, double spacing) {
  std::vector<Complex> pts;
  append_arc(pts, pc.k_r0, pc.t0 + pc.k_w / pc.k_r0, pc.t1 - pc.k_w / pc.k_r0, spacing);
  append_k_side(pts, pc.k_r0, rho_out, pc.t1, -pc.k_w, spacing);
  append_arc(pts, rho_out, pc.t1 - pc.k_w / rho_out, pc.t0 + pc.k_w / rho_out, spacing);
  append_k_side(pts, rho_out, pc.k_r0, pc.t0, pc.k_w, spacing);
  return pts;
}

// Closed sector minus the open compactum interior, plus the collar-facing
// frontier of K, where the slab condition must hold.
std::vector<Complex> collar_samples(const SectorPiece& pc, double rho_in, double rho_out) {
  std::vector<Complex> pts;
  const std::size_t nr = 30, nt = 64;
  for (std::size_t a = 0; a <= nr; ++a) {
    double r = rho_in + (rho_out - rho_in) * double(a) / double(nr);
    for (std::size_t b = 0; b <= nt; ++b) {
      double th = pc.t0 + (pc.t1 - pc.t0) * double(b) / double(nt);
      bool in_k = r > pc.k_r0 + 1e-9 && th > pc.t0 + pc.k_w / r + 1e-9 &&
                  th < pc.t1 - pc.k_w / r - 1e-9;
      if (!in_k) pts.push_back(std::polar(r, th));
    }
  }
  double spacing = (rho_out - rho_in) / 64.0;
  append_arc(pts, pc.k_r0, pc.t0 + pc.k_w / pc.k_r0, pc.t1 - pc.k_w / pc.k_r0, spacing);
  append_k_side(pts, pc.k_r0, rho_out, pc.t1, -pc.k_w, spacing);
  append_k_side(pts, rho_out, pc.k_r0, pc.t0, pc.k_w, spacing);
  return pts;
}

// Outer-circle arcs between the sector edge and K, the part of the rim whose
// image must clear the projection of the outer body.
std::vector<Complex> corner_arcs(const SectorPiece& pc, double rho_out) {
  std::vector<Complex> pts;
  double da = pc.k_w / rho_out;
  for (int k = 0; k <= 32; ++k) {
    double s = double(k) / 32.0;
    pts.push_back(std::polar(rho_out, pc.t0 + da * s));
    pts.push_back(std::polar(rho_out, pc.t1 - da * s));
  }
  return pts;
}

std::vector<Complex> k_samples(const SectorPiece& pc, double rho_out) {
  std::vector<Complex> pts;
  const std::size_t nr = 14, nt = 28;
  for (std::size_t a = 0; a <= nr; ++a) {
    double r = pc.k_r0 + (rho_out - pc.k_r0) * double(a) / double(nr);
    double a0 = pc.t0 + pc.k_w / r, a1 = pc.t1 - pc.k_w / r;
    for (std::size_t b = 0; b <= nt; ++b)
      pts.push_back(std::polar(r, a0 + (a1 - a0) * double(b) / double(nt)));
  }
  return pts;
}

PropertyCheck drift_check(const AnalyticMap& ynew, const AnalyticMap& yold,
                          const std::vector<Complex>& samples, double bound, int step) {
  PropertyCheck out{"1_n", true, 0.0, bound, true, step, {},
                    "C1 drift on the kept compactum; boundary sampling suffices by the "
                    "maximum principle"};
  bool first = true;
  for (Complex z : samples) {
    double v = std::max((ynew.value(z) - yold.value(z)).norm(),
                        (ynew.derivative(z) - yold.derivative(z)).norm());
    if (first || v > out.worst) {
      out.worst = v;
      out.where = z;
      first = false;
    }
  }
  out.ok = !first && out.worst < out.bound;
  return out;
}

PropertyCheck pairing_check(const AnalyticMap& ynew, const AnalyticMap& yold, const PointC2& w,
                            int step) {
  PropertyCheck out{"2_n", true, 0.0, 1e-12, true, step, {},
                    "normal-component coefficient drift; witness holds the coefficient index"};
  const auto& n1 = ynew.coef1();
  const auto& n2 = ynew.coef2();
  const auto& o1 = yold.coef1();
  const auto& o2 = yold.coef2();
  auto get = [](const std::vector<Complex>& c, std::size_t k) {
    return k < c.size() ? c[k] : Complex(0.0);
  };
  std::size_t len = std::max(std::max(n1.size(), n2.size()), std::max(o1.size(), o2.size()));
  for (std::size_t k = 0; k < len; ++k) {
    Complex d1 = get(n1, k) - get(o1, k);
    Complex d2 = get(n2, k) - get(o2, k);
    double v = std::abs(d1 * std::conj(w.z1) + d2 * std::conj(w.z2));
    if (v > out.worst) {
      out.worst = v;
      out.where = Complex(double(k), 0.0);
    }
  }
  out.ok = out.worst < out.bound;
  return out;
}

PropertyCheck collar_check(const AnalyticMap& y, const TangentNet& net,
                           const std::vector<SectorPiece>& pieces, double rho_in, double rho_out,
                           int step) {
  PropertyCheck out{"3_n", true, 0.0, net.radius, true, step, {},
                    "slab coordinate over the collars around the compacta"};
  bool first = true;
  for (const SectorPiece& pc : pieces) {
    Slab sl = net.slab(pc.slab);
    for (Complex z : collar_samples(pc, rho_in, rho_out)) {
      double v = std::abs(sl.coordinate(y.value(z)));
      if (first || v > out.worst) {
        out.worst = v;
        out.where = z;
        first = false;
      }
    }
  }
  out.ok = !first && out.worst < out.bound;
  return out;
}

PropertyCheck corner_check(const AnalyticMap& y, const TangentNet& net, const ConvexBody& dp,
                           const std::vector<SectorPiece>& pieces, double rho_out, int step) {
  PropertyCheck out{"4_n", true, 0.0, 0.0, false, step, {},
                    "projection clearance of the rim corners past the support interval"};
  bool first = true;
  for (const SectorPiece& pc : pieces) {
    std::vector<Complex> pts = corner_arcs(pc, rho_out);
    if (pts.empty()) continue;
    PointC2 jn = jmap(net.normals[pc.slab]);
    double sup_plus = dp.support(jn.to_vec4());
    double sup_minus = dp.support((-jn).to_vec4());
    for (Complex z : pts) {
      double s = dot(y.value(z), jn);
      double margin = std::max(s - sup_plus, -s - sup_minus);
      if (first || margin < out.worst) {
        out.worst = margin;
        out.where = z;
        first = false;
      }
    }
  }
  if (first) {
    out.worst = 1.0;
    out.note = "no corner samples (full-circle sectors)";
  }
  out.ok = out.worst > out.bound;
  return out;
}

PropertyCheck outside_check(const AnalyticMap& y, const ConvexBody& dp,
                            const std::vector<SectorPiece>& pieces, std::size_t upto,
                            double rho_out, int step) {
  PropertyCheck out{"5_n", true, 0.0, 0.0, false, step, {},
                    "signed distance outside the outer body on the pushed compacta"};
  bool first = true;
  for (std::size_t a = 0; a < upto && a < pieces.size(); ++a)
    for (Complex z : k_samples(pieces[a], rho_out)) {
      double v = dp.signed_boundary_distance(y.value(z));
      if (first || v < out.worst) {
        out.worst = v;
        out.where = z;
        first = false;
      }
    }
  out.ok = !first && out.worst > out.bound;
  return out;
}

PropertyCheck inner_check(const AnalyticMap& y, const ConvexBody& d, double rho_in, double delta,
                          int step) {
  // signed distance to a convex body is convex, so its holomorphic pullback
  // is subharmonic and the inner circle controls the inner disc
  PropertyCheck out{"6_n", true, 0.0, delta, true, step, {},
                    "inner-disc containment in the delta neighborhood"};
  bool first = true;
  for (int k = 0; k < 512; ++k) {
    Complex z = std::polar(rho_in, 2.0 * kPi * double(k) / 512.0);
    double v = d.signed_boundary_distance(y.value(z));
    if (first || v > out.worst) {
      out.worst = v;
      out.where = z;
      first = false;
    }
  }
  out.ok = out.worst < out.bound;
  return out;
}

// Monomial coefficients through values on the outer circle (an inverse DFT:
// exact on polynomials of the sampled degree, condition one).
std::vector<Complex> circle_coefficients(const std::function<Complex(Complex)>& f, int degree,
                                         double radius) {
  std::size_t n = 2 * std::size_t(degree + 1);
  std::vector<Complex> vals(n);
  for (std::size_t m = 0; m < n; ++m)
    vals[m] = f(std::polar(radius, 2.0 * kPi * double(m) / double(n)));
  std::vector<Complex> out(std::size_t(degree) + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t m = 0; m < n; ++m)
      acc += vals[m] * std::polar(1.0, -2.0 * kPi * double((k * m) % n) / double(n));
    out[k] = acc / (double(n) * std::pow(radius, double(k)));
  }
  return out;
}

// Support radius of the complex projection <<q, dir>> over the body, with the
// maximizing phase; coarse circle scan plus local refinement.
double projection_radius(const ConvexBody& body, const PointC2& dir, double* phase_out) {
  const int nscan = 1024;
  double best = -std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (int k = 0; k < nscan; ++k) {
    double t = 2.0 * kPi * double(k) / double(nscan);
    double s = body.support((std::polar(1.0, t) * dir).to_vec4());
    if (s > best) {
      best = s;
      best_t = t;
    }
  }
  double step = 2.0 * kPi / double(nscan);
  for (int round = 0; round < 3; ++round) {
    for (int k = -8; k <= 8; ++k) {
      double t = best_t + step * double(k) / 8.0;
      double s = body.support((std::polar(1.0, t) * dir).to_vec4());
      if (s > best) {
        best = s;
        best_t = t;
      }
    }
    step /= 8.0;
  }
  if (phase_out) *phase_out = best_t;
  return best;
}

template <typename F>
auto stage(const char* tag, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string(tag) + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(tag) + ": " + e.what());
  }
}

// Equal-J splits at shifted phases, keeping the partition with the largest
// worst-case slab margin over the boundary arcs.
double partition_margin(const BoundaryPartition& part, const AnalyticMap& x,
                        const TangentNet& net) {
  double margin = std::numeric_limits<double>::infinity();
  for (const CirclePartition& cp : part.circles)
    for (const BoundaryArcInterval& arc : cp.arcs) {
      Slab sl = net.slab(arc.slab);
      for (int k = 0; k <= 64; ++k) {
        double t = arc.t0 + (arc.t1 - arc.t0) * double(k) / 64.0;
        double v = net.radius - std::abs(sl.coordinate(x.value(std::polar(cp.radius, t))));
        margin = std::min(margin, v);
      }
    }
  return margin;
}

BoundaryPartition best_phase_split(const AnalyticMap& x, const TangentNet& net,
                                   const ConvexBody& d_body, double delta) {
  BoundaryPartition best = split_boundary(x, net, d_body, delta, 0.0);
  double best_margin = partition_margin(best, x, net);
  for (int k = 1; k < 16; ++k) {
    double phase = 2.0 * kPi * double(k) / (16.0 * double(best.j));
    BoundaryPartition p = split_boundary(x, net, d_body, delta, phase);
    double m = partition_margin(p, x, net);
    if (m > best_margin) {
      best = p;
      best_margin = m;
    }
  }
  return best;
}

PropertyCheck aggregate_family(const std::vector<PropertyCheck>& trace, const char* tag) {
  std::size_t pick = trace.size();
  bool all_ok = true;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (trace[k].tag != tag) continue;
    all_ok = all_ok && trace[k].ok;
    if (pick == trace.size()) {
      pick = k;
      continue;
    }
    bool take = trace[k].below ? trace[k].worst > trace[pick].worst
                               : trace[k].worst < trace[pick].worst;
    if (take) pick = k;
  }
  if (pick == trace.size())
    throw std::runtime_error(std::string("aggregate_family: no trace entries for ") + tag);
  PropertyCheck out = trace[pick];
  out.ok = all_ok;
  return out;
}

}  // namespace

Complex choose_zeta(const PointC2& u, const PointC2& w, const ConvexBody& dp_body,
                    double margin) {
  if (!(margin >= 0.0))
    throw std::invalid_argument("choose_zeta: margin must be nonnegative (" +
                                std::to_string(margin) + ")");
  if (std::abs(u.norm() - 1.0) > 1e-9 || std::abs(w.norm() - 1.0) > 1e-9 ||
      std::abs(hermitian(u, w)) > 1e-9)
    throw std::invalid_argument("choose_zeta: frame must be orthonormal with <<u,w>> = 0");

  double phase = 0.0;
  double r_u = projection_radius(dp_body, u, &phase);
  double r_w = projection_radius(dp_body, w, nullptr);
  double strict = 1e-7 * (1.0 + r_u);
  double radius = r_u + margin;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Complex zeta = std::polar(radius, phase);
    double worst = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 32; ++a)
      for (int b = 0; b < 32; ++b) {
        Complex coef = std::polar((r_w + 1.0) * double(b) / 31.0, 2.0 * kPi * double(a) / 32.0);
        worst = std::min(worst, dp_body.signed_boundary_distance(zeta * u + coef * w));
      }
    if (worst > strict) return zeta;
    radius += std::max(margin, 1e-2 * (1.0 + r_u));
  }
  throw std::runtime_error("choose_zeta: affine line still meets the body after widening (margin " +
                           std::to_string(margin) + ")");
}

std::vector<SectorPiece> carve_pieces(const BoundaryPartition& part, double rho_out,
                                      double radial_margin, double corner_margin) {
  if (part.circles.size() != 1)
    throw std::invalid_argument("carve_pieces: one boundary circle expected (" +
                                std::to_string(part.circles.size()) + ")");
  const CirclePartition& cp = part.circles.front();
  if (cp.arcs.empty()) throw std::invalid_argument("carve_pieces: empty partition");
  double rho_in = cp.radius;
  if (!(rho_out > rho_in))
    throw std::invalid_argument("carve_pieces: outer radius must exceed the circle radius (" +
                                std::to_string(rho_out) + ")");
  if (!(radial_margin > 0.0) || rho_in + radial_margin >= rho_out)
    throw std::invalid_argument("carve_pieces: radial margin must fit between the discs (" +
                                std::to_string(radial_margin) + ")");
  if (!(corner_margin >= 0.0))
    throw std::invalid_argument("carve_pieces: corner margin must be nonnegative (" +
                                std::to_string(corner_margin) + ")");
  double k_r0 = rho_in + radial_margin;
  std::vector<SectorPiece> out;
  for (const BoundaryArcInterval& arc : cp.arcs) {
    SectorPiece pc{arc.slab, arc.t0, arc.t1, k_r0, corner_margin};
    if (corner_margin == 0.0 && !full_span(pc))
      throw std::invalid_argument("carve_pieces: corner margin must be positive on proper sectors");
    if (corner_margin > 0.0 &&
        pc.t0 + corner_margin / k_r0 >= pc.t1 - corner_margin / k_r0)
      throw std::invalid_argument("carve_pieces: corner margin leaves no compactum (arc span " +
                                  std::to_string(pc.t1 - pc.t0) + ")");
    out.push_back(pc);
  }
  return out;
}

StretchState make_stretch_state(AnalyticMap y0, double rho_in, const TangentNet& net,
                                const ConvexBody& d_body, const ConvexBody& dp_body,
                                double delta, std::vector<SectorPiece> pieces,
                                double zeta_margin, double initial_drift) {
  if (y0.domain() != AnalyticMap::Domain::Disc)
    throw std::invalid_argument("make_stretch_state: disc-domain map expected");
  double rho_out = y0.disc_radius();
  if (!(rho_in > 0.0) || rho_in >= rho_out)
    throw std::invalid_argument("make_stretch_state: inner radius must sit inside the domain (" +
                                std::to_string(rho_in) + ")");
  if (!(delta > 0.0))
    throw std::invalid_argument("make_stretch_state: delta must be positive (" +
                                std::to_string(delta) + ")");
  if (net.size() == 0 || !(net.radius > 0.0))
    throw std::invalid_argument("make_stretch_state: net must carry slabs of positive radius");
  if (pieces.empty()) throw std::invalid_argument("make_stretch_state: no pieces");
  if (!(zeta_margin >= 0.0))
    throw std::invalid_argument("make_stretch_state: zeta margin must be nonnegative");
  if (!(initial_drift >= 0.0) || initial_drift >= delta)
    throw std::invalid_argument("make_stretch_state: initial drift must leave room in delta (" +
                                std::to_string(initial_drift) + ")");
  for (const SectorPiece& pc : pieces) {
    if (pc.slab >= net.size())
      throw std::invalid_argument("make_stretch_state: piece slab index out of range (" +
                                  std::to_string(pc.slab) + ")");
    if (!(pc.t1 > pc.t0) || pc.t1 - pc.t0 > 2.0 * kPi + 1e-9)
      throw std::invalid_argument("make_stretch_state: piece angles must be an increasing span");
    if (!(pc.k_r0 > rho_in) || pc.k_r0 >= rho_out)
      throw std::invalid_argument(
          "make_stretch_state: compactum inner radius must sit between the discs (" +
          std::to_string(pc.k_r0) + ")");
    if (!(pc.k_w > 0.0))
      throw std::invalid_argument(
          "make_stretch_state: corner margin must be positive so K leaves a channel to the rim");
    if (pc.t0 + pc.k_w / pc.k_r0 >= pc.t1 - pc.k_w / pc.k_r0)
      throw std::invalid_argument("make_stretch_state: corner margin leaves no compactum");
  }

  double quantum = delta / (1.0 + double(pieces.size()));
  StretchState st{std::move(y0), rho_in,  rho_out, net,
                  d_body,        dp_body, delta,   std::move(pieces),
                  {},            {},      0,       initial_drift,
                  quantum};
  for (const SectorPiece& pc : st.pieces) {
    ComplexFrame fr = complex_orthogonal(st.net.normals[pc.slab]);
    st.frames.push_back(fr);
    st.zetas.push_back(choose_zeta(fr.u, fr.w, dp_body, zeta_margin));
  }
  return st;
}

StretchState stretch_step(const StretchState& state, int n, int degree,
                          std::vector<PropertyCheck>* trace) {
  if (n < 1 || std::size_t(n) > state.pieces.size())
    throw std::invalid_argument("stretch_step: step index out of range (" + std::to_string(n) +
                                ")");
  if (state.steps_done != n - 1)
    throw std::invalid_argument("stretch_step: steps advance in order (done " +
                                std::to_string(state.steps_done) + ", asked " +
                                std::to_string(n) + ")");
  if (degree < 2)
    throw std::invalid_argument("stretch_step: degree too small (" + std::to_string(degree) + ")");

  const SectorPiece& pc = state.pieces[std::size_t(n) - 1];
  const PointC2 u = state.frames[std::size_t(n) - 1].u;
  const PointC2 w = state.frames[std::size_t(n) - 1].w;
  const AnalyticMap& prev = state.y;

  double spacing = state.rho_out * 2.0 * kPi / (8.0 * double(std::max(64, degree)));
  CompactaSpec spec;
  spec.sets.push_back({e1_boundary(pc, state.rho_in, state.rho_out, spacing), true});
  spec.sets.push_back({k_boundary(pc, state.rho_out, spacing), true});
  spec.connected_complement = true;

  SetTarget keep;
  keep.c1 = true;
  keep.value = [&prev, u](Complex z) { return hermitian(prev.value(z), u); };
  keep.derivative = [&prev, u](Complex z) { return hermitian(prev.derivative(z), u); };
  std::vector<SetTarget> targets{keep, constant_target(state.zetas[std::size_t(n) - 1])};
  Polynomial1 phi = runge_fit(spec, targets, degree).first;

  // Reassemble as phi u + <<Y, w>> w.  The u part goes through the circle
  // DFT; the w part reuses the previous coefficients verbatim, so the normal
  // component survives roundoff at any scale.
  std::vector<Complex> phic =
      circle_coefficients([&phi](Complex z) { return phi.value(z); }, phi.degree(),
                          state.rho_out);
  const auto& o1 = prev.coef1();
  const auto& o2 = prev.coef2();
  std::size_t len = std::max(phic.size(), std::max(o1.size(), o2.size()));
  std::vector<Complex> c1(len), c2(len);
  for (std::size_t k = 0; k < len; ++k) {
    Complex pk = k < phic.size() ? phic[k] : Complex(0.0);
    Complex s1 = k < o1.size() ? o1[k] : Complex(0.0);
    Complex s2 = k < o2.size() ? o2[k] : Complex(0.0);
    Complex gk = s1 * std::conj(w.z1) + s2 * std::conj(w.z2);
    c1[k] = pk * u.z1 + gk * w.z1;
    c2[k] = pk * u.z2 + gk * w.z2;
  }
  std::optional<AnalyticMap> next;
  try {
    next.emplace(AnalyticMap::disc_map(state.rho_out, std::move(c1), std::move(c2)));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("stretch_step: immersion lost after the push (") +
                             e.what() + ")");
  }

  std::vector<PropertyCheck> checks;
  checks.push_back(drift_check(*next, prev,
                               e1_boundary(pc, state.rho_in, state.rho_out, spacing / 2.0),
                               state.quantum, n));
  checks.push_back(pairing_check(*next, prev, w, n));
  checks.push_back(collar_check(*next, state.net, state.pieces, state.rho_in, state.rho_out, n));
  checks.push_back(corner_check(*next, state.net, state.dp_body, state.pieces, state.rho_out, n));
  checks.push_back(outside_check(*next, state.dp_body, state.pieces, std::size_t(n),
                                 state.rho_out, n));
  checks.push_back(inner_check(*next, state.d_body, state.rho_in, state.delta, n));
  if (trace) trace->insert(trace->end(), checks.begin(), checks.end());
  for (const PropertyCheck& c : checks)
    if (!c.ok)
      throw std::runtime_error("stretch_step: property " + c.tag + " violated at step " +
                               std::to_string(n) + " (worst " + std::to_string(c.worst) +
                               " vs bound " + std::to_string(c.bound) + " at " +
                               zlabel(c.where) + ")");

  double drift = 0.0;
  for (int k = 0; k < 512; ++k) {
    Complex z = std::polar(state.rho_in, 2.0 * kPi * double(k) / 512.0);
    drift = std::max(drift, (next->value(z) - prev.value(z)).norm());
    drift = std::max(drift, (next->derivative(z) - prev.derivative(z)).norm());
  }
  StretchState out = state;
  out.y = std::move(*next);
  out.steps_done = n;
  out.ledger = state.ledger + drift;
  if (out.ledger >= out.delta)
    throw std::runtime_error("stretch_step: drift ledger exhausted (" +
                             std::to_string(out.ledger) + " vs delta " +
                             std::to_string(out.delta) + ")");
  return out;
}

Complex ParameterRegion::node(std::size_t ir, std::size_t it) const {
  return std::polar(rho * double(ir) / double(nr), 2.0 * kPi * double(it % nt) / double(nt));
}

bool ParameterRegion::flagged(std::size_t ir, std::size_t it) const {
  return inside[ir * nt + it % nt] != 0;
}

ParameterRegion trim_to_component(const AnalyticMap& y, const ConvexBody& dp_body,
                                  const TrimGrid& resolution) {
  if (y.domain() != AnalyticMap::Domain::Disc)
    throw std::invalid_argument("trim_to_component: disc-domain map expected");
  const std::size_t nr = resolution.nr, nt = resolution.nt;
  if (nr < 8 || nt < 16)
    throw std::invalid_argument("trim_to_component: grid too coarse (" + std::to_string(nr) +
                                " x " + std::to_string(nt) + ")");
  if (!(dp_body.gauge(y.value(Complex(0.0, 0.0))) < 1.0))
    throw std::invalid_argument("trim_to_component: center image must lie inside the body");

  ParameterRegion reg;
  reg.rho = y.disc_radius();
  reg.nr = nr;
  reg.nt = nt;

  std::vector<std::uint8_t> in((nr + 1) * nt, 0);
  for (std::size_t it = 0; it < nt; ++it) in[it] = 1;  // center, one image point
  for (std::size_t ir = 1; ir <= nr; ++ir)
    for (std::size_t it = 0; it < nt; ++it) {
      Complex z = std::polar(reg.rho * double(ir) / double(nr),
                             2.0 * kPi * double(it) / double(nt));
      in[ir * nt + it] = dp_body.gauge(y.value(z)) < 1.0 ? 1 : 0;
    }

  std::vector<std::uint8_t> comp((nr + 1) * nt, 0);
  std::vector<std::size_t> stack;
  for (std::size_t it = 0; it < nt; ++it) {
    comp[it] = 1;
    stack.push_back(it);
  }
  auto visit = [&](std::size_t idx) {
    if (in[idx] && !comp[idx]) {
      comp[idx] = 1;
      stack.push_back(idx);
    }
  };
  while (!stack.empty()) {
    std::size_t idx = stack.back();
    stack.pop_back();
    std::size_t ir = idx / nt, it = idx % nt;
    if (ir > 0) visit((ir - 1) * nt + it);
    if (ir < nr) visit((ir + 1) * nt + it);
    visit(ir * nt + (it + 1) % nt);
    visit(ir * nt + (it + nt - 1) % nt);
  }
  reg.inside = comp;

  reg.node_count = 1;
  for (std::size_t ir = 1; ir <= nr; ++ir)
    for (std::size_t it = 0; it < nt; ++it)
      if (comp[ir * nt + it]) ++reg.node_count;
  for (std::size_t it = 0; it < nt; ++it)
    if (comp[nr * nt + it]) reg.touches_rim = true;

  auto refine = [&](Complex a, Complex b) {
    // sd < 0 at a, >= 0 at b; bisect the parameter segment onto Fr Dp
    for (int k = 0; k < 90; ++k) {
      Complex mid = a + (b - a) * 0.5;
      double v = dp_body.signed_boundary_distance(y.value(mid));
      if (std::abs(v) < 1e-12) return mid;
      (v < 0.0 ? a : b) = mid;
    }
    return a + (b - a) * 0.5;
  };
  for (std::size_t ir = 0; ir <= nr; ++ir)
    for (std::size_t it = 0; it < nt; ++it) {
      std::size_t idx = ir * nt + it;
      if (!comp[idx]) continue;
      std::size_t nbs[4];
      std::size_t cnt = 0;
      if (ir > 0) nbs[cnt++] = (ir - 1) * nt + it;
      if (ir < nr) nbs[cnt++] = (ir + 1) * nt + it;
      nbs[cnt++] = ir * nt + (it + 1) % nt;
      nbs[cnt++] = ir * nt + (it + nt - 1) % nt;
      bool front = false;
      for (std::size_t k = 0; k < cnt; ++k) {
        if (comp[nbs[k]]) continue;
        front = true;
        if (!in[nbs[k]])
          reg.boundary.push_back(
              refine(reg.node(ir, it), reg.node(nbs[k] / nt, nbs[k] % nt)));
      }
      if (front) reg.frontier.push_back(reg.node(ir, it));
    }

  double dth = 2.0 * kPi / double(nt);
  for (std::size_t ir = 0; ir < nr; ++ir) {
    double r0 = reg.rho * double(ir) / double(nr);
    double r1 = reg.rho * double(ir + 1) / double(nr);
    double cell = 0.5 * dth * (r1 * r1 - r0 * r0);
    for (std::size_t it = 0; it < nt; ++it) {
      bool inside_cell = comp[ir * nt + it] && comp[ir * nt + (it + 1) % nt] &&
                         comp[(ir + 1) * nt + it] && comp[(ir + 1) * nt + (it + 1) % nt];
      if (inside_cell) reg.area += cell;
    }
  }
  return reg;
}

RegionTopology region_topology(const ParameterRegion& region, double r_min) {
  const std::size_t nr = region.nr, nt = region.nt;
  RegionTopology out;
  std::vector<char> vmark(1 + (nr + 1) * nt, 0);
  std::vector<char> emark(2 * (nr + 1) * nt, 0);
  std::vector<int> edge_owner(2 * (nr + 1) * nt, -1);
  std::vector<int> parent;
  std::function<int(int)> find = [&](int a) {
    while (parent[std::size_t(a)] != a) a = parent[std::size_t(a)] = parent[std::size_t(parent[std::size_t(a)])];
    return a;
  };

  auto vertex_id = [&](std::size_t ir, std::size_t it) {
    return ir == 0 ? std::size_t(0) : 1 + ir * nt + it % nt;
  };
  auto radial_id = [&](std::size_t ir, std::size_t it) { return 2 * (ir * nt + it % nt); };
  auto angular_id = [&](std::size_t ir, std::size_t it) { return 2 * (ir * nt + it % nt) + 1; };

  for (std::size_t ir = 0; ir < nr; ++ir) {
    if (region.rho * double(ir) / double(nr) < r_min - 1e-9) continue;
    for (std::size_t it = 0; it < nt; ++it) {
      if (!(region.flagged(ir, it) && region.flagged(ir, it + 1) && region.flagged(ir + 1, it) &&
            region.flagged(ir + 1, it + 1)))
        continue;
      int cell = int(out.cells++);
      parent.push_back(cell);
      std::size_t verts[4] = {vertex_id(ir, it), vertex_id(ir, it + 1), vertex_id(ir + 1, it),
                              vertex_id(ir + 1, it + 1)};
      std::size_t edges[4];
      std::size_t ecnt = 0;
      edges[ecnt++] = radial_id(ir, it);
      edges[ecnt++] = radial_id(ir, it + 1);
      edges[ecnt++] = angular_id(ir + 1, it);
      if (ir > 0) edges[ecnt++] = angular_id(ir, it);  // center cells are triangles
      for (std::size_t v : verts) vmark[v] = 1;
      for (std::size_t k = 0; k < ecnt; ++k) {
        emark[edges[k]] = 1;
        int& owner = edge_owner[edges[k]];
        if (owner < 0) {
          owner = cell;
        } else {
          int ra = find(owner), rb = find(cell);
          if (ra != rb) parent[std::size_t(ra)] = rb;
        }
      }
    }
  }

  long v = 0, e = 0;
  for (char m : vmark) v += m;
  for (char m : emark) e += m;
  out.euler = int(v - e + long(out.cells));
  for (std::size_t k = 0; k < parent.size(); ++k)
    if (find(int(k)) == int(k)) ++out.components;
  return out;
}

std::string LemmaReport::to_text() const {
  nlohmann::ordered_json doc;
  doc["schema"] = "curvelab-stretch/1";
  for (const PropertyCheck& c : checks)
    doc[c.tag] = {{"ok", c.ok},         {"worst", c.worst}, {"bound", c.bound},
                  {"below", c.below},   {"step", c.step},
                  {"where", {c.where.real(), c.where.imag()}},
                  {"note", c.note}};
  doc["i"] = i;
  doc["j"] = j;
  doc["degree"] = degree;
  doc["delta"] = delta;
  doc["ledger"] = ledger;
  doc["region_samples"] = region_samples;
  doc["ok"] = ok;
  return doc.dump(2);
}

LemmaResult run_lemma_main(const AnalyticMap& x, const ConvexBody& d_body,
                           const ConvexBody& dp_body, const TangentNet& net, double delta,
                           int degree) {
  if (x.domain() != AnalyticMap::Domain::Disc)
    throw std::invalid_argument("run_lemma_main: disc-domain map expected");
  if (net.size() == 0 || !(net.radius > 0.0))
    throw std::invalid_argument("run_lemma_main: net must carry slabs of positive radius");
  if (!(delta > 0.0) || delta >= net.radius)
    throw std::invalid_argument("run_lemma_main: delta must sit below the net radius (" +
                                std::to_string(delta) + ")");
  if (degree < 8)
    throw std::invalid_argument("run_lemma_main: degree too small (" + std::to_string(degree) +
                                ")");
  double rho = x.disc_radius();
  for (int k = 0; k < 512; ++k) {
    PointC2 q = x.value(std::polar(rho, 2.0 * kPi * double(k) / 512.0));
    if (!(net_distance(net, q) < net.radius) || !(d_body.signed_boundary_distance(q) < delta))
      throw std::invalid_argument(
          "run_lemma_main: boundary image must lie in the net inside the delta neighborhood "
          "(sample " +
          std::to_string(k) + ")");
  }
  TangentNet net2 = generic_position_ok(net) ? net : generic_position(net, d_body);

  BoundaryPartition part =
      stage("split", [&] { return best_phase_split(x, net2, d_body, delta); });
  const auto& arcs = part.circles.front().arcs;
  const std::size_t count = arcs.size();

  struct ArcPlan {
    double angle;
    PointC2 v;
    double c;
  };
  std::vector<ArcPlan> plans = stage("attach", [&] {
    std::vector<ArcPlan> out;
    double need = 1.0 + dp_body.diameter();
    for (std::size_t j = 0; j < count; ++j) {
      const BoundaryArcInterval& before = arcs[(j + count - 1) % count];
      const BoundaryArcInterval& cur = arcs[j];
      PointC2 v =
          common_tangent_direction(d_body, net2.skeleton[before.slab], net2.skeleton[cur.slab]);
      double pairing = std::min(std::abs(hermitian(v, net2.normals[before.slab])),
                                std::abs(hermitian(v, net2.normals[cur.slab])));
      double c = 1.1 * need / std::max(pairing, 1e-300);
      if (!(c <= 50.0 * need))
        throw std::runtime_error("tangent pairing too weak for the projection rule (pairing " +
                                 std::to_string(pairing) + ")");
      out.push_back({cur.t0, v, c});
    }
    return out;
  });

  // Push arcs leave along the common tangent direction with a smoothstep
  // ramp; the backbone continues the map radially with a tanh turnover so the
  // junction stays C1 and the rim end stays immersed.
  double rho_out = 4.0 * rho;
  double budget = delta / (1.0 + double(count));
  std::vector<AttachedArc> spokes;
  for (const ArcPlan& pl : plans)
    spokes.push_back({pl.angle, [&x, pl, rho, rho_out](double t) {
                        double ell = 0.3 * rho;
                        double s = std::clamp((t - rho) / (rho_out - rho), 0.0, 1.0);
                        Complex g = std::polar(
                            rho + ell * std::tanh((t - rho) / ell) + 0.02 * (t - rho), pl.angle);
                        return x.value(g) + (s * s * (3.0 - 2.0 * s) * pl.c) * pl.v;
                      }});
  auto ext = stage("extend", [&] {
    auto pr = mergelyan_extend(x, spokes, rho_out, budget);
    if (!pr.second.within_budget)
      throw std::runtime_error("inner C1 budget not met (" + std::to_string(pr.second.c1_inner) +
                               " vs " + std::to_string(budget) + ")");
    return pr;
  });

  std::vector<PropertyCheck> trace;
  std::vector<SectorPiece> pieces;
  std::optional<StretchState> st;
  stage("compacta", [&] {
    double dr = rho_out - rho;
    double m_r = 0.10 * dr;
    double k_w = dr / 30.0;
    std::string detail = "no attempts";
    for (int attempt = 0; attempt < 4; ++attempt) {
      pieces = carve_pieces(part, rho_out, m_r, k_w);
      PropertyCheck base3 = collar_check(ext.first, net2, pieces, rho, rho_out, 0);
      PropertyCheck base4 = corner_check(ext.first, net2, dp_body, pieces, rho_out, 0);
      if (base3.ok && base4.ok) {
        trace.push_back(base3);
        trace.push_back(base4);
        trace.push_back(inner_check(ext.first, d_body, rho, delta, 0));
        st = make_stretch_state(ext.first, rho, net2, d_body, dp_body, delta, pieces, 0.25,
                                ext.second.c1_inner);
        return 0;
      }
      detail = !base3.ok ? "collar slab coordinate " + std::to_string(base3.worst) + " vs " +
                               std::to_string(base3.bound)
                         : "corner clearance " + std::to_string(base4.worst);
      // shrinking both margins moves the checked samples toward prescribed
      // values, so the base conditions tighten monotonically
      m_r *= 0.7;
      k_w *= 0.7;
    }
    throw std::runtime_error("base compacta checks failed after margin shrinks (" + detail + ")");
  });

  stage("steps", [&] {
    for (int n = 1; n <= int(st->pieces.size()); ++n) *st = stretch_step(*st, n, degree, &trace);
    return 0;
  });

  ParameterRegion region =
      stage("trim", [&] { return trim_to_component(st->y, dp_body, TrimGrid{}); });

  LemmaReport rep;
  rep.i = 1;
  rep.j = int(count);
  rep.degree = degree;
  rep.delta = delta;
  rep.ledger = st->ledger;
  for (const char* tag : {"1_n", "2_n", "3_n", "4_n", "5_n", "6_n"})
    rep.checks.push_back(aggregate_family(trace, tag));

  RegionTopology added = region_topology(region, rho - 1e-9);
  PropertyCheck ca{"a", false, 0.0, 0.5, true, int(count), {},
                   "homeomorphic extension defect: |euler| + |components - 1| + rim contact + "
                   "empty-annulus flag of the added region"};
  ca.worst = std::abs(double(added.euler)) + std::abs(double(added.components) - 1.0) +
             (region.touches_rim ? 1.0 : 0.0) + (added.cells == 0 ? 1.0 : 0.0);
  ca.ok = ca.worst < ca.bound;
  rep.checks.push_back(ca);

  PropertyCheck cb{"b", false, 0.0, delta, true, int(count), {},
                   "C1 distance to the input map on the inner circle"};
  for (int k = 0; k < 512; ++k) {
    Complex z = std::polar(rho, 2.0 * kPi * double(k) / 512.0);
    double v = std::max((st->y.value(z) - x.value(z)).norm(),
                        (st->y.derivative(z) - x.derivative(z)).norm());
    if (v > cb.worst) {
      cb.worst = v;
      cb.where = z;
    }
  }
  cb.ok = cb.worst < cb.bound;
  rep.checks.push_back(cb);

  PropertyCheck cc{"c", false, 0.0, -net2.radius, false, int(count), {},
                   "added region stays outside the inner parallel body; closure containment in "
                   "the outer body holds by construction of the region"};
  bool first_c = true;
  std::size_t samples = 1;  // center node
  PropertyCheck ce{"e", false, 0.0, 0.0, true, int(count), {},
                   "membership excess against the delta neighborhood union the net"};
  {
    PointC2 q0 = st->y.value(Complex(0.0, 0.0));
    ce.worst = std::min(d_body.signed_boundary_distance(q0) - delta,
                        net_distance(net2, q0) - net2.radius);
  }
  for (std::size_t ir = 1; ir <= region.nr; ++ir)
    for (std::size_t it = 0; it < region.nt; ++it) {
      if (!region.flagged(ir, it)) continue;
      ++samples;
      Complex z = region.node(ir, it);
      PointC2 q = st->y.value(z);
      double excess = std::min(d_body.signed_boundary_distance(q) - delta,
                               net_distance(net2, q) - net2.radius);
      if (excess > ce.worst) {
        ce.worst = excess;
        ce.where = z;
      }
      if (region.rho * double(ir) / double(region.nr) < rho - 1e-9) continue;
      double v = d_body.signed_boundary_distance(q);
      if (first_c || v < cc.worst) {
        cc.worst = v;
        cc.where = z;
        first_c = false;
      }
    }
  cc.ok = !first_c && cc.worst > cc.bound;
  rep.checks.push_back(cc);

  PropertyCheck cd{"d", false, 0.0, 1e-6, true, int(count), {},
                   "distance of the refined region boundary to the outer body boundary"};
  for (Complex z : region.boundary) {
    double v = std::abs(dp_body.signed_boundary_distance(st->y.value(z)));
    if (v > cd.worst) {
      cd.worst = v;
      cd.where = z;
    }
  }
  cd.ok = !region.boundary.empty() && cd.worst < cd.bound;
  if (region.boundary.empty()) cd.note = "no interior boundary points found";
  rep.checks.push_back(cd);

  ce.ok = ce.worst < ce.bound;
  rep.checks.push_back(ce);
  rep.region_samples = samples;

  rep.ok = true;
  for (const PropertyCheck& c : rep.checks) rep.ok = rep.ok && c.ok;
  return LemmaResult{std::move(region), st->y, std::move(rep)};
}

}  // namespace curvelab
