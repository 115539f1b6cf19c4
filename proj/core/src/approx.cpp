#include "curvelab/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace curvelab {
namespace {

constexpr double kPi = std::numbers::pi;

double point_segment_distance(Complex p, Complex a, Complex b) {
  const Complex ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 < 1e-30) return std::abs(p - a);
  const double t = std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

double segment_segment_distance(Complex a1, Complex b1, Complex a2, Complex b2) {
  auto orient = [](Complex a, Complex b, Complex c) {
    return ((b - a) * std::conj(c - a)).imag();
  };
  const double d1 = orient(a1, b1, a2), d2 = orient(a1, b1, b2);
  const double d3 = orient(a2, b2, a1), d4 = orient(a2, b2, b1);
  if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;
  return std::min(std::min(point_segment_distance(a2, a1, b1), point_segment_distance(b2, a1, b1)),
                  std::min(point_segment_distance(a1, a2, b2), point_segment_distance(b1, a2, b2)));
}

bool inside_polygon(Complex p, const std::vector<Complex>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Complex a = poly[i], b = poly[j];
    if ((a.imag() > p.imag()) != (b.imag() > p.imag()) &&
        p.real() < (b.real() - a.real()) * (p.imag() - a.imag()) / (b.imag() - a.imag()) +
                       a.real())
      in = !in;
  }
  return in;
}

// Orthonormal polynomial basis in the weighted sample inner product, built by
// the Arnoldi recurrence with two-pass re-orthogonalization.
struct Basis {
  std::vector<std::vector<Complex>> h;  // h[k] holds entries 0..k+1 of column k
  Eigen::MatrixXcd q, d;                // basis and derivative values at the samples
};

Basis build_basis(const std::vector<Complex>& samples, const Eigen::VectorXd& weights,
                  int degree) {
  const int m = int(samples.size());
  const int n = degree + 1;
  Basis basis;
  basis.q.resize(m, n);
  basis.d.resize(m, n);
  basis.h.resize(std::size_t(degree));
  Eigen::VectorXcd zs(m);
  for (int i = 0; i < m; ++i) zs(i) = samples[std::size_t(i)];
  auto ip = [&](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return (weights.array().cast<Complex>() * b.conjugate().array() * a.array()).sum();
  };
  basis.q.col(0).setOnes();  // unit norm because the weights sum to one
  basis.d.col(0).setZero();
  for (int k = 0; k < degree; ++k) {
    Eigen::VectorXcd v = zs.cwiseProduct(basis.q.col(k));
    Eigen::VectorXcd dv = basis.q.col(k) + zs.cwiseProduct(basis.d.col(k));
    const double start_norm = std::sqrt(ip(v, v).real());
    basis.h[std::size_t(k)].assign(std::size_t(k) + 2, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j <= k; ++j) {
        const Complex hjk = ip(v, basis.q.col(j));
        basis.h[std::size_t(k)][std::size_t(j)] += hjk;
        v -= hjk * basis.q.col(j);
        dv -= hjk * basis.d.col(j);
      }
    }
    const double sub = std::sqrt(ip(v, v).real());
    if (!(sub > 1e-12 * start_norm))
      throw std::runtime_error(
          "approx basis breakdown at degree " + std::to_string(k + 1) +
          ": samples cannot support the requested degree");
    basis.h[std::size_t(k)][std::size_t(k) + 1] = sub;
    basis.q.col(k + 1) = v / sub;
    basis.d.col(k + 1) = dv / sub;
  }
  return basis;
}

void eval_basis(const std::vector<std::vector<Complex>>& h, double q0, Complex z,
                std::vector<Complex>& vals, std::vector<Complex>& dvals) {
  const std::size_t n = h.size() + 1;
  vals.assign(n, 0.0);
  dvals.assign(n, 0.0);
  vals[0] = q0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Complex v = z * vals[k];
    Complex dv = vals[k] + z * dvals[k];
    for (std::size_t j = 0; j <= k; ++j) {
      v -= h[k][j] * vals[j];
      dv -= h[k][j] * dvals[j];
    }
    vals[k + 1] = v / h[k][k + 1];
    dvals[k + 1] = dv / h[k][k + 1];
  }
}

// Cyclic arclength weights for a closed boundary polyline.
std::vector<double> polyline_weights(const std::vector<Complex>& poly) {
  const std::size_t n = poly.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    const std::size_t next = (i + 1) % n;
    w[i] = 0.5 * (std::abs(poly[i] - poly[prev]) + std::abs(poly[next] - poly[i]));
  }
  return w;
}

}  // namespace

Polynomial1::Polynomial1(double q0, std::vector<std::vector<Complex>> h,
                         std::vector<Complex> c)
    : q0_(q0), h_(std::move(h)), c_(std::move(c)) {
  if (h_.size() + 1 != c_.size())
    throw std::invalid_argument("Polynomial1: coefficient and recurrence sizes disagree");
}

Complex Polynomial1::value(Complex z) const {
  std::vector<Complex> vals, dvals;
  eval_basis(h_, q0_, z, vals, dvals);
  Complex out = 0.0;
  for (std::size_t k = 0; k < c_.size(); ++k) out += c_[k] * vals[k];
  return out;
}

Complex Polynomial1::derivative(Complex z) const {
  std::vector<Complex> vals, dvals;
  eval_basis(h_, q0_, z, vals, dvals);
  Complex out = 0.0;
  for (std::size_t k = 0; k < c_.size(); ++k) out += c_[k] * dvals[k];
  return out;
}

std::vector<Complex> Polynomial1::monomial_coefficients() const {
  const std::size_t n = c_.size();
  std::vector<std::vector<Complex>> mono(n);
  mono[0].assign(n, 0.0);
  mono[0][0] = q0_;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    std::vector<Complex> acc(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) acc[i + 1] = mono[k][i];  // times z
    for (std::size_t j = 0; j <= k; ++j)
      for (std::size_t i = 0; i < n; ++i) acc[i] -= h_[k][j] * mono[j][i];
    for (Complex& v : acc) v /= h_[k][k + 1];
    mono[k + 1] = std::move(acc);
  }
  std::vector<Complex> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) out[i] += c_[k] * mono[k][i];
  return out;
}

double min_pairwise_distance(const CompactaSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.sets.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.sets.size(); ++j) {
      const auto& a = spec.sets[i].boundary;
      const auto& b = spec.sets[j].boundary;
      if ((spec.sets[i].filled && inside_polygon(b[0], a)) ||
          (spec.sets[j].filled && inside_polygon(a[0], b)))
        return 0.0;
      for (std::size_t s = 0; s < a.size(); ++s) {
        for (std::size_t t = 0; t < b.size(); ++t) {
          best = std::min(best, segment_segment_distance(a[s], a[(s + 1) % a.size()],
                                                         b[t], b[(t + 1) % b.size()]));
        }
      }
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

SetTarget constant_target(Complex c, bool c1) {
  SetTarget t;
  t.c1 = c1;
  t.value = [c](Complex) { return c; };
  t.derivative = [](Complex) { return Complex(0.0); };
  return t;
}

SetTarget map_component_target(const AnalyticMap& map, int component, bool c1) {
  if (component != 1 && component != 2)
    throw std::invalid_argument("map_component_target: component must be 1 or 2");
  SetTarget t;
  t.c1 = c1;
  t.value = [map, component](Complex z) {
    const PointC2 w = map.value(z);
    return component == 1 ? w.z1 : w.z2;
  };
  t.derivative = [map, component](Complex z) {
    const PointC2 w = map.derivative(z);
    return component == 1 ? w.z1 : w.z2;
  };
  return t;
}

std::string FitReport::to_text() const {
  nlohmann::ordered_json j;
  j["schema"] = "curvelab-fit/1";
  j["degree"] = degree;
  j["condition_estimate"] = condition_estimate;
  j["residual"] = residual;
  j["per_set"] = nlohmann::ordered_json::array();
  for (const PerSet& s : per_set) j["per_set"].push_back({{"c0", s.c0}, {"c1", s.c1}});
  return j.dump(2);
}

std::pair<Polynomial1, FitReport> runge_fit(const CompactaSpec& spec,
                                            const std::vector<SetTarget>& targets,
                                            int degree) {
  if (!spec.connected_complement)
    throw std::invalid_argument("runge_fit: caller must assert a connected complement");
  if (degree < 0) throw std::invalid_argument("runge_fit: degree must be nonnegative");
  if (spec.sets.empty()) throw std::invalid_argument("runge_fit: no compacta");
  if (targets.size() != spec.sets.size())
    throw std::invalid_argument("runge_fit: one target per compact set required");
  for (std::size_t i = 0; i < spec.sets.size(); ++i) {
    if (spec.sets[i].boundary.size() < 16)
      throw std::invalid_argument("runge_fit: set " + std::to_string(i) +
                                  " needs at least 16 boundary samples");
    if (!targets[i].value)
      throw std::invalid_argument("runge_fit: set " + std::to_string(i) + " has no target");
    if (targets[i].c1 && !targets[i].derivative)
      throw std::invalid_argument("runge_fit: C1 target on set " + std::to_string(i) +
                                  " needs a derivative");
  }
  if (spec.sets.size() > 1 && !(min_pairwise_distance(spec) > 0.0))
    throw std::invalid_argument("runge_fit: compacta overlap");

  std::vector<Complex> samples;
  std::vector<double> raw_w;
  std::vector<std::size_t> offset;
  for (const CompactSet& s : spec.sets) {
    offset.push_back(samples.size());
    const auto w = polyline_weights(s.boundary);
    samples.insert(samples.end(), s.boundary.begin(), s.boundary.end());
    raw_w.insert(raw_w.end(), w.begin(), w.end());
  }
  double total = 0.0;
  for (double w : raw_w) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("runge_fit: degenerate sample set");
  Eigen::VectorXd weights(int(raw_w.size()));
  for (std::size_t i = 0; i < raw_w.size(); ++i) weights(int(i)) = raw_w[i] / total;

  int rows = 0;
  for (std::size_t i = 0; i < spec.sets.size(); ++i)
    rows += int(spec.sets[i].boundary.size()) * (targets[i].c1 ? 2 : 1);
  const int cols = degree + 1;
  if (rows < cols)
    throw std::invalid_argument("runge_fit: degree too high for the sample budget");

  const Basis basis = build_basis(samples, weights, degree);

  Eigen::MatrixXcd a(rows, cols);
  Eigen::VectorXcd b(rows);
  int r = 0;
  for (std::size_t i = 0; i < spec.sets.size(); ++i) {
    const auto& set = spec.sets[i];
    for (std::size_t s = 0; s < set.boundary.size(); ++s) {
      const int k = int(offset[i] + s);
      const double sw = std::sqrt(weights(k));
      a.row(r) = sw * basis.q.row(k);
      b(r++) = sw * targets[i].value(set.boundary[s]);
    }
    if (targets[i].c1) {
      for (std::size_t s = 0; s < set.boundary.size(); ++s) {
        const int k = int(offset[i] + s);
        const double sw = std::sqrt(weights(k));
        a.row(r) = sw * basis.d.row(k);
        b(r++) = sw * targets[i].derivative(set.boundary[s]);
      }
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12))
    throw std::runtime_error("runge_fit: ill-conditioned system (condition estimate " +
                             std::to_string(cond) + ")");
  const Eigen::VectorXcd c = svd.solve(b);

  FitReport report;
  report.degree = degree;
  report.condition_estimate = cond;
  report.residual = (a * c - b).norm();

  Polynomial1 poly(1.0, basis.h, std::vector<Complex>(c.data(), c.data() + c.size()));
  for (std::size_t i = 0; i < spec.sets.size(); ++i) {
    const auto& bd = spec.sets[i].boundary;
    FitReport::PerSet per;
    auto probe = [&](Complex z) {
      per.c0 = std::max(per.c0, std::abs(poly.value(z) - targets[i].value(z)));
      if (targets[i].derivative)
        per.c1 = std::max(per.c1, std::abs(poly.derivative(z) - targets[i].derivative(z)));
    };
    for (std::size_t s = 0; s < bd.size(); ++s) {
      probe(bd[s]);
      probe(0.5 * (bd[s] + bd[(s + 1) % bd.size()]));
    }
    report.per_set.push_back(per);
  }
  return {std::move(poly), std::move(report)};
}

std::string ExtendReport::to_text() const {
  nlohmann::ordered_json j;
  j["schema"] = "curvelab-extend/1";
  j["degree"] = degree;
  j["condition_estimate"] = condition_estimate;
  j["c1_inner"] = c1_inner;
  j["c0_arcs"] = c0_arcs;
  j["within_budget"] = within_budget;
  return j.dump(2);
}

std::pair<AnalyticMap, ExtendReport> mergelyan_extend(const AnalyticMap& x,
                                                      const std::vector<AttachedArc>& arcs,
                                                      double rho_out, double budget,
                                                      int max_degree) {
  if (x.domain() != AnalyticMap::Domain::Disc)
    throw std::invalid_argument("mergelyan_extend: X must live on a disc");
  const double rho = x.disc_radius();
  if (!(rho_out > rho))
    throw std::invalid_argument("mergelyan_extend: outer radius must exceed the disc radius");
  if (!(budget >= 0.0)) throw std::invalid_argument("mergelyan_extend: negative budget");
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    if (!arcs[i].target)
      throw std::invalid_argument("mergelyan_extend: arc " + std::to_string(i) +
                                  " has no target");
    for (std::size_t j = i + 1; j < arcs.size(); ++j) {
      double gap = std::fmod(std::abs(arcs[i].angle - arcs[j].angle), 2.0 * kPi);
      gap = std::min(gap, 2.0 * kPi - gap);
      if (gap < 1e-9) throw std::invalid_argument("mergelyan_extend: arcs overlap");
    }
  }

  const int n_circle = 256, n_arc = 64;
  std::vector<Complex> samples;
  std::vector<double> raw_w;
  for (int i = 0; i < n_circle; ++i) {
    samples.push_back(std::polar(rho, 2.0 * kPi * double(i) / double(n_circle)));
    raw_w.push_back(2.0 * kPi * rho / double(n_circle));
  }
  std::vector<std::vector<double>> arc_ts(arcs.size());
  for (std::size_t ai = 0; ai < arcs.size(); ++ai) {
    for (int i = 0; i <= n_arc; ++i) {
      const double t = rho + (rho_out - rho) * double(i) / double(n_arc);
      arc_ts[ai].push_back(t);
      samples.push_back(std::polar(t, arcs[ai].angle));
      raw_w.push_back((rho_out - rho) / double(n_arc));
    }
  }
  double total = 0.0;
  for (double w : raw_w) total += w;
  Eigen::VectorXd weights(int(raw_w.size()));
  for (std::size_t i = 0; i < raw_w.size(); ++i) weights(int(i)) = raw_w[i] / total;

  std::vector<int> ladder;
  for (int d : {16, 32, 64, 96})
    if (d <= max_degree) ladder.push_back(d);
  if (ladder.empty()) ladder.push_back(std::max(4, max_degree));

  struct Candidate {
    AnalyticMap map;
    ExtendReport report;
  };
  std::unique_ptr<Candidate> best;
  std::string last_error;
  for (int degree : ladder) {
    const int rows = 2 * n_circle + int(arcs.size()) * (n_arc + 1);
    const int cols = degree + 1;
    if (rows < cols) break;
    const Basis basis = build_basis(samples, weights, degree);

    Eigen::MatrixXcd a(rows, cols);
    Eigen::MatrixXcd b(rows, 2);
    int r = 0;
    for (int i = 0; i < n_circle; ++i) {
      const double sw = std::sqrt(weights(i));
      const PointC2 v = x.value(samples[std::size_t(i)]);
      a.row(r) = sw * basis.q.row(i);
      b(r, 0) = sw * v.z1;
      b(r++, 1) = sw * v.z2;
    }
    for (int i = 0; i < n_circle; ++i) {
      const double sw = std::sqrt(weights(i));
      const PointC2 v = x.derivative(samples[std::size_t(i)]);
      a.row(r) = sw * basis.d.row(i);
      b(r, 0) = sw * v.z1;
      b(r++, 1) = sw * v.z2;
    }
    int k = n_circle;
    for (std::size_t ai = 0; ai < arcs.size(); ++ai) {
      for (int i = 0; i <= n_arc; ++i, ++k) {
        const double sw = std::sqrt(weights(k));
        const PointC2 v = arcs[ai].target(arc_ts[ai][std::size_t(i)]);
        a.row(r) = sw * basis.q.row(k);
        b(r, 0) = sw * v.z1;
        b(r++, 1) = sw * v.z2;
      }
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const Eigen::MatrixXcd c = svd.solve(b);

    Polynomial1 p1(1.0, basis.h, std::vector<Complex>(c.col(0).data(), c.col(0).data() + cols));
    Polynomial1 p2(1.0, basis.h, std::vector<Complex>(c.col(1).data(), c.col(1).data() + cols));
    try {
      AnalyticMap candidate = AnalyticMap::disc_map(rho_out, p1.monomial_coefficients(),
                                                    p2.monomial_coefficients());
      ExtendReport report;
      report.degree = degree;
      report.condition_estimate = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
      for (int i = 0; i < 512; ++i) {
        const Complex z = std::polar(rho, 2.0 * kPi * double(i) / 512.0);
        report.c1_inner = std::max(report.c1_inner, (candidate.value(z) - x.value(z)).norm());
        report.c1_inner =
            std::max(report.c1_inner, (candidate.derivative(z) - x.derivative(z)).norm());
      }
      for (const AttachedArc& arc : arcs) {
        double worst = 0.0;
        for (int i = 0; i <= 128; ++i) {
          const double t = rho + (rho_out - rho) * double(i) / 128.0;
          worst = std::max(worst,
                           (candidate.value(std::polar(t, arc.angle)) - arc.target(t)).norm());
        }
        report.c0_arcs.push_back(worst);
      }
      report.within_budget = report.c1_inner < budget;
      if (!best || report.c1_inner < best->report.c1_inner)
        best = std::make_unique<Candidate>(Candidate{candidate, report});
      if (report.c1_inner < 0.1 * budget) break;
    } catch (const std::invalid_argument& err) {
      last_error = err.what();  // degenerate fit; try the next rung
    }
  }
  if (!best)
    throw std::runtime_error("mergelyan_extend: no fitting degree produced an immersion (" +
                             last_error + ")");
  return {best->map, best->report};
}

AnalyticMap nudge_coefficients(const AnalyticMap& map, double magnitude,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto jitter = [&](std::vector<Complex> c) {
    for (Complex& v : c) v += magnitude * Complex(u(rng), u(rng));
    return c;
  };
  if (map.domain() == AnalyticMap::Domain::Disc)
    return AnalyticMap::disc_map(map.disc_radius(), jitter(map.coef1()),
                                 jitter(map.coef2()));
  return AnalyticMap::annulus_map(map.inner_radius(), map.outer_radius(),
                                  jitter(map.coef1()), jitter(map.coef2()), map.low1(),
                                  map.low2());
}

}  // namespace curvelab
