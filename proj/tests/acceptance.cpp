#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "fixtures.hpp"
#include "plsmooth/blend.hpp"
#include "plsmooth/edge.hpp"
#include "plsmooth/norms.hpp"
#include "plsmooth/pipeline.hpp"
#include "plsmooth/sweep.hpp"
#include "plsmooth/verify.hpp"
#include "plsmooth/vertex.hpp"

using namespace plsmooth;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Mat3 diag(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }
Vec3 cyl(double t, double th, double z) { return Vec3(t * std::cos(th), t * std::sin(th), z); }

bool within_ulp(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i)
    if (a(i) != b(i) && std::nextafter(a(i), b(i)) != b(i)) return false;
  return true;
}

Vec3 unit(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  return Vec3(nd(rng), nd(rng), nd(rng)).normalized();
}

// two pieces agreeing on {x1 = 0}: the identity and B, which differs only in its first column
void face_suite(Outcome& out) {
  const auto t0 = Clock::now();
  Mat3 sheared = diag(2, 1, 1);
  sheared(1, 0) = 0.7;
  sheared(2, 0) = -0.4;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  long exact = 0, outside = 0;
  double min_margin = 1e300, fd_worst = 0;
  for (const Mat3& B : {diag(2, 1, 1), diag(3, 1, 1), sheared}) {
    const Mat3 A = Mat3::Identity();
    FacePair p = make_face_pair(Affine{A, Vec3::Zero()}, Affine{B, Vec3::Zero()}, Frame{});
    const SigmaCertificate cert = sigma_for_face(p, false);
    // width ramp 0.5 -> 1 whose gradient bound is exactly the certified sigma
    const double len = 0.5 * profile_constants().sup_eta_prime / cert.sigma;
    const FaceBlend b = make_face_blend(p, WidthField::ramp(0.5, 1.0, Vec2(0.6, 0.8), 0.0, len));
    out.require(b.width.gradient_bound() <= cert.sigma * (1 + 1e-12), "width gradient within sigma");
    // half the normal stretch of the left piece times its in-plane Jacobian
    const double floor = 0.5 * A(0, 0) * A.block<2, 2>(1, 1).determinant();

    for (int k = 0; k < 100000; ++k) {
      Vec3 x(u(rng), 3 * len * u(rng), 3 * len * u(rng));
      const double w = b.width(x(1), x(2));
      x(0) = u(rng) > 0 ? w + 2 * std::abs(x(0)) : -2 * std::abs(x(0));
      ++outside;
      exact += within_ulp(face_blend_world(b, V3<double>(x)), (x(0) <= 0 ? A : B) * x);
    }
    for (int k = 0; k < 100000; ++k) {
      Vec3 y(0, 3 * len * u(rng), 3 * len * u(rng));
      y(0) = b.width(y(1), y(2)) * 0.5 * (1 + u(rng));
      min_margin = std::min(min_margin, face_blend_jacobian(b, y).determinant() - floor);
    }
    for (int k = 0; k < 2000; ++k) {
      Vec3 y(0, 3 * len * u(rng), 3 * len * u(rng));
      y(0) = b.width(y(1), y(2)) * (0.5 + 0.49 * u(rng));
      const Mat3 J = face_blend_jacobian(b, y);
      Mat3 fd;
      const double h = 1e-6;
      for (int j = 0; j < 3; ++j) {
        const Vec3 e = Vec3::Unit(j) * h;
        fd.col(j) = (face_blend(b, V3<double>(y + e)) - face_blend(b, V3<double>(y - e))) / (2 * h);
      }
      fd_worst = std::max(fd_worst, (J - fd).norm() / J.norm());
    }
  }
  const double secs = seconds_since(t0);
  out.require(exact == outside, "g = f outside the strip");
  out.require(min_margin >= -1e-12, "Jacobian floor in the strip");
  out.require(fd_worst <= 1e-5, "finite differences");
  out.require(secs < 10, "runtime");
  out.detail << outside << " outside points, " << exact << " within one ulp; min det - floor " << min_margin
             << "; FD rel err " << fd_worst << "; " << secs << " s";
}

// (x, y, z) -> (a(x), b(y), z) with piecewise linear a, b: four quadrant pieces
EdgeSmoother orthogonal_smoother(double r) {
  const EdgeFan fan = make_edge_fan({-kPi, -kPi / 2, 0.0, kPi / 2},
                                    {diag(1, 1, 1), diag(2, 1, 1), diag(2, 1.5, 1), diag(1, 1.5, 1)});
  // quarter sectors: widths well inside the no-overlap bound r/4 tan(pi/64)
  const double w = 0.8 * r / 4 * std::tan(kPi / 64);
  return make_edge_smoother(fan, std::vector<WidthField>(4, WidthField::constant(w)), RadiusField::constant(r));
}

void edge_suite(Outcome& out) {
  const auto t0 = Clock::now();
  const EdgeSmoother s = orthogonal_smoother(1.0);
  double wall = 0;
  for (int k = 0; k < 2000; ++k) {
    const double th = -kPi + 2 * kPi * (k + 0.37) / 2000, z = std::sin(7.0 * k);
    for (double eps : {0.0, 1e-13})
      wall = std::max(wall, (Vec3(seglem_extend(s, V3<double>(cyl(1.0 - eps, th, z)))) -
                             Vec3(wedge_map(s, V3<double>(cyl(1.0, th, z)))))
                                .norm());
  }
  double plane = 0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 64; ++j)
      for (double z : {-1.0, 0.0, 0.3, 0.9}) {
        const Vec3 y = cyl((i + 0.5) / 50, -kPi + 2 * kPi * j / 64, z);
        plane = std::max(plane, std::abs(Vec3(seglem_extend(s, V3<double>(y)))(2) - z));
      }
  const EdgeCertificate c = certify_edge(s, 64, 64, 64, -1.0, 1.0);

  double dfn = 2.5;  // largest Frobenius norm of the pieces, diag(2, 1.5, 1)
  std::vector<double> cs;
  for (double lam : {1.0, 0.5, 0.25}) {
    const EdgeSmoother sl = orthogonal_smoother(lam);
    double sup = 0;
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 256; ++j) {
        const Vec3 y = cyl(lam * 1.2 * (i + 0.5) / 48, -kPi + 2 * kPi * (j + 0.5) / 256, 0.1 * lam);
        sup = std::max(sup, jacobian_of(seglem_extend(sl, seed(y))).norm());
      }
    cs.push_back(sup / (dfn + 1));
  }
  double spread = 0;
  for (double v : cs) spread = std::max(spread, std::abs(v / cs[0] - 1));
  const double secs = seconds_since(t0);
  out.require(wall <= 1e-10, "wall continuity");
  out.require(plane <= 1e-10, "planes preserved");
  out.require(c.ok && c.min_det > 0, "Jacobian on the 64^3 grid");
  out.require(spread <= 0.05, "derivative constant under scaling");
  out.require(secs < 60, "runtime");
  out.detail << "wall " << wall << ", plane residual " << plane << ", min det " << c.min_det
             << ", sup|Dg|/(|Df|+1) = " << cs[0] << " " << cs[1] << " " << cs[2] << "; " << secs << " s";
}

void circle_isotopy(Outcome& out) {
  const auto iso = CircleIsotopy::from_lift([](const Jet& th) { return th + 0.3 * sin(th); });
  double lo = 1e9, hi = -1e9, ends = 0;
  for (int i = 0; i <= 128; ++i)
    for (int k = 0; k < 512; ++k) {
      const double t = i / 128.0, th = 2 * kPi * k / 512;
      const Jet a = iso.angle(Jet(th, 0), Jet(t, 1));
      lo = std::min(lo, a.v(0));
      hi = std::max(hi, a.v(0));
      if (i == 0) ends = std::max(ends, std::abs(a.a - th));
      if (i == 128) ends = std::max(ends, std::abs(a.a - (th + 0.3 * std::sin(th))));
    }
  out.require(lo >= 0.7 - 1e-12 && hi <= 1.3 + 1e-12, "d lift / d theta in [0.7, 1.3]");
  out.require(ends <= 1e-12, "endpoints");
  out.detail << "d/dtheta in [" << lo << ", " << hi << "], endpoint error " << ends;
}

void vertex_suite(Outcome& out) {
  const auto t0 = Clock::now();
  struct Case {
    const char* name;
    Mat3 A;
    int expect;
  };
  for (const Case& c : {Case{"identity", Mat3::Identity(), 1}, Case{"antipodal", -Mat3::Identity(), -1},
                        Case{"diag(1,1,2)", diag(1, 1, 2), 1}}) {
    const SphereMap mu = SphereMap::linear(c.A);
    const DegreeResult d = degree(mu);
    int newton = 0;
    for (int sgn : d.signs) newton += sgn;
    const long integral = std::lround(integral_degree(mu));
    out.require(newton == c.expect && d.degree == c.expect && integral == c.expect, c.name);
    out.detail << c.name << " " << newton << "/" << integral << "; ";
  }

  const double R = 1.0;
  const VertexSmoother s = make_vertex_smoother(HatMap::linear(diag(1, 1, 2)), R);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  int shell = 0, inner = 0;
  for (int k = 0; k < 1000; ++k) {
    const Vec3 y = R * (1 + u(rng)) * unit(rng);
    shell += Vec3(vertex_map(s, V3<double>(y))) == Vec3(s.hat(y));
    const Vec3 x = 0.5 * R * std::cbrt(u(rng)) * unit(rng);
    inner += Vec3(vertex_map(s, V3<double>(x))) == Vec3(s.rho * x);
  }
  const double secs = seconds_since(t0);
  out.require(shell == 1000, "outer shell equals the outer map");
  out.require(inner == 1000, "inner ball is rho x");
  out.require(secs < 60, "runtime");
  out.detail << "shell " << shell << "/1000, inner " << inner << "/1000 (rho " << s.rho << "); " << secs << " s";
}

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

void convergence(Outcome& out) {
  const auto t0 = Clock::now();
  const PLMap f = fixtures::sweep_fixture();
  const SmoothedMap g(f, choose_params(f));
  SweepOptions opt;
  opt.p = opt.q = 2;
  opt.workers = workers();
  const SweepTable T = lambda_sweep(g, opt);
  const auto& rows = T.rows;
  double lo_dg = 1e300, hi_dg = 0, lo_inv = 1e300, hi_inv = 0;
  bool ratio = true, bound = true, monotone = true, certified = true;
  for (size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    ratio = ratio && r.vol_E / rows[0].vol_E <= r.lambda * 1.05;
    bound = bound && std::pow(r.w1p_f, opt.p) <= r.lp_bound * (1 + 1e-12);
    if (i > 0) monotone = monotone && r.w1p_f <= rows[i - 1].w1p_f && r.w1q_inv <= rows[i - 1].w1q_inv;
    certified = certified && r.certified;
    lo_dg = std::min(lo_dg, r.sup_Dg);
    hi_dg = std::max(hi_dg, r.sup_Dg);
    lo_inv = std::min(lo_inv, r.sup_Dginv);
    hi_inv = std::max(hi_inv, r.sup_Dginv);
  }
  const SweepRow& last = rows.back();
  const double secs = seconds_since(t0);
  out.require(rows.size() == 5, "five rows");
  out.require(ratio, "vol(E) ratio at most lambda + 5%");
  out.require(bound, "L^p error below sup error times vol(E)");
  out.require(hi_dg / lo_dg - 1 < 0.05 && hi_inv / lo_inv - 1 < 0.05, "derivative bounds stable");
  out.require(monotone, "error columns nonincreasing");
  out.require(last.w1p_f < 1e-2 && last.w1q_inv < 1e-2, "final row below 1e-2");
  out.require(certified, "every level certified");
  out.require(secs < 300, "runtime");
  out.detail << "vol_E " << rows[0].vol_E << " -> " << last.vol_E << ", w1p " << rows[0].w1p_f << " -> "
             << last.w1p_f << ", w1q_inv " << rows[0].w1q_inv << " -> " << last.w1q_inv << ", sup|Dg| in ["
             << lo_dg << ", " << hi_dg << "], sup|Dg^-1| in [" << lo_inv << ", " << hi_inv << "]; " << secs
             << " s";
}

void inverse_round_trip(Outcome& out) {
  const PLMap f = fixtures::sweep_fixture();
  const SmoothedMap g(f, choose_params(f));
  const auto& K = g.input().mesh();
  // half the samples from the smoothed region, half uniform over the domain
  const RegionQuadrature quad = difference_set_quadrature(g, RegionOptions{});
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<size_t> pick(0, quad.nodes.size() - 1);
  const Sampler bulk = cells_sampler(K);
  double worst = 0;
  int blended = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 x = i % 2 == 0 ? quad.nodes[pick(rng)].x : bulk(rng);
    blended += g.owner(x).kind != Patch::Bulk;
    const Vec3 y = g(x);
    worst = std::max(worst, (g(g.inverse(y)) - y).norm());
  }
  out.require(worst <= 1e-11 * K.scale, "round trip");
  out.require(blended >= 5000, "blended samples");
  out.detail << "10000 samples, " << blended << " in smoothed patches, worst |g(g^-1(y)) - y| = " << worst
             << " (scale " << K.scale << ")";
}

double direct_power_sum(const std::vector<WeightedValue>& s, double p) {
  double sum = 0;
  for (const auto& v : s) sum += v.weight * std::pow(std::abs(v.value), p);
  return std::pow(sum, 1 / p);
}

void norm_engine(Outcome& out) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0, 1);
  double worst = 0;
  for (int field = 0; field < 50; ++field) {
    std::vector<WeightedValue> s;
    const int n = 200 + 20 * field;
    for (int i = 0; i < n; ++i) s.push_back({(U(rng) - 0.3) * std::exp(4 * U(rng)), U(rng) / n});
    for (double p : {1.0, 2.0, 3.5}) {
      const double a = RINorm::lp(p)(s), b = direct_power_sum(s, p);
      worst = std::max(worst, std::abs(a - b) / b);
    }
  }
  out.require(worst <= 1e-6, "L^p via rearrangement");
  out.detail << "rearrangement vs direct rel err " << worst << "; ";

  const double M = 3, measure = 2;
  const std::vector<double> deltas = {0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9, 1e-12};
  for (const RINorm& n : {RINorm::lp(2), RINorm::lp(4), RINorm::lorentz(2, 1)}) {
    const RozumnyTable t = rozumny_check(n, M, measure, deltas);
    // M times the fundamental function (q/p-weighted for Lorentz) of the support measure
    double oracle_err = 0;
    for (const auto& r : t.rows) {
      const double c = n.kind == RINorm::Kind::Lorentz ? std::pow(n.p / n.q, 1 / n.q) : 1.0;
      const double oracle = M * c * std::pow(r.delta * measure, 1 / n.p);
      oracle_err = std::max(oracle_err, std::abs(r.norm - oracle) / oracle);
    }
    const bool to_zero = t.rows.back().norm < 1e-2 * t.rows.front().norm;
    out.require(t.monotone && to_zero && oracle_err <= 1e-12, n.name());
    out.detail << n.name() << " " << t.rows.front().norm << " -> " << t.rows.back().norm << " (oracle err "
               << oracle_err << "); ";
  }
}

void negative_controls(Outcome& out) {
  PLMap mixed = fixtures::identity(fixtures::kuhn_grid(1));
  mixed.pieces[3].matrix = diag(-1, 1, 1);
  const ValidationReport v = validate_pl_homeo(mixed);
  bool orientation = false;
  for (const auto& fl : v.failures) orientation = orientation || (fl.kind == "orientation" && fl.a == 3);
  out.require(!v.ok && orientation, "sign-mixed map rejected");

  // z -> z^2 on an annulus: positive Jacobian, two to one
  PointMap fold = [](const Vec3& x) { return Vec3(x(0) * x(0) - x(1) * x(1), 2 * x(0) * x(1), x(2)); };
  JacobianMap jac = [](const Vec3& x) {
    Mat3 J;
    J << 2 * x(0), -2 * x(1), 0, 2 * x(1), 2 * x(0), 0, 0, 0, 1;
    return J;
  };
  Sampler annulus = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0, 1);
    const double r = std::sqrt(1 + 3 * U(rng)), t = 2 * kPi * U(rng);
    return Vec3(r * std::cos(t), r * std::sin(t), U(rng));
  };
  const std::vector<Stratum> strata = {{"annulus", 1.0, annulus}};
  const CertificationReport a = injectivity_audit(fold, jac, strata, 20000, 4.0, 3);
  const CertificationReport b = injectivity_audit(fold, jac, strata, 20000, 4.0, 3);
  const bool witnessed = a.witness && a.witness2 && (fold(*a.witness) - fold(*a.witness2)).norm() < 1e-8 &&
                         (*a.witness - *a.witness2).norm() > 1e-3;
  const bool reproduced = b.witness && b.witness2 && *b.witness == *a.witness && *b.witness2 == *a.witness2;
  out.require(!a.pass && witnessed && reproduced, "fold caught with a reproducing witness");

  // tube radius ramps: a slow one is accepted, a steep one loses the floor
  Mat3 pa = diag(2, 1, 1), pb = diag(2, 1.5, 1);
  pa(2, 0) = pb(2, 0) = 0.5;
  const EdgeFan fan = make_edge_fan({-kPi, -kPi / 2, 0.0, kPi / 2}, {diag(1, 1, 1), pa, pb, diag(1, 1.5, 1)});
  const std::vector<WidthField> ws(4, WidthField::constant(0.8 / 4 * std::tan(kPi / 64)));
  const double base = certify_edge(make_edge_smoother(fan, ws, RadiusField::constant(1.0)), 32, 32, 8, -1, 1).min_det;
  const auto slow = certify_variable_radius(make_edge_smoother(fan, ws, RadiusField::ramp(1.0, 2.0, -20, 40)), base);
  const auto steep = certify_variable_radius(make_edge_smoother(fan, ws, RadiusField::ramp(1.0, 2.0, 0, 1e-3)), base, 24);
  out.require(slow.ok && !steep.ok, "oversized radius slope rejected");
  out.detail << "sign-mixed: " << v.failures.size() << " failures; fold witness " << a.witness.has_value()
             << "; |r'| " << slow.slope_bound << " accepted, " << steep.slope_bound << " rejected (min det "
             << steep.min_det << " < " << steep.required_floor << ")";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"face blend", face_suite},
      {"edge smoothing", edge_suite},
      {"circle isotopy", circle_isotopy},
      {"vertex smoothing", vertex_suite},
      {"end-to-end convergence", convergence},
      {"inverse round trip", inverse_round_trip},
      {"norm engine", norm_engine},
      {"negative controls", negative_controls},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      criteria[i].second(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "exception: " << e.what();
    }
    failed += !out.pass;
    std::printf("criterion %zu %s: %s | %s\n", i + 1, criteria[i].first.c_str(), out.pass ? "PASS" : "FAIL",
                out.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
