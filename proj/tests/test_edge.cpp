#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "plsmooth/edge.hpp"

using namespace plsmooth;

namespace {

Mat3 diag(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }

// (x, y, z) -> (a(x), b(y), z) with a, b piecewise linear: four quadrant pieces
EdgeFan orthogonal_fan(double ax = 2.0, double by = 1.5) {
  return make_edge_fan({-kPi, -kPi / 2, 0.0, kPi / 2},
                       {diag(1, 1, 1), diag(ax, 1, 1), diag(ax, by, 1), diag(1, by, 1)});
}

// third image coordinate z + c x with c = 0.5 for x > 0
EdgeFan sheared_fan() {
  Mat3 a = diag(2, 1, 1), b = diag(2, 1.5, 1);
  a(2, 0) = b(2, 0) = 0.5;
  return make_edge_fan({-kPi, -kPi / 2, 0.0, kPi / 2}, {diag(1, 1, 1), a, b, diag(1, 1.5, 1)});
}

EdgeFan flat_fan() { return make_edge_fan({-kPi, 0.0}, {Mat3::Identity(), diag(1, 2, 1)}); }

// independent piecewise-linear oracle: the piece of the sector containing y
Mat3 sector_piece(const EdgeFan& fan, const Vec3& y) {
  double th = std::atan2(y(1), y(0));
  if (th >= kPi) th -= 2 * kPi;
  size_t k = fan.angles.size() - 1;
  for (size_t i = 0; i + 1 < fan.angles.size(); ++i)
    if (th >= fan.angles[i] && th < fan.angles[i + 1]) k = i;
  return fan.pieces[k];
}

double width_bound(const EdgeFan& fan, double r) {
  double gap = 2 * kPi;
  for (size_t i = 0; i < fan.angles.size(); ++i) {
    double next = i + 1 < fan.angles.size() ? fan.angles[i + 1] : fan.angles[0] + 2 * kPi;
    gap = std::min(gap, next - fan.angles[i]);
  }
  return r / 4 * std::tan(std::min(gap, kPi / 8) / 8);
}

EdgeSmoother smoother(const EdgeFan& fan, double r, double wfrac = 0.8) {
  std::vector<WidthField> w(fan.angles.size(), WidthField::constant(wfrac * width_bound(fan, r)));
  return make_edge_smoother(fan, w, RadiusField::constant(r));
}

bool in_some_slab(const EdgeSmoother& s, const Vec3& y) {
  for (const auto& b : s.blends) {
    Vec3 l = b.pair.frame.to_local(V3<double>(y));
    if (l(0) > 0 && l(0) < b.width(l(1), l(2))) return true;
  }
  return false;
}

Vec3 cyl(double t, double th, double z) { return Vec3(t * std::cos(th), t * std::sin(th), z); }

bool within_ulp(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i)
    if (a(i) != b(i) && std::nextafter(a(i), b(i)) != b(i)) return false;
  return true;
}

}  // namespace

TEST_CASE("wedge map of equal pieces is the piece") {
  Mat3 A = Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix() * 1.7;
  A.col(2) = Vec3(0, 0, 1.7);
  auto fan = make_edge_fan({-2.0, 0.5, 2.0}, {A, A, A});
  CHECK(fan.trivial);
  auto s = smoother(fan, 1.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 1000; ++k) {
    Vec3 y(u(rng), u(rng), u(rng));
    CHECK(within_ulp(wedge_map(s, V3<double>(y)), A * y));
    CHECK(Vec3(seglem_extend(s, V3<double>(y))) == Vec3(mul(A, V3<double>(y))));
  }
  auto iso = edge_isotopy(s, 0.3);
  for (double th : {-3.0, 0.0, 1.0}) CHECK(iso.angle(th, 0.5) == th);
}

TEST_CASE("flat fan wedge map is the face blend") {
  auto fan = flat_fan();
  auto s = smoother(fan, 1.0);
  Frame fr;
  fr.rotation = frame_with_first_axis(Vec3(0, 1, 0));
  auto pair = make_face_pair(Affine{Mat3::Identity(), Vec3::Zero()}, Affine{diag(1, 2, 1), Vec3::Zero()}, fr);
  auto b = make_face_blend(pair, s.blends[1].width);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 1000; ++k) {
    Vec3 y(2 * u(rng), 0.02 * u(rng), u(rng));
    if (std::hypot(y(0), y(1)) < 1) y(0) += y(0) < 0 ? -1 : 1;
    CHECK((Vec3(wedge_map(s, V3<double>(y))) - Vec3(face_blend_world(b, V3<double>(y)))).norm() <= 1e-15);
  }
}

TEST_CASE("orthogonal fan: away from slabs the wedge map is f") {
  auto fan = orthogonal_fan();
  auto s = smoother(fan, 1.0);
  Vec3 y(0.9, 1.3, 0.2);  // sector interior, far from the slabs
  CHECK(!in_some_slab(s, y));
  CHECK(Vec3(wedge_map(s, V3<double>(y))) == Vec3(2 * 0.9, 1.5 * 1.3, 0.2));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  int checked = 0, ok = 0;
  for (int k = 0; k < 100000; ++k) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (std::hypot(p(0), p(1)) < 1 || in_some_slab(s, p)) continue;
    ++checked;
    ok += within_ulp(wedge_map(s, V3<double>(p)), sector_piece(fan, p) * p);
  }
  CHECK(checked > 90000);
  CHECK(ok == checked);
}

TEST_CASE("slab overlap is rejected") {
  auto fan = orthogonal_fan();
  std::vector<WidthField> w(4, WidthField::constant(1.01 * width_bound(fan, 1.0)));
  CHECK_THROWS_AS(make_edge_smoother(fan, w, RadiusField::constant(1.0)), CertificationError);
}

TEST_CASE("gluing at the cylinder wall") {
  for (const auto& fan : {flat_fan(), orthogonal_fan()}) {
    auto s = smoother(fan, 1.0);
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
      double th = -kPi + 2 * kPi * (k + 0.37) / 1000;
      double z = std::sin(7.0 * k);
      for (double eps : {0.0, 1e-13}) {
        Vec3 in = cyl(1.0 - eps, th, z);
        Vec3 a = seglem_extend(s, V3<double>(in));
        Vec3 b = wedge_map(s, V3<double>(cyl(1.0, th, z)));
        worst = std::max(worst, (a - b).norm());
      }
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("horizontal planes stay horizontal inside the tube") {
  auto fan = orthogonal_fan();
  auto s = smoother(fan, 0.5);
  double worst = 0;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 64; ++j)
      for (double c : {-1.0, 0.0, 0.3}) {
        Vec3 y = cyl(0.8 * 0.5 * (i + 0.5) / 40, -kPi + 2 * kPi * j / 64, c);
        worst = std::max(worst, std::abs(seglem_extend(s, V3<double>(y))(2) - c));
      }
  CHECK(worst <= 1e-10);

  auto flat = smoother(flat_fan(), 1.0);
  double flat_worst = 0;
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j < 128; ++j) {
      Vec3 y = cyl(0.4 + 0.6 * i / 60, -kPi + 2 * kPi * j / 128, 0.0);
      flat_worst = std::max(flat_worst, std::abs(seglem_extend(flat, V3<double>(y))(2)));
    }
  CHECK(flat_worst <= 1e-12);
}

TEST_CASE("Jacobian positive on a 64^3 cylindrical grid") {
  auto t0 = std::chrono::steady_clock::now();
  auto s = smoother(orthogonal_fan(), 1.0);
  auto c = certify_edge(s, 64, 64, 64, -1.0, 1.0);
  CHECK(c.ok);
  CHECK(c.min_det > 0);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 60);
  MESSAGE("min det " << c.min_det << " at " << c.worst.transpose() << ", " << secs << " s");
}

TEST_CASE("Jets agree with finite differences in every annulus") {
  auto s = smoother(orthogonal_fan(), 1.0);
  for (double t : {0.2, 0.45, 0.55, 0.7, 0.85, 0.95, 1.2})
    for (double th : {-2.9, -1.0, 0.3, 1.9}) {
      Vec3 y = cyl(t, th, 0.1);
      Mat3 J = jacobian_of(seglem_extend(s, seed(y)));
      Mat3 fd;
      double h = 1e-7;
      for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Unit(k) * h;
        fd.col(k) = (Vec3(seglem_extend(s, V3<double>(y + e))) - Vec3(seglem_extend(s, V3<double>(y - e)))) / (2 * h);
      }
      CHECK((J - fd).norm() <= 1e-5 * (1 + J.norm()));
    }
}

TEST_CASE("derivative constant is scale invariant") {
  auto fan = orthogonal_fan();
  double dfn = 0;
  for (const auto& B : fan.pieces) dfn = std::max(dfn, B.norm());
  std::vector<double> cs;
  for (double lam : {1.0, 0.5, 0.25}) {
    auto s = smoother(fan, lam);
    double sup = 0;
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 256; ++j) {
        Vec3 y = cyl(lam * 1.2 * (i + 0.5) / 48, -kPi + 2 * kPi * (j + 0.5) / 256, 0.1 * lam);
        sup = std::max(sup, jacobian_of(seglem_extend(s, seed(y))).norm());
      }
    cs.push_back(sup / (dfn + 1));
  }
  for (double c : cs) CHECK(c == doctest::Approx(cs[0]).epsilon(0.05));
}

TEST_CASE("circle isotopy examples") {
  const double phi = 0.7;
  auto rot = CircleIsotopy::from_lift([phi](const Jet& th) { return th + phi; });
  for (double th : {-3.0, 0.0, 2.0})
    for (double t : {0.0, 0.3, 0.5, 1.0})
      CHECK(rot.angle(th, t) == doctest::Approx(th + time_profile(t) * phi).epsilon(1e-15));

  auto id = CircleIsotopy::from_lift([](const Jet& th) { return th; });
  for (double t : {0.0, 0.5, 1.0}) CHECK(id.angle(1.25, t) == 1.25);

  auto wob = CircleIsotopy::from_lift([](const Jet& th) { return th + 0.3 * sin(th); });
  double lo = 1e9, hi = -1e9, end_err = 0;
  for (int i = 0; i <= 64; ++i)
    for (int k = 0; k < 256; ++k) {
      double t = i / 64.0, th = 2 * kPi * k / 256;
      Jet a = wob.angle(Jet(th, 0), Jet(t, 1));
      double want = 1 + 0.3 * time_profile(t) * std::cos(th);
      CHECK(a.v(0) == doctest::Approx(want).epsilon(1e-13));
      lo = std::min(lo, a.v(0));
      hi = std::max(hi, a.v(0));
      if (i == 0) end_err = std::max(end_err, std::abs(a.a - th));
      if (i == 64) end_err = std::max(end_err, std::abs(a.a - th - 0.3 * std::sin(th)));
    }
  CHECK(lo >= 0.7 - 1e-12);
  CHECK(hi <= 1.3 + 1e-12);
  CHECK(end_err <= 1e-12);
  auto b = wob.bounds();
  CHECK(b.min_dtheta >= 0.7 - 1e-12);
  CHECK(b.max_dtheta <= 1.3 + 1e-12);
  CHECK(b.max_dt > 0);

  CHECK_THROWS_AS(CircleIsotopy::from_lift([](const Jet& th) { return th + 2.0 * sin(th); }), ValidationError);
  CHECK_THROWS_AS(CircleIsotopy::from_lift([](const Jet& th) { return 2.0 * th; }), ValidationError);
}

TEST_CASE("sampled lifts interpolate") {
  std::vector<double> h;
  for (int k = 0; k < 64; ++k) {
    double th = 2 * kPi * k / 64;
    h.push_back(th + 0.3 * std::sin(th) + 0.1 * std::cos(2 * th) + 0.2);
  }
  auto iso = CircleIsotopy::from_samples(h);
  for (double th : {0.1, 1.7, 4.0}) {
    CHECK(iso.lift(th) == doctest::Approx(th + 0.3 * std::sin(th) + 0.1 * std::cos(2 * th) + 0.2).epsilon(1e-12));
    CHECK(iso.lift_prime(th) == doctest::Approx(1 + 0.3 * std::cos(th) - 0.2 * std::sin(2 * th)).epsilon(1e-12));
  }
  std::vector<double> bad = h;
  std::swap(bad[3], bad[4]);
  CHECK_THROWS_AS(CircleIsotopy::from_samples(bad), ValidationError);
}

TEST_CASE("edge isotopy ends at the image circle") {
  auto s = smoother(orthogonal_fan(), 1.0);
  auto iso = edge_isotopy(s, 0.0);
  for (double th : {-2.5, -0.3, 0.9, 2.2}) {
    CHECK(iso.angle(th, 0.0) == th);
    Vec3 g = wedge_map(s, V3<double>(cyl(0.6, th, 0.0)));
    CHECK(wrap_angle(iso.angle(th, 1.0) - std::atan2(g(1), g(0))) == doctest::Approx(0).scale(1e-12));
  }
  auto b = iso.bounds(512, 33);
  CHECK(b.min_lift_prime > 0);
  MESSAGE("measured sup |d alpha / dt| = " << b.max_dt);
}

TEST_CASE("variable radius") {
  auto fan = sheared_fan();
  double w = 0.8 * width_bound(fan, 1.0);
  std::vector<WidthField> ws(4, WidthField::constant(w));
  auto constant = make_edge_smoother(fan, ws, RadiusField::constant(1.0));
  auto base = certify_edge(constant, 32, 32, 8, -1, 1);

  // a degenerate ramp reproduces the constant tube exactly
  auto same = make_edge_smoother(fan, ws, RadiusField::ramp(1.0, 1.0, 0.0, 1.0));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int k = 0; k < 2000; ++k) {
    Vec3 y(u(rng), u(rng), u(rng));
    CHECK(Vec3(seglem_extend(same, V3<double>(y))) == Vec3(seglem_extend(constant, V3<double>(y))));
  }

  // slow ramp from r0 to 2 r0
  auto slow = make_edge_smoother(fan, ws, RadiusField::ramp(1.0, 2.0, -20.0, 40.0));
  CHECK(slow.radius.slope_bound() == doctest::Approx(0.05));
  int neg = 0;
  for (int k = 0; k < 100000; ++k) {
    double z = -25 + 50 * (k + 0.5) / 100000;
    double t = slow.radius(z) * std::fmod(0.618034 * k, 1.0);
    Vec3 y = cyl(t, 2 * kPi * std::fmod(0.7548777 * k, 1.0) - kPi, z);
    neg += !(jacobian_of(seglem_extend(slow, seed(y))).determinant() > 0);
  }
  CHECK(neg == 0);
  auto rep = certify_variable_radius(slow, base.min_det);
  CHECK(rep.ok);

  // shorten the ramp until the floor is lost
  double accepted = 0, rejected = 0;
  for (double len = 256.0; len > 1e-4; len /= 2) {
    auto s = make_edge_smoother(fan, ws, RadiusField::ramp(1.0, 2.0, 0.0, len));
    auto r = certify_variable_radius(s, base.min_det, 24);
    if (r.ok) {
      accepted = r.slope_bound;
    } else {
      rejected = r.slope_bound;
      break;
    }
  }
  CHECK(rejected > 0);
  CHECK(accepted > 0);
  MESSAGE("largest accepted |r'| " << accepted << ", first rejected " << rejected);
}

TEST_CASE("fan validation") {
  CHECK_THROWS_AS(make_edge_fan({0.0, -1.0}, {Mat3::Identity(), Mat3::Identity()}), ValidationError);
  CHECK_THROWS_AS(make_edge_fan({-kPi, 0.0}, {Mat3::Identity(), diag(2, 1, 1)}), ValidationError);
  CHECK_THROWS_AS(make_edge_fan({-kPi, 0.0}, {Mat3::Identity(), diag(1, 1, 2)}), ValidationError);
}
