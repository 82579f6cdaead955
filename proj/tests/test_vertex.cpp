#include <doctest.h>

#include <cmath>
#include <random>

#include "plsmooth/quadrature.hpp"
#include "plsmooth/vertex.hpp"

using namespace plsmooth;

namespace {

Mat3 diag(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }

// midpoint rule in (theta, phi) for the pulled-back area form, by central differences
double quadrature_degree(const std::function<Vec3(const Vec3&)>& mu, int n = 200) {
  auto pt = [](double th, double ph) {
    return Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
  };
  const double h = 1e-5;
  double total = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2 * n; ++j) {
      double th = kPi * (i + 0.5) / n, ph = kPi * (j + 0.5) / n;
      Vec3 dth = (mu(pt(th + h, ph)) - mu(pt(th - h, ph))) / (2 * h);
      Vec3 dph = (mu(pt(th, ph + h)) - mu(pt(th, ph - h))) / (2 * h);
      total += mu(pt(th, ph)).dot(dth.cross(dph)) * (kPi / n) * (kPi / n);
    }
  return total / (4 * kPi);
}

// face blend of x -> x and x -> x + K x1 e2 across {x1 = 0} with width w
HatMap shear(double K, double w) {
  Mat3 A = Mat3::Identity();
  A(1, 0) = K;
  return HatMap::from(
      [K, w](const auto& x) {
        using T = typename std::decay_t<decltype(x)>::Scalar;
        T e = eta(T(x(0) / w));
        return V3<T>(x(0), x(1) + K * x(0) * e, x(2));
      },
      A.norm());
}

Vec3 unit(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  return Vec3(nd(rng), nd(rng), nd(rng)).normalized();
}

VertexOptions fast() {
  VertexOptions o;
  o.delta_samples = 20000;
  return o;
}

}  // namespace

TEST_CASE("degree of basic sphere maps") {
  auto id = SphereMap::linear(Mat3::Identity());
  auto anti = SphereMap::linear(-Mat3::Identity());
  auto stretch = SphereMap::linear(diag(1, 1, 2));
  CHECK(degree(id).degree == 1);
  CHECK(degree(anti).degree == -1);
  CHECK(quadrature_degree([&](const Vec3& x) { return stretch(x); }) == doctest::Approx(1).epsilon(1e-4));
  auto d = degree(stretch);
  CHECK(d.degree == 1);
  CHECK(d.preimages.size() == 1);
  CHECK(d.integral == doctest::Approx(1).epsilon(1e-9));
  CHECK(quadrature_degree([&](const Vec3& x) { return anti(x); }) == doctest::Approx(-1).epsilon(1e-4));
}

TEST_CASE("degree does not depend on the regular value") {
  auto mu = SphereMap::from_hat(shear(3.0, 0.05), 0.75);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 5; ++k) {
    auto d = degree(mu, unit(rng));
    CHECK(d.degree == 1);
    CHECK(d.preimages.size() >= 1);
  }
  // a map of degree 2 in the plane z = 0 extended by suspension
  SphereMap twice{[](const V3<Jet>& x) {
    Jet c = x(0) * x(0) - x(1) * x(1), s = 2.0 * x(0) * x(1);
    V3<Jet> y(c, s, x(2));
    return V3<Jet>(y / norm3(y));
  }};
  double oracle = quadrature_degree([&](const Vec3& x) { return twice(x); }, 200);
  CHECK(oracle == doctest::Approx(2).epsilon(1e-3));
  CHECK(integral_degree(twice) == doctest::Approx(2).epsilon(1e-9));
  auto d2 = degree(twice, Vec3(0.3, -0.2, 0.5));
  CHECK(d2.degree == 2);
  CHECK(d2.preimages.size() == 2);
}

TEST_CASE("radial subdeterminant") {
  auto one = radial_subdeterminant(HatMap::linear(Mat3::Identity()), 0.5, 2, 5000);
  CHECK(one.floor == doctest::Approx(1).epsilon(1e-12));
  CHECK(one.ok);

  // for symmetric A the subdeterminant is det A / |A x/|x||
  Mat3 A = diag(1, 1, 2);
  auto g = HatMap::linear(A);
  for (const Vec3& d : fibonacci_sphere(200)) {
    V3<Jet> y = g(seed(Vec3(1.3 * d)));
    Mat3 J = jacobian_of(y);
    Mat3 B = frame_with_first_axis(d);
    double s = value_of(y).normalized().dot((J * B.row(1).transpose()).cross(J * B.row(2).transpose()));
    CHECK(s == doctest::Approx(2.0 / (A * d).norm()).epsilon(1e-12));
  }
  auto rep = radial_subdeterminant(g, 0.5, 2, 20000);
  CHECK(rep.ok);
  CHECK(rep.floor == doctest::Approx(1.0).epsilon(1e-3));  // min of 2 / |A d| is 2 / 2
}

TEST_CASE("near-fold shear needs shrinking") {
  const double K = 50, R = 1, w0 = 0.2;
  auto rep = radial_subdeterminant(shear(K, w0), R / 2, 2 * R, 20000);
  CHECK(!rep.ok);
  int k = shrink_until_certified([&](double f) { return shear(K, f * w0); }, R, 16, 20000);
  CHECK(k > 0);
  CHECK(radial_subdeterminant(shear(K, std::ldexp(w0, -k)), R / 2, 2 * R, 100000).ok);
  MESSAGE("shear K = 50, w0/R = 0.2: certified after " << k << " halvings");
}

TEST_CASE("identity star with rho = 1 is the identity") {
  VertexOptions o = fast();
  o.rho = 1.0;
  auto s = make_vertex_smoother(HatMap::linear(Mat3::Identity()), 1.0, o);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int k = 0; k < 2000; ++k) {
    Vec3 x(u(rng), u(rng), u(rng));
    CHECK((Vec3(vertex_map(s, V3<double>(x))) - x).norm() <= 1e-14);
  }
  for (double t : {0.0, 0.4, 1.0}) {
    Vec3 x = Vec3(0.3, -0.4, 0.5).normalized();
    CHECK((value_of(s.isotopy(lift<Jet>(x), Jet(t))) - x).norm() <= 1e-15);
  }
}

TEST_CASE("doubling star matches at both ends of the flattening shell") {
  auto s = make_vertex_smoother(HatMap::linear(2 * Mat3::Identity()), 1.0, fast());
  CHECK(s.rho == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) {
    Vec3 d = unit(rng);
    CHECK((Vec3(vertex_map(s, V3<double>(Vec3(d * (1 - 1e-13))))) - 2 * d).norm() <= 1e-10);
    Vec3 in = vertex_map(s, V3<double>(Vec3(0.75 * d * (1 - 1e-13))));
    Vec3 out = vertex_map(s, V3<double>(Vec3(0.75 * d * (1 + 1e-13))));
    CHECK((in - 0.75 * d).norm() <= 1e-10);
    CHECK((out - 0.75 * d).norm() <= 1e-10);
  }
}

TEST_CASE("sphere isotopy provider") {
  auto id = linear_sphere_isotopy(SphereMap::linear(Mat3::Identity()));
  Vec3 x = Vec3(1, 2, 3).normalized();
  CHECK((value_of(id(lift<Jet>(x), Jet(0.5))) - x).norm() <= 1e-15);

  Mat3 A = diag(1, 1, 2);
  auto mu = SphereMap::linear(A);
  double least = 1e9;
  for (const Vec3& p : fibonacci_sphere(4000))
    for (int i = 0; i <= 20; ++i) {
      double s = time_profile(i / 20.0);
      least = std::min(least, ((1 - s) * p + s * mu(p)).norm());
    }
  CHECK(least > 0.5);
  auto psi = linear_sphere_isotopy(mu);
  for (double t : {0.0, 0.3, 0.5, 0.7, 1.0}) {
    SphereMap at{[psi, t](const V3<Jet>& y) { return psi(y, Jet(t)); }};
    CHECK(degree(at).degree == 1);
  }
  CHECK((value_of(psi(lift<Jet>(x), Jet(1.0))) - (A * x).normalized()).norm() <= 1e-15);

  CHECK_THROWS_AS(linear_sphere_isotopy(SphereMap::linear(-Mat3::Identity())), NoIsotopyFound);
  // a half turn is degree one but the straight-line homotopy passes through 0
  Mat3 half = diag(-1, -1, 1);
  CHECK(degree(SphereMap::linear(half)).degree == 1);
  CHECK_THROWS_AS(linear_sphere_isotopy(SphereMap::linear(half)), NoIsotopyFound);
  CHECK_THROWS_AS(unnormalized_sphere_isotopy(SphereMap::linear(half)), NoIsotopyFound);

  // strong shear: the normalized path folds, the matrix path (1 - s) I + s A does not
  Mat3 S = Mat3::Identity();
  S(1, 0) = 50;
  CHECK_THROWS_AS(linear_sphere_isotopy(SphereMap::linear(S)), NoIsotopyFound);
  auto p = unnormalized_sphere_isotopy(SphereMap::linear(S));
  CHECK((value_of(p(lift<Jet>(x), Jet(1.0))) - (S * x).normalized()).norm() <= 1e-14);
  CHECK_NOTHROW(first_of({linear_sphere_isotopy, unnormalized_sphere_isotopy})(SphereMap::linear(S)));
}

TEST_CASE("linear star diag(1,1,2)") {
  Mat3 A = diag(1, 1, 2);
  auto s = make_vertex_smoother(HatMap::linear(A), 1.0, fast());
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 1000; ++k) {
    Vec3 x = unit(rng) * 0.5 * std::cbrt(u(rng));
    CHECK(Vec3(vertex_map(s, V3<double>(x))) == Vec3(s.rho * x));
  }
  double gap = 0;
  for (int k = 0; k < 1000; ++k) {
    Vec3 d = unit(rng);
    Vec3 a = vertex_map(s, V3<double>(Vec3(0.75 * d * (1 - 1e-14))));
    Vec3 b = vertex_map(s, V3<double>(Vec3(0.75 * d)));
    gap = std::max(gap, (a - b).norm());
    Vec3 y = (1 + u(rng)) * d;
    CHECK(Vec3(vertex_map(s, V3<double>(y))) == Vec3(s.hat(y)));
  }
  CHECK(gap <= 1e-10);
  auto c = certify_vertex(s, 48);
  CHECK(c.ok);
  MESSAGE("diag(1,1,2) star: rho " << s.rho << ", min det " << c.min_det);
}

TEST_CASE("flattening is radially monotone") {
  auto s = make_vertex_smoother(shear(2.0, 0.05), 1.0, fast());
  int bad = 0;
  for (const Vec3& d : fibonacci_sphere(1000)) {
    double last = -1;
    for (int i = 0; i < 100; ++i) {
      double r = 0.75 + 0.25 * i / 99.0;
      double m = Vec3(vertex_map(s, V3<double>(Vec3(r * d)))).norm();
      bad += !(m > last);
      last = m;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("smoothed near-fold star") {
  const double K = 50, w0 = 0.2;
  int k = shrink_until_certified([&](double f) { return shear(K, f * w0); }, 1.0);
  VertexOptions o;
  o.provider = first_of({linear_sphere_isotopy, unnormalized_sphere_isotopy});
  auto s = make_vertex_smoother(shear(K, std::ldexp(w0, -k)), 1.0, o);
  auto c = certify_vertex(s, 48);
  CHECK(c.ok);
  MESSAGE("near-fold star: rho " << s.rho << ", min det " << c.min_det << " at " << c.worst.transpose());
  // Jets against central differences across all shells
  for (double r : {0.3, 0.6, 0.7, 0.8, 0.9, 1.5})
    for (const Vec3& d : fibonacci_sphere(20)) {
      Vec3 x = r * d;
      Mat3 J = jacobian_of(vertex_map(s, seed(x)));
      Mat3 fd;
      double h = 1e-7;
      for (int j = 0; j < 3; ++j) {
        Vec3 e = Vec3::Unit(j) * h;
        fd.col(j) = (Vec3(vertex_map(s, V3<double>(Vec3(x + e)))) - Vec3(vertex_map(s, V3<double>(Vec3(x - e))))) / (2 * h);
      }
      CHECK((J - fd).norm() <= 1e-5 * (1 + J.norm()));
    }
}
