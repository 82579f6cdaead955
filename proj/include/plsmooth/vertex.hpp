#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plsmooth/blend.hpp"

namespace plsmooth {

/// A smooth map around a vertex in vertex-local coordinates (vertex and its
/// image at the origin), evaluable on doubles and on jets.
struct HatMap {
  std::function<Vec3(const Vec3&)> value;
  std::function<V3<Jet>(const V3<Jet>&)> jet;
  double df_norm = 1.0;  // sup |Df| of the underlying pieces
  // Optional extra sample points with a <= |x| <= b concentrated on thin
  // features that uniform sampling would miss.
  std::function<std::vector<Vec3>(double a, double b)> features;

  template <class F>
  static HatMap from(F f, double df_norm) {
    HatMap h;
    h.value = [f](const Vec3& x) { return Vec3(f(V3<double>(x))); };
    h.jet = [f](const V3<Jet>& x) { return V3<Jet>(f(x)); };
    h.df_norm = df_norm;
    return h;
  }
  static HatMap linear(const Mat3& A);

  Vec3 operator()(const Vec3& x) const { return value(x); }
  V3<Jet> operator()(const V3<Jet>& x) const { return jet(x); }
};

/// A map of the unit sphere to itself.
struct SphereMap {
  using Fn = std::function<V3<Jet>(const V3<Jet>&)>;
  Fn map;
  Fn raw;  // optional: g(radius x) / radius before normalizing

  Vec3 operator()(const Vec3& x) const;
  // x -> g(radius x) / |g(radius x)|
  static SphereMap from_hat(const HatMap& g, double radius);
  static SphereMap linear(const Mat3& A);
};

// Determinant of the tangent derivative at x in positively oriented bases.
double tangent_det(const SphereMap& mu, const Vec3& x);

struct DegreeResult {
  int degree = 0;
  std::vector<Vec3> preimages;
  std::vector<int> signs;
  double integral = 0;  // integral degree before rounding
  Vec3 value;           // the regular value actually used
};

// Signed preimage count by multi-start Newton from an icosahedral grid,
// cross-checked against the integral degree. Perturbs y when it is not
// regular; throws NumericalError when the two counts disagree.
DegreeResult degree(const SphereMap& mu, const Vec3& y);
DegreeResult degree(const SphereMap& mu, unsigned seed = 1);
// Signed image area / 4 pi, summed over geodesic triangles of an icosphere
// refined until every image edge is shorter than max_edge radians.
double integral_degree(const SphereMap& mu, double max_edge = 0.25);

/// Isotopy of sphere maps: x on S^2, t in [0, 1].
using SphereIsotopy = std::function<V3<Jet>(const V3<Jet>& x, const Jet& t)>;
using IsotopyProvider = std::function<SphereIsotopy(const SphereMap&)>;

// Psi(x, t) = normalize((1 - s(t)) x + s(t) mu(x)); certified on a sample
// grid, NoIsotopyFound when the interpolant nearly vanishes or folds.
SphereIsotopy linear_sphere_isotopy(const SphereMap& mu);
// Same straight path towards the unnormalized map x -> g(radius x) / radius;
// for linear g = A this is normalize(((1 - s) I + s A) x).
SphereIsotopy unnormalized_sphere_isotopy(const SphereMap& mu);
// Tries the providers in order.
IsotopyProvider first_of(std::vector<IsotopyProvider> providers);

struct SubdeterminantReport {
  double floor = 0;
  double radial_floor = 0;  // min <d g / d|x|, g / |g|>
  double required = 0;
  Vec3 worst = Vec3::Zero();
  bool ok = false;
};

// Minimum over sampled x in the shell a <= |x| <= b of the 2x2 subdeterminant
// of Dg in the frames {x/|x|, u2, u3} -> {g/|g|, v2, v3}, together with the
// radial growth of |g|. Both must stay positive.
SubdeterminantReport radial_subdeterminant(const HatMap& g, double a, double b, int samples = 100000);

// Rebuilds the outer map with all widths and radii scaled by 2^-k until the
// subdeterminant certificate holds on R/2 <= |x| <= 2R; returns k.
int shrink_until_certified(const std::function<HatMap(double)>& build, double R, int max_halvings = 16,
                           int samples = 100000);

struct VertexOptions {
  std::optional<double> rho;  // otherwise rho_fraction times the minimal radial stretch
  double rho_fraction = 0.5;
  IsotopyProvider provider = linear_sphere_isotopy;
  int delta_samples = 100000;
};

struct VertexSmoother {
  int vertex = -1;
  double R = 1.0;
  double rho = 0.0;  // the inner map is rho * x
  HatMap hat;
  SphereMap mu;  // hat projected from the sphere of radius 3R/4
  SphereIsotopy isotopy;
  double delta_floor = 0;
};

VertexSmoother make_vertex_smoother(const HatMap& hat, double R, const VertexOptions& opt = {});

// hat outside B(0, R); flattening on R > |x| >= 3R/4; isotopy on 3R/4 > |x| > R/2;
// rho x inside.
template <class T>
V3<T> vertex_map(const VertexSmoother& s, const V3<T>& x);

struct VertexCertificate {
  double min_det = 0;
  Vec3 worst = Vec3::Zero();
  bool ok = false;
};

// Jacobian sampling on a polar grid of B(0, 2R).
VertexCertificate certify_vertex(const VertexSmoother& s, int n = 48);

}  // namespace plsmooth
