#include "plsmooth/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>

#include <boost/math/special_functions/legendre.hpp>

namespace plsmooth {

Rule1D gauss_legendre(int n) {
  if (n < 1) throw DomainError("quadrature order must be positive");
  Rule1D r;
  for (double x : boost::math::legendre_p_zeros<double>(n)) {
    double d = boost::math::legendre_p_prime(n, x);
    double w = 2.0 / ((1 - x * x) * d * d);
    r.nodes.push_back(x);
    r.weights.push_back(w);
    if (x != 0) {
      r.nodes.push_back(-x);
      r.weights.push_back(w);
    }
  }
  return r;
}

SphereRule sphere_rule(int n_z) {
  SphereRule s;
  Rule1D g = gauss_legendre(n_z);
  const int n_phi = 2 * n_z;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    double z = g.nodes[i], rho = std::sqrt(1 - z * z);
    for (int k = 0; k < n_phi; ++k) {
      double phi = 2 * kPi * (k + 0.5) / n_phi;
      s.points.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
      s.weights.push_back(g.weights[i] * 2 * kPi / n_phi);
      s.z.push_back(z);
      s.phi.push_back(phi);
    }
  }
  return s;
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  out.reserve(n);
  const double golden = kPi * (3 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    double z = 1 - (2 * k + 1.0) / n;
    double r = std::sqrt(1 - z * z);
    out.emplace_back(r * std::cos(golden * k), r * std::sin(golden * k), z);
  }
  return out;
}

SphereMesh icosphere_mesh(int level) {
  const double t = (1 + std::sqrt(5.0)) / 2;
  std::vector<Vec3> pts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : pts) p.normalize();
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      pts.push_back((pts[a] + pts[b]).normalized());
      return mid[key] = int(pts.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    for (auto [a, b, c] : tris) {
      int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  for (auto& t : tris)
    if ((pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]).dot(pts[t[0]]) < 0) std::swap(t[1], t[2]);
  return {pts, tris};
}

std::vector<Vec3> icosphere(int level) { return icosphere_mesh(level).points; }

}  // namespace plsmooth
