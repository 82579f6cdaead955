#pragma once

#include <array>
#include <vector>

#include "plsmooth/core.hpp"

namespace plsmooth {

struct Rule1D {
  std::vector<double> nodes;  // on [-1, 1]
  std::vector<double> weights;
};

Rule1D gauss_legendre(int n);

// Nodes and weights of a product rule on the unit sphere: Gauss in z = cos(theta),
// uniform in phi. Weights sum to 4 pi.
struct SphereRule {
  std::vector<Vec3> points;
  std::vector<double> weights;
  // parameter pairs (z, phi) of each point
  std::vector<double> z, phi;
};
SphereRule sphere_rule(int n_z);

// Near-uniform point sets on the unit sphere.
std::vector<Vec3> fibonacci_sphere(int n);
std::vector<Vec3> icosphere(int level);  // 10 * 4^level + 2 points

// Same points with outward oriented triangles.
struct SphereMesh {
  std::vector<Vec3> points;
  std::vector<std::array<int, 3>> triangles;
};
SphereMesh icosphere_mesh(int level);

}  // namespace plsmooth
