#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "plsmooth/core.hpp"
#include "plsmooth/geometry.hpp"
#include "plsmooth/mesh.hpp"

namespace plsmooth {

struct CertificationReport {
  std::string check;
  long samples = 0;
  double worst = 0;      // worst violation; the check fails iff worst > tolerance
  double tolerance = 0;
  double extreme = 0;    // raw extreme value (min det, max error, ...)
  bool pass = false;
  std::optional<Vec3> witness;
  std::optional<Vec3> witness2;  // second preimage of a collision
  unsigned long long seed = 0;
  std::string note;

  std::string summary() const;
};

using PointMap = std::function<Vec3(const Vec3&)>;
using JacobianMap = std::function<Mat3(const Vec3&)>;
using Sampler = std::function<Vec3(std::mt19937_64&)>;

Sampler box_sampler(const Box& box);
// Uniform in volume over the cells of the complex.
Sampler cells_sampler(const SimplicialComplex& K);
Sampler cells_sampler(const SimplicialComplex& K, const std::vector<int>& cells);

// Central differences with step 1e-6 scale against the analytic Jacobian;
// passes when the largest relative Frobenius error is at most 1e-5. Samples
// whose stencil leaves the domain are skipped.
CertificationReport fd_check(const PointMap& map, const JacobianMap& jac, const Sampler& region, int n,
                             double scale, unsigned long long seed = 1);

// det of the Jacobian at the nodes of a (grid+1)^3 lattice of the box; nodes
// outside the domain (DomainError) are skipped.
CertificationReport jacobian_grid(const JacobianMap& jac, const Box& box, int grid, double floor);
CertificationReport jacobian_points(const JacobianMap& jac, const std::vector<Vec3>& points, double floor);

struct Stratum {
  std::string name;
  double measure = 0;
  Sampler draw;
};

// Stratified samples (at least 500 per stratum, the rest by measure). Pairs
// whose images are close while their preimages are not are refined by Newton
// from one preimage towards the other image; a converged second preimage is
// a collision and fails the audit with both points.
CertificationReport injectivity_audit(const PointMap& map, const JacobianMap& jac,
                                      const std::vector<Stratum>& strata, long n, double scale,
                                      unsigned long long seed = 1);

}  // namespace plsmooth
