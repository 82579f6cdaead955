#pragma once

#include <functional>

#include "plsmooth/mesh.hpp"

namespace fixtures {

using plsmooth::PLMap;
using plsmooth::Vec3;

std::shared_ptr<const plsmooth::SimplicialComplex> single_tet_complex();
// Freudenthal triangulation of [0,n]^3 with 6 cells per unit cube.
std::shared_ptr<const plsmooth::SimplicialComplex> kuhn_grid(int n);

PLMap identity(std::shared_ptr<const plsmooth::SimplicialComplex> K);
PLMap from_images(std::shared_ptr<const plsmooth::SimplicialComplex> K,
                  const std::function<Vec3(const Vec3&)>& image);

// Two unit tetrahedra glued on {x1 = 0}: identity on the left, diag(2,1,1) on the right.
PLMap two_tets();

// 4x4x4 Kuhn grid on [0,4]^3 whose central vertex (2,2,2) is sent to (2,2,2)+shift.
PLMap displaced_center(const Vec3& shift, int n = 4);

// Default end-to-end fixture.
PLMap sweep_fixture();

}  // namespace fixtures
