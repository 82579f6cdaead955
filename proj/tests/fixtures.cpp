#include "fixtures.hpp"

#include <algorithm>
#include <array>

namespace fixtures {

using namespace plsmooth;

std::shared_ptr<const SimplicialComplex> single_tet_complex() {
  return std::make_shared<const SimplicialComplex>(
      build_complex({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 1, 2, 3}}));
}

std::shared_ptr<const SimplicialComplex> kuhn_grid(int n) {
  auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
  std::vector<Vec3> pts;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) pts.push_back(Vec3(i, j, k));
  std::vector<Cell> cells;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        std::array<int, 3> perm{0, 1, 2};
        do {
          std::array<int, 3> c{i, j, k};
          Cell cell;
          cell[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[perm[s]] += 1;
            cell[s + 1] = id(c[0], c[1], c[2]);
          }
          cells.push_back(cell);
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
  return std::make_shared<const SimplicialComplex>(build_complex(pts, cells));
}

PLMap identity(std::shared_ptr<const SimplicialComplex> K) {
  std::vector<Affine> pieces(K->cells.size());
  return make_pl_map(K, pieces);
}

PLMap from_images(std::shared_ptr<const SimplicialComplex> K,
                  const std::function<Vec3(const Vec3&)>& image) {
  std::vector<Vec3> images;
  for (const auto& p : K->points) images.push_back(image(p));
  return pl_map_from_vertex_images(K, images);
}

PLMap two_tets() {
  std::vector<Vec3> pts{{0, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, {1, 0, 0}};
  std::vector<Cell> cells{{0, 1, 2, 3}, {0, 1, 2, 4}};
  auto K = std::make_shared<const SimplicialComplex>(build_complex(pts, cells));
  Affine left;
  Affine right;
  right.matrix = Vec3(2, 1, 1).asDiagonal();
  return make_pl_map(K, {left, right});
}

PLMap displaced_center(const Vec3& shift, int n) {
  const Vec3 center = Vec3::Constant(n / 2);
  return from_images(kuhn_grid(n), [&](const Vec3& p) {
    return (p - center).norm() < 1e-12 ? Vec3(p + shift) : p;
  });
}

PLMap sweep_fixture() { return displaced_center(Vec3(0.02, 0.01, -0.015)); }

}  // namespace fixtures
