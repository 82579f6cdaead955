#pragma once

#include <array>
#include <utility>
#include <vector>

#include "plsmooth/core.hpp"

namespace plsmooth {

using Tet = std::array<Vec3, 4>;

double signed_volume(const Tet& t);
std::array<double, 4> barycentric(const Tet& t, const Vec3& x);
Vec3 tet_centroid(const Tet& t);

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Solid angle subtended at the origin by the triangle (a, b, c).
double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c);

/// Convex polyhedron as a list of outward-oriented polygonal faces.
struct ConvexPolyhedron {
  std::vector<std::vector<Vec3>> faces;

  bool empty() const { return faces.size() < 4; }
  double volume() const;
  Vec3 centroid() const;
};

ConvexPolyhedron make_polyhedron(const Tet& t);
// Triangular prism over (a, b, c) extruded by `height` along `dir`.
ConvexPolyhedron make_prism(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& dir,
                            double height);
// Keeps the part with <n, x> <= c.
ConvexPolyhedron clip(const ConvexPolyhedron& poly, const Vec3& n, double c);
ConvexPolyhedron intersect(const ConvexPolyhedron& poly, const Tet& t);

// Interior overlap volume of two tetrahedra; writes a point of the overlap
// (its centroid) into `witness` when the overlap is nonempty.
double tet_overlap_volume(const Tet& a, const Tet& b, Vec3* witness = nullptr);

// Looks for a point where the closed tetrahedra touch outside the convex
// hull of their shared vertices (given as index pairs into a and b). Returns
// true and fills `witness` when one is found.
bool improper_contact(const Tet& a, const Tet& b, const std::vector<std::pair<int, int>>& shared,
                      double tol, Vec3* witness = nullptr);

// Planar polygon helpers.
std::vector<Vec3> slice_tet(const Tet& t, const Vec3& n, double c);
std::vector<Vec3> clip_polygon(const std::vector<Vec3>& poly, const Vec3& n, double c);
double polygon_area(const std::vector<Vec3>& poly);

struct Box {
  Vec3 lo = Vec3::Constant(1e300);
  Vec3 hi = Vec3::Constant(-1e300);

  void add(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void inflate(double r) {
    lo.array() -= r;
    hi.array() += r;
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool overlaps(const Box& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
  double diagonal() const { return (hi - lo).norm(); }
};

Box box_of(const Tet& t);

/// Uniform bucket grid over a bounding box; items are registered by box.
class GridIndex {
 public:
  GridIndex() = default;
  GridIndex(const Box& bounds, int target_items);

  void insert(int id, const Box& box);
  const std::vector<int>& query(const Vec3& p) const;
  // Sorted, deduplicated ids of every bucket the box touches.
  std::vector<int> query_box(const Box& box) const;

 private:
  int bucket(const Vec3& p) const;
  std::array<int, 3> coords(const Vec3& p) const;

  Box bounds_;
  std::array<int, 3> dims_{1, 1, 1};
  Vec3 cell_ = Vec3::Ones();
  std::vector<std::vector<int>> buckets_;
  std::vector<int> empty_;
};

}  // namespace plsmooth
