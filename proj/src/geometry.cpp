#include "plsmooth/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace plsmooth {

double signed_volume(const Tet& t) {
  return (t[1] - t[0]).dot((t[2] - t[0]).cross(t[3] - t[0])) / 6.0;
}

std::array<double, 4> barycentric(const Tet& t, const Vec3& x) {
  Mat3 E;
  E.col(0) = t[1] - t[0];
  E.col(1) = t[2] - t[0];
  E.col(2) = t[3] - t[0];
  Vec3 l = E.partialPivLu().solve(x - t[0]);
  return {1.0 - l.sum(), l(0), l(1), l(2)};
}

Vec3 tet_centroid(const Tet& t) { return 0.25 * (t[0] + t[1] + t[2] + t[3]); }

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double len2 = ab.squaredNorm();
  double s = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // closest point by Voronoi regions
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  double la = a.norm(), lb = b.norm(), lc = c.norm();
  double num = a.dot(b.cross(c));
  double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
  return 2.0 * std::atan2(num, den);
}

double ConvexPolyhedron::volume() const {
  if (empty()) return 0.0;
  Vec3 ref = faces[0][0];
  double v = 0;
  for (const auto& f : faces)
    for (size_t i = 1; i + 1 < f.size(); ++i)
      v += (f[0] - ref).dot((f[i] - ref).cross(f[i + 1] - ref));
  return v / 6.0;
}

Vec3 ConvexPolyhedron::centroid() const {
  Vec3 ref = faces[0][0];
  Vec3 acc = Vec3::Zero();
  double vol = 0;
  for (const auto& f : faces)
    for (size_t i = 1; i + 1 < f.size(); ++i) {
      double v = (f[0] - ref).dot((f[i] - ref).cross(f[i + 1] - ref));
      acc += v * (ref + f[0] + f[i] + f[i + 1]) / 4.0;
      vol += v;
    }
  return vol != 0 ? Vec3(acc / vol) : ref;
}

ConvexPolyhedron make_polyhedron(const Tet& t) {
  ConvexPolyhedron p;
  static const int idx[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  bool flip = signed_volume(t) < 0;
  for (const auto& f : idx) {
    std::vector<Vec3> poly{t[f[0]], t[f[1]], t[f[2]]};
    if (flip) std::swap(poly[1], poly[2]);
    p.faces.push_back(poly);
  }
  return p;
}

ConvexPolyhedron make_prism(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& dir,
                            double height) {
  Vec3 h = dir * height;
  Vec3 a2 = a + h, b2 = b + h, c2 = c + h;
  ConvexPolyhedron p;
  p.faces = {{a, c, b}, {a2, b2, c2}, {a, b, b2, a2}, {b, c, c2, b2}, {c, a, a2, c2}};
  if ((b - a).cross(c - a).dot(h) < 0) {
    for (auto& f : p.faces) std::reverse(f.begin(), f.end());
  }
  return p;
}

std::vector<Vec3> clip_polygon(const std::vector<Vec3>& poly, const Vec3& n, double c) {
  std::vector<Vec3> out;
  const size_t m = poly.size();
  for (size_t i = 0; i < m; ++i) {
    const Vec3& p = poly[i];
    const Vec3& q = poly[(i + 1) % m];
    double dp = n.dot(p) - c, dq = n.dot(q) - c;
    if (dp <= 0) out.push_back(p);
    if ((dp < 0 && dq > 0) || (dp > 0 && dq < 0)) out.push_back(p + (dp / (dp - dq)) * (q - p));
  }
  return out;
}

namespace {

// Orders coplanar points counter-clockwise around `normal`, dropping duplicates.
std::vector<Vec3> order_around(std::vector<Vec3> pts, const Vec3& normal, double tol) {
  std::vector<Vec3> uniq;
  for (const auto& p : pts) {
    bool dup = false;
    for (const auto& q : uniq)
      if ((p - q).norm() <= tol) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(p);
  }
  if (uniq.size() < 3) return {};
  Vec3 center = Vec3::Zero();
  for (const auto& p : uniq) center += p;
  center /= double(uniq.size());
  Mat3 R = frame_with_third_axis(normal);
  std::vector<std::pair<double, Vec3>> keyed;
  for (const auto& p : uniq) {
    Vec3 l = R * (p - center);
    keyed.push_back({std::atan2(l(1), l(0)), p});
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<Vec3> out;
  for (auto& k : keyed) out.push_back(k.second);
  return out;
}

double poly_scale(const ConvexPolyhedron& p) {
  Box b;
  for (const auto& f : p.faces)
    for (const auto& v : f) b.add(v);
  return b.diagonal();
}

}  // namespace

ConvexPolyhedron clip(const ConvexPolyhedron& poly, const Vec3& n, double c) {
  ConvexPolyhedron out;
  if (poly.empty()) return out;
  double tol = 1e-13 * std::max(1.0, poly_scale(poly));
  std::vector<Vec3> cap;
  bool face_on_plane = false;
  for (const auto& f : poly.faces) {
    auto g = clip_polygon(f, n, c);
    int on = 0;
    for (const auto& v : g)
      if (std::abs(n.dot(v) - c) <= tol) {
        cap.push_back(v);
        ++on;
      }
    if (g.size() >= 3) {
      if (on == int(g.size())) face_on_plane = true;
      out.faces.push_back(std::move(g));
    }
  }
  if (!face_on_plane) {
    auto capped = order_around(cap, n, tol);
    if (capped.size() >= 3) out.faces.push_back(std::move(capped));
  }
  if (out.faces.size() < 4) out.faces.clear();
  return out;
}

ConvexPolyhedron intersect(const ConvexPolyhedron& poly, const Tet& t) {
  ConvexPolyhedron out = poly;
  double sign = signed_volume(t) < 0 ? -1.0 : 1.0;
  static const int idx[4][4] = {{1, 2, 3, 0}, {0, 3, 2, 1}, {0, 1, 3, 2}, {0, 2, 1, 3}};
  for (const auto& f : idx) {
    Vec3 n = sign * (t[f[1]] - t[f[0]]).cross(t[f[2]] - t[f[0]]);
    if (n.dot(t[f[3]] - t[f[0]]) > 0) n = -n;
    n.normalize();
    out = clip(out, n, n.dot(t[f[0]]));
    if (out.empty()) break;
  }
  return out;
}

double tet_overlap_volume(const Tet& a, const Tet& b, Vec3* witness) {
  if (!box_of(a).overlaps(box_of(b))) return 0.0;
  ConvexPolyhedron p = intersect(make_polyhedron(a), b);
  if (p.empty()) return 0.0;
  double v = p.volume();
  if (v > 0 && witness) *witness = p.centroid();
  return std::max(v, 0.0);
}

namespace {

double hull_distance(const Vec3& x, const std::vector<Vec3>& hull) {
  switch (hull.size()) {
    case 0:
      return 1e300;
    case 1:
      return (x - hull[0]).norm();
    case 2:
      return point_segment_distance(x, hull[0], hull[1]);
    default:
      return point_triangle_distance(x, hull[0], hull[1], hull[2]);
  }
}

// Closest points between segments pq and rs.
std::pair<Vec3, Vec3> segment_closest(const Vec3& p, const Vec3& q, const Vec3& r, const Vec3& s) {
  Vec3 d1 = q - p, d2 = s - r, w = p - r;
  double a = d1.dot(d1), e = d2.dot(d2), f = d2.dot(w);
  double sc, tc;
  double c = d1.dot(w), b = d1.dot(d2);
  double den = a * e - b * b;
  sc = den > 1e-300 ? std::clamp((b * f - c * e) / den, 0.0, 1.0) : 0.0;
  tc = (b * sc + f) / e;
  if (tc < 0) {
    tc = 0;
    sc = std::clamp(-c / a, 0.0, 1.0);
  } else if (tc > 1) {
    tc = 1;
    sc = std::clamp((b - c) / a, 0.0, 1.0);
  }
  return {p + sc * d1, r + tc * d2};
}

const int kEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
const int kFaces[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};

bool contact_one_way(const Tet& a, const Tet& b, const std::vector<int>& shared_a,
                     const std::vector<Vec3>& hull, double tol, Vec3* witness) {
  double size = std::max(box_of(b).diagonal(), 1e-300);
  for (int i = 0; i < 4; ++i) {
    if (std::find(shared_a.begin(), shared_a.end(), i) != shared_a.end()) continue;
    auto l = barycentric(b, a[i]);
    double lo = *std::min_element(l.begin(), l.end());
    if (lo >= -tol / size && hull_distance(a[i], hull) > tol) {
      if (witness) *witness = a[i];
      return true;
    }
  }
  for (const auto& e : kEdges) {
    const Vec3 &p = a[e[0]], &q = a[e[1]];
    for (const auto& f : kFaces) {
      const Vec3 &u = b[f[0]], &v = b[f[1]], &w = b[f[2]];
      Vec3 n = (v - u).cross(w - u);
      double dp = n.dot(p - u), dq = n.dot(q - u);
      if (dp * dq >= 0 || n.norm() == 0) continue;
      Vec3 x = p + (dp / (dp - dq)) * (q - p);
      if (point_triangle_distance(x, u, v, w) <= tol && hull_distance(x, hull) > tol) {
        if (witness) *witness = x;
        return true;
      }
    }
  }
  return false;
}

}  // namespace

bool improper_contact(const Tet& a, const Tet& b, const std::vector<std::pair<int, int>>& shared,
                      double tol, Vec3* witness) {
  Box ba = box_of(a), bb = box_of(b);
  ba.inflate(tol);
  if (!ba.overlaps(bb)) return false;
  std::vector<int> sa, sb;
  std::vector<Vec3> hull;
  for (auto [i, j] : shared) {
    sa.push_back(i);
    sb.push_back(j);
    hull.push_back(a[i]);
  }
  if (contact_one_way(a, b, sa, hull, tol, witness)) return true;
  if (contact_one_way(b, a, sb, hull, tol, witness)) return true;
  for (const auto& e : kEdges)
    for (const auto& g : kEdges) {
      auto [x, y] = segment_closest(a[e[0]], a[e[1]], b[g[0]], b[g[1]]);
      if ((x - y).norm() <= tol && hull_distance(x, hull) > tol) {
        if (witness) *witness = x;
        return true;
      }
    }
  return false;
}

std::vector<Vec3> slice_tet(const Tet& t, const Vec3& n, double c) {
  std::vector<Vec3> pts;
  for (const auto& e : kEdges) {
    double d0 = n.dot(t[e[0]]) - c, d1 = n.dot(t[e[1]]) - c;
    if (d0 == 0) pts.push_back(t[e[0]]);
    if (d1 == 0) pts.push_back(t[e[1]]);
    if ((d0 < 0 && d1 > 0) || (d0 > 0 && d1 < 0))
      pts.push_back(t[e[0]] + (d0 / (d0 - d1)) * (t[e[1]] - t[e[0]]));
  }
  return order_around(pts, n, 1e-14 * std::max(1.0, box_of(t).diagonal()));
}

double polygon_area(const std::vector<Vec3>& poly) {
  if (poly.size() < 3) return 0.0;
  Vec3 s = Vec3::Zero();
  for (size_t i = 1; i + 1 < poly.size(); ++i) s += (poly[i] - poly[0]).cross(poly[i + 1] - poly[0]);
  return 0.5 * s.norm();
}

Box box_of(const Tet& t) {
  Box b;
  for (const auto& p : t) b.add(p);
  return b;
}

GridIndex::GridIndex(const Box& bounds, int target_items) : bounds_(bounds) {
  Vec3 ext = (bounds.hi - bounds.lo).cwiseMax(1e-12);
  double vol = ext.prod();
  double h = std::cbrt(vol / std::max(1, target_items));
  for (int i = 0; i < 3; ++i) {
    dims_[i] = std::clamp(int(std::ceil(ext(i) / h)), 1, 256);
    cell_(i) = ext(i) / dims_[i];
  }
  buckets_.assign(size_t(dims_[0]) * dims_[1] * dims_[2], {});
}

std::array<int, 3> GridIndex::coords(const Vec3& p) const {
  std::array<int, 3> c;
  for (int i = 0; i < 3; ++i)
    c[i] = std::clamp(int(std::floor((p(i) - bounds_.lo(i)) / cell_(i))), 0, dims_[i] - 1);
  return c;
}

int GridIndex::bucket(const Vec3& p) const {
  auto c = coords(p);
  return (c[2] * dims_[1] + c[1]) * dims_[0] + c[0];
}

void GridIndex::insert(int id, const Box& box) {
  if (buckets_.empty()) return;
  auto lo = coords(box.lo), hi = coords(box.hi);
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) buckets_[(k * dims_[1] + j) * dims_[0] + i].push_back(id);
}

std::vector<int> GridIndex::query_box(const Box& box) const {
  std::vector<int> out;
  if (buckets_.empty() || !box.overlaps(bounds_)) return out;
  auto lo = coords(box.lo), hi = coords(box.hi);
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const auto& b = buckets_[(k * dims_[1] + j) * dims_[0] + i];
        out.insert(out.end(), b.begin(), b.end());
      }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const std::vector<int>& GridIndex::query(const Vec3& p) const {
  if (buckets_.empty()) return empty_;
  Box b = bounds_;
  b.inflate(1e-9 * std::max(1.0, bounds_.diagonal()));
  if (!b.contains(p)) return empty_;
  return buckets_[bucket(p)];
}

}  // namespace plsmooth
