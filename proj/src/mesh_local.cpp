#include <algorithm>
#include <numeric>

#include "plsmooth/mesh.hpp"

namespace plsmooth {

std::vector<FaceIncidence> face_pairs(const PLMap& f) {
  const auto& K = f.mesh();
  std::vector<FaceIncidence> out;
  for (size_t fi = 0; fi < K.faces.size(); ++fi) {
    const auto& v = K.faces[fi];
    const auto& cells = K.face_cells[fi];
    FaceIncidence p;
    p.face = int(fi);
    Vec3 a = K.points[v[0]], b = K.points[v[1]], c = K.points[v[2]];
    Vec3 n = (b - a).cross(c - a).normalized();
    if (cells.size() == 2) {
      int c0 = cells[0], c1 = cells[1];
      double d0 = f.pieces[c0].det(), d1 = f.pieces[c1].det();
      bool swap = d1 < d0 || (d1 == d0 && c1 < c0);
      p.in_cell = swap ? c1 : c0;
      p.out_cell = swap ? c0 : c1;
      p.interior = !K.boundary_face[fi];
      p.trivial = pieces_agree(f.pieces[c0], f.pieces[c1], K.scale);
    } else {
      p.in_cell = cells[0];
      p.trivial = true;
    }
    // orient the normal away from in_cell
    const auto& cin = K.cells[p.in_cell];
    for (int k = 0; k < 4; ++k)
      if (cin[k] != v[0] && cin[k] != v[1] && cin[k] != v[2]) {
        if (n.dot(K.points[cin[k]] - a) > 0) n = -n;
      }
    p.normal = n;
    p.frame.rotation = frame_with_first_axis(n);
    p.frame.origin = a;
    out.push_back(p);
  }
  return out;
}

std::vector<EdgeIncidence> edge_fans(const PLMap& f) {
  const auto& K = f.mesh();
  std::vector<EdgeIncidence> out;
  for (size_t ei = 0; ei < K.edges.size(); ++ei) {
    EdgeIncidence e;
    e.edge = int(ei);
    e.a = K.edges[ei][0];
    e.b = K.edges[ei][1];
    Vec3 pa = K.points[e.a], pb = K.points[e.b];
    e.length = (pb - pa).norm();
    e.frame.origin = pa;
    e.frame.rotation = frame_with_third_axis(pb - pa);
    e.interior = !K.boundary_edge[ei];

    std::vector<std::pair<double, int>> keyed;
    std::vector<int> third;
    for (int fi : K.edge_faces[ei]) {
      const auto& fv = K.faces[fi];
      int x = fv[0] == e.a || fv[0] == e.b ? (fv[1] == e.a || fv[1] == e.b ? fv[2] : fv[1]) : fv[0];
      Vec3 l = e.frame.to_local(V3<double>(K.points[x]));
      double th = std::atan2(l(1), l(0));
      if (th >= kPi) th -= 2 * kPi;
      keyed.push_back({th, fi});
    }
    std::sort(keyed.begin(), keyed.end());
    for (auto& [th, fi] : keyed) {
      e.angles.push_back(th);
      e.faces.push_back(fi);
      const auto& fv = K.faces[fi];
      for (int k = 0; k < 3; ++k)
        if (fv[k] != e.a && fv[k] != e.b) third.push_back(fv[k]);
    }
    const size_t m = e.faces.size();
    e.cells.assign(m, -1);
    for (size_t i = 0; i < m; ++i) {
      int x = third[i], y = third[(i + 1) % m];
      double t0 = e.angles[i];
      double t1 = i + 1 < m ? e.angles[i + 1] : e.angles[0] + 2 * kPi;
      for (int c : K.edge_cells[ei]) {
        const auto& cv = K.cells[c];
        if (std::find(cv.begin(), cv.end(), x) == cv.end() ||
            std::find(cv.begin(), cv.end(), y) == cv.end())
          continue;
        // with two faces the same cell closes both sectors; keep the one it fills
        Vec3 l = e.frame.to_local(V3<double>(tet_centroid(K.cell_points(c))));
        double th = std::atan2(l(1), l(0));
        while (th < t0) th += 2 * kPi;
        if (th < t1) e.cells[i] = c;
      }
    }
    e.trivial = true;
    const auto& ec = K.edge_cells[ei];
    for (size_t i = 1; i < ec.size(); ++i)
      if (!pieces_agree(f.pieces[ec[0]], f.pieces[ec[i]], K.scale)) e.trivial = false;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<VertexIncidence> vertex_stars(const PLMap& f) {
  const auto& K = f.mesh();
  std::vector<VertexIncidence> out;
  for (size_t v = 0; v < K.points.size(); ++v) {
    VertexIncidence s;
    s.vertex = int(v);
    s.cells = K.vertex_cells[v];
    s.interior = !K.boundary_vertex[v];
    for (int c : s.cells)
      for (int k = 0; k < 4; ++k)
        if (K.cells[c][k] == int(v)) s.link_faces.push_back(K.cell_faces[c][k]);
    for (size_t i = 1; i < s.cells.size(); ++i)
      if (!pieces_agree(f.pieces[s.cells[0]], f.pieces[s.cells[i]], K.scale)) s.trivial = false;
    for (int fi : K.vertex_faces[v]) {
      const auto& fc = K.face_cells[fi];
      if (fc.size() == 2 && !pieces_agree(f.pieces[fc[0]], f.pieces[fc[1]], K.scale))
        ++s.nontrivial_faces;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace plsmooth
