#include "plsmooth/mesh.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace plsmooth {

namespace {

const int kLocalEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

FaceKey face_key(int a, int b, int c) {
  FaceKey k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double max_edge(const Tet& t) {
  double m = 0;
  for (const auto& e : kLocalEdges) m = std::max(m, (t[e[0]] - t[e[1]]).norm());
  return m;
}

double condition_number(const Tet& t) {
  Mat3 E;
  for (int i = 0; i < 3; ++i) E.col(i) = t[i + 1] - t[0];
  Eigen::JacobiSVD<Mat3> svd(E);
  auto s = svd.singularValues();
  return s(2) > 0 ? s(0) / s(2) : 1e300;
}

void fill_boundary_flags(SimplicialComplex& K) {
  K.boundary_edge.assign(K.edges.size(), 0);
  K.boundary_vertex.assign(K.points.size(), 0);
  for (size_t f = 0; f < K.faces.size(); ++f) {
    if (!K.boundary_face[f]) continue;
    const auto& v = K.faces[f];
    for (int i = 0; i < 3; ++i) {
      K.boundary_vertex[v[i]] = 1;
      K.boundary_edge[K.find_edge(v[i], v[(i + 1) % 3])] = 1;
    }
  }
}

}  // namespace

int SimplicialComplex::find_face(int a, int b, int c) const {
  FaceKey k = face_key(a, b, c);
  auto it = std::lower_bound(faces.begin(), faces.end(), k);
  return (it != faces.end() && *it == k) ? int(it - faces.begin()) : -1;
}

int SimplicialComplex::find_edge(int a, int b) const {
  EdgeKey k = edge_key(a, b);
  auto it = std::lower_bound(edges.begin(), edges.end(), k);
  return (it != edges.end() && *it == k) ? int(it - edges.begin()) : -1;
}

Tet SimplicialComplex::cell_points(int c) const {
  const auto& v = cells[c];
  return {points[v[0]], points[v[1]], points[v[2]], points[v[3]]};
}

double SimplicialComplex::min_volume() const {
  double m = 1e300;
  for (size_t c = 0; c < cells.size(); ++c)
    m = std::min(m, std::abs(signed_volume(cell_points(int(c)))));
  return m;
}

int SimplicialComplex::locate(const Vec3& x) const {
  const std::vector<int>* cand = nullptr;
  std::vector<int> all;
  if (cell_index) {
    cand = &cell_index->query(x);
  } else {
    all.resize(cells.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = int(i);
    cand = &all;
  }
  int best = -1;
  double best_min = -1e300;
  for (int c : *cand) {
    auto l = barycentric(cell_points(c), x);
    double m = *std::min_element(l.begin(), l.end());
    if (m > best_min) {
      best_min = m;
      best = c;
    }
  }
  return best_min >= -1e-10 ? best : -1;
}

std::vector<ComplexIssue> complex_issues(const std::vector<Vec3>& points,
                                         const std::vector<Cell>& cells, double scale) {
  std::vector<ComplexIssue> issues;
  std::vector<Tet> tets;
  std::vector<double> vols;
  Box bounds;
  for (size_t c = 0; c < cells.size(); ++c) {
    const auto& v = cells[c];
    Tet t{points[v[0]], points[v[1]], points[v[2]], points[v[3]]};
    double e = max_edge(t);
    double det = 6.0 * signed_volume(t);
    if (std::abs(det) < 1e-10 * e * e * e) {
      std::ostringstream os;
      os << "cell " << c << " is degenerate (condition number " << condition_number(t) << ")";
      issues.push_back({"degenerate", int(c), -1, tet_centroid(t), os.str()});
    }
    tets.push_back(t);
    vols.push_back(std::abs(det) / 6.0);
    for (const auto& p : t) bounds.add(p);
  }
  if (!issues.empty()) return issues;

  GridIndex index(bounds, int(cells.size()));
  for (size_t c = 0; c < cells.size(); ++c) index.insert(int(c), box_of(tets[c]));
  double tol = 1e-9 * scale;
  for (size_t i = 0; i < cells.size(); ++i) {
    Box bi = box_of(tets[i]);
    std::vector<int> cand;
    for (int j : index.query_box(bi))
      if (j > int(i)) cand.push_back(j);
    for (int j : cand) {
      if (!bi.overlaps(box_of(tets[j]))) continue;
      std::vector<std::pair<int, int>> shared;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          if (cells[i][a] == cells[j][b]) shared.push_back({a, b});
      if (shared.size() == 4) {
        issues.push_back({"duplicate", int(i), j, tet_centroid(tets[i]), "duplicate cells"});
        continue;
      }
      Vec3 w;
      double ov = tet_overlap_volume(tets[i], tets[j], &w);
      if (ov > 1e-9 * std::min(vols[i], vols[j])) {
        std::ostringstream os;
        os << "cells " << i << " and " << j << " overlap (volume " << ov << ")";
        issues.push_back({"overlap", int(i), j, w, os.str()});
        continue;
      }
      if (improper_contact(tets[i], tets[j], shared, tol, &w)) {
        std::ostringstream os;
        os << "cells " << i << " and " << j << " meet outside a common subsimplex";
        issues.push_back({"contact", int(i), j, w, os.str()});
      }
    }
  }
  return issues;
}

SimplicialComplex build_complex(std::vector<Vec3> points, std::vector<Cell> cells) {
  if (cells.empty()) throw ParseError("mesh has no cells");
  const int n = int(points.size());
  std::vector<char> used(n, 0);
  for (size_t c = 0; c < cells.size(); ++c) {
    for (int i = 0; i < 4; ++i) {
      if (cells[c][i] < 0 || cells[c][i] >= n)
        throw ParseError("cell " + std::to_string(c) + " has an out-of-range vertex index");
      used[cells[c][i]] = 1;
      for (int j = 0; j < i; ++j)
        if (cells[c][i] == cells[c][j])
          throw ParseError("cell " + std::to_string(c) + " repeats a vertex");
    }
  }
  for (int v = 0; v < n; ++v)
    if (!used[v]) throw ParseError("point " + std::to_string(v) + " is not a vertex of any cell");
  for (const auto& p : points)
    if (!p.allFinite()) throw ParseError("non-finite coordinate");

  SimplicialComplex K;
  K.points = std::move(points);
  K.cells = std::move(cells);
  for (const auto& p : K.points) K.bounds.add(p);
  K.scale = std::max(K.bounds.diagonal(), 1e-300);

  auto issues = complex_issues(K.points, K.cells, K.scale);
  if (!issues.empty()) {
    std::string msg = issues.front().message;
    if (issues.size() > 1) msg += " (+" + std::to_string(issues.size() - 1) + " more)";
    throw ValidationError(msg);
  }

  std::map<FaceKey, int> fmap;
  std::map<EdgeKey, int> emap;
  for (const auto& c : K.cells) {
    for (int i = 0; i < 4; ++i) fmap[face_key(c[(i + 1) % 4], c[(i + 2) % 4], c[(i + 3) % 4])] = 0;
    for (const auto& e : kLocalEdges) emap[edge_key(c[e[0]], c[e[1]])] = 0;
  }
  for (auto& [k, id] : fmap) {
    id = int(K.faces.size());
    K.faces.push_back(k);
  }
  for (auto& [k, id] : emap) {
    id = int(K.edges.size());
    K.edges.push_back(k);
  }
  K.face_cells.assign(K.faces.size(), {});
  K.edge_cells.assign(K.edges.size(), {});
  K.edge_faces.assign(K.edges.size(), {});
  K.vertex_cells.assign(K.points.size(), {});
  K.vertex_edges.assign(K.points.size(), {});
  K.vertex_faces.assign(K.points.size(), {});
  for (size_t ci = 0; ci < K.cells.size(); ++ci) {
    const auto& c = K.cells[ci];
    std::array<int, 4> cf;
    std::array<int, 6> ce;
    for (int i = 0; i < 4; ++i) {
      cf[i] = fmap[face_key(c[(i + 1) % 4], c[(i + 2) % 4], c[(i + 3) % 4])];
      K.face_cells[cf[i]].push_back(int(ci));
      K.vertex_cells[c[i]].push_back(int(ci));
    }
    for (int e = 0; e < 6; ++e) {
      ce[e] = emap[edge_key(c[kLocalEdges[e][0]], c[kLocalEdges[e][1]])];
      K.edge_cells[ce[e]].push_back(int(ci));
    }
    K.cell_faces.push_back(cf);
    K.cell_edges.push_back(ce);
  }
  for (size_t f = 0; f < K.faces.size(); ++f) {
    const auto& v = K.faces[f];
    for (int i = 0; i < 3; ++i) {
      K.vertex_faces[v[i]].push_back(int(f));
      K.edge_faces[emap[edge_key(v[i], v[(i + 1) % 3])]].push_back(int(f));
    }
  }
  for (size_t e = 0; e < K.edges.size(); ++e) {
    K.vertex_edges[K.edges[e][0]].push_back(int(e));
    K.vertex_edges[K.edges[e][1]].push_back(int(e));
  }
  K.boundary_face.assign(K.faces.size(), 0);
  for (size_t f = 0; f < K.faces.size(); ++f) {
    if (K.face_cells[f].size() > 2)
      throw ValidationError("face " + std::to_string(f) + " has more than two cells");
    K.boundary_face[f] = K.face_cells[f].size() == 1;
  }
  fill_boundary_flags(K);

  K.cell_index = std::make_shared<GridIndex>(K.bounds, int(K.cells.size()));
  for (size_t c = 0; c < K.cells.size(); ++c) {
    Box b = box_of(K.cell_points(int(c)));
    b.inflate(1e-9 * K.scale);
    K.cell_index->insert(int(c), b);
  }
  return K;
}

void mark_boundary(SimplicialComplex& K, const std::vector<FaceKey>& faces) {
  for (const auto& f : faces) {
    int id = K.find_face(f[0], f[1], f[2]);
    if (id < 0) throw ParseError("domain_boundary lists a face that is not in the mesh");
    K.boundary_face[id] = 1;
  }
  fill_boundary_flags(K);
}

// ---------------------------------------------------------------------------

Vec3 PLMap::operator()(const Vec3& x) const {
  int c = complex->locate(x);
  if (c < 0) throw DomainError("point outside the domain");
  return pieces[c](V3<double>(x));
}

Vec3 PLMap::vertex_image(int v) const {
  int c = complex->vertex_cells[v].front();
  return pieces[c](V3<double>(complex->points[v]));
}

Tet PLMap::image_cell(int c) const {
  Tet t = complex->cell_points(c);
  for (auto& p : t) p = pieces[c](V3<double>(p));
  return t;
}

PLMap make_pl_map(std::shared_ptr<const SimplicialComplex> complex, std::vector<Affine> pieces) {
  if (pieces.size() != complex->cells.size())
    throw ParseError("expected one affine piece per cell");
  for (const auto& a : pieces)
    if (!a.matrix.allFinite() || !a.offset.allFinite()) throw ParseError("non-finite piece");
  PLMap f;
  f.complex = std::move(complex);
  f.pieces = std::move(pieces);
  return f;
}

PLMap pl_map_from_vertex_images(std::shared_ptr<const SimplicialComplex> complex,
                                const std::vector<Vec3>& images) {
  if (images.size() != complex->points.size()) throw ParseError("expected one image per point");
  std::vector<Affine> pieces;
  for (size_t c = 0; c < complex->cells.size(); ++c) {
    const auto& v = complex->cells[c];
    Mat3 E, F;
    for (int i = 0; i < 3; ++i) {
      E.col(i) = complex->points[v[i + 1]] - complex->points[v[0]];
      F.col(i) = images[v[i + 1]] - images[v[0]];
    }
    Affine a;
    a.matrix = F * E.inverse();
    a.offset = images[v[0]] - a.matrix * complex->points[v[0]];
    pieces.push_back(a);
  }
  return make_pl_map(std::move(complex), std::move(pieces));
}

bool pieces_agree(const Affine& a, const Affine& b, double scale) {
  double m = 1.0 + a.matrix.norm() + b.matrix.norm();
  return (a.matrix - b.matrix).norm() <= 1e-12 * m &&
         (a.offset - b.offset).norm() <= 1e-12 * m * std::max(scale, 1.0);
}

ValidationReport validate_pl_homeo(const PLMap& f) {
  const auto& K = f.mesh();
  ValidationReport rep;
  std::vector<Vec3> images(K.points.size());
  Box ib;
  for (size_t v = 0; v < K.points.size(); ++v) {
    images[v] = f.vertex_image(int(v));
    ib.add(images[v]);
  }
  double scale = std::max(K.scale, ib.diagonal());
  for (size_t c = 0; c < K.cells.size(); ++c)
    for (int i = 0; i < 4; ++i) {
      int v = K.cells[c][i];
      Vec3 y = f.pieces[c](V3<double>(K.points[v]));
      if ((y - images[v]).norm() > 1e-12 * scale) {
        std::ostringstream os;
        os << "pieces disagree at vertex " << v << " (cell " << c << ", residual "
           << (y - images[v]).norm() << ")";
        rep.failures.push_back({"discontinuity", int(c), v, K.points[v], os.str()});
      }
    }

  int pos = 0, neg = 0;
  rep.min_det = 1e300;
  rep.max_det = 0;
  std::vector<double> dets;
  for (const auto& p : f.pieces) {
    double d = p.det();
    dets.push_back(d);
    (d > 0 ? pos : neg)++;
    rep.min_det = std::min(rep.min_det, std::abs(d));
    rep.max_det = std::max(rep.max_det, std::abs(d));
  }
  for (size_t c = 0; c < K.cells.size(); ++c) {
    Tet t = f.image_cell(int(c));
    double e = max_edge(t);
    if (std::abs(6.0 * signed_volume(t)) < 1e-10 * e * e * e) {
      rep.failures.push_back({"degenerate", int(c), -1, tet_centroid(K.cell_points(int(c))),
                              "image of cell " + std::to_string(c) + " is degenerate"});
    }
  }
  if (pos > 0 && neg > 0) {
    bool minority_negative = neg <= pos;
    for (size_t c = 0; c < dets.size(); ++c)
      if ((dets[c] < 0) == minority_negative)
        rep.failures.push_back({"orientation", int(c), -1, tet_centroid(K.cell_points(int(c))),
                                "cell " + std::to_string(c) + " has the opposite orientation"});
  }
  rep.reflected = neg > 0 && pos == 0;

  for (const auto& is : complex_issues(images, K.cells, scale))
    if (is.kind != "degenerate") rep.failures.push_back({is.kind, is.a, is.b, is.witness, is.message});
  rep.ok = rep.failures.empty();
  return rep;
}

PLMap normalize_orientation(const PLMap& f) {
  auto rep = validate_pl_homeo(f);
  if (!rep.ok) {
    std::string msg;
    for (const auto& fl : rep.failures) msg += (msg.empty() ? "" : "; ") + fl.message;
    throw ValidationError(msg);
  }
  if (!rep.reflected) return f;
  // pre-compose with (x1, x2, x3) -> (-x1, x2, x3): the domain is reflected
  const Mat3 R = Vec3(-1, 1, 1).asDiagonal();
  auto K = std::make_shared<SimplicialComplex>(f.mesh());
  for (auto& p : K->points) p = R * p;
  K->bounds = Box{};
  for (const auto& p : K->points) K->bounds.add(p);
  K->cell_index = std::make_shared<GridIndex>(K->bounds, int(K->cells.size()));
  for (size_t c = 0; c < K->cells.size(); ++c) {
    Box b = box_of(K->cell_points(int(c)));
    b.inflate(1e-9 * K->scale);
    K->cell_index->insert(int(c), b);
  }
  std::vector<Affine> pieces;
  for (const auto& p : f.pieces) pieces.push_back({p.matrix * R, p.offset});
  PLMap g = make_pl_map(K, std::move(pieces));
  g.reflected = !f.reflected;
  return g;
}

}  // namespace plsmooth
