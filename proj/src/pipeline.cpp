#include "plsmooth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace plsmooth {

int SmoothingParams::smoothed_vertices() const {
  return int(std::count_if(vertex_radius.begin(), vertex_radius.end(), [](double r) { return r > 0; }));
}
int SmoothingParams::smoothed_edges() const {
  return int(std::count_if(edge_radius.begin(), edge_radius.end(), [](double r) { return r > 0; }));
}
int SmoothingParams::smoothed_faces() const {
  return int(std::count_if(face_width.begin(), face_width.end(), [](double r) { return r > 0; }));
}

const char* patch_name(Patch p) {
  switch (p) {
    case Patch::Bulk: return "bulk";
    case Patch::Face: return "face";
    case Patch::Edge: return "edge";
    case Patch::Vertex: return "vertex";
  }
  return "?";
}

struct SmoothedMap::Level {
  double lambda = 1.0;
  const PLMap* f = nullptr;
  std::vector<FacePatch> faces;
  std::vector<EdgePatch> edges;
  std::vector<std::vector<int>> cell_faces;  // slab patches living in the cell
  std::vector<std::vector<int>> cell_edges;  // tube patches of the cell's edges
};

struct SmoothedMap::Base {
  PLMap input;
  PLMap f;
  SmoothingParams params;
  ParamOptions opt;
  std::vector<FaceIncidence> face_inc;
  std::vector<EdgeIncidence> edge_inc;
  std::shared_ptr<const Level> unit;
  std::vector<VertexPatch> vertices;
  std::vector<std::vector<int>> cell_vertices;
  std::shared_ptr<GridIndex> image_index;
  std::vector<Affine> inverse_pieces;
  Mat3 reflect = Mat3::Identity();
};

namespace {

using Level = SmoothedMap::Level;

std::string vname(int v) { return "vertex " + std::to_string(v); }
std::string ename(int e) { return "edge " + std::to_string(e); }
std::string fname(int f) { return "face " + std::to_string(f); }

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// Which simplices need smoothing, and the boundary policy: nontrivial
// simplices on the domain boundary are left alone when a single face slab
// handles them and rejected otherwise.
struct Plan {
  std::vector<char> vertex, edge, face;
};

Plan make_plan(const PLMap& f, const std::vector<FaceIncidence>& fi, const std::vector<EdgeIncidence>& ei,
               const std::vector<VertexIncidence>& vi) {
  const auto& K = f.mesh();
  Plan p;
  p.face.assign(K.faces.size(), 0);
  p.edge.assign(K.edges.size(), 0);
  p.vertex.assign(K.points.size(), 0);
  for (const auto& inc : fi) p.face[inc.face] = inc.out_cell >= 0 && !inc.trivial;
  for (const auto& inc : ei) {
    int nontrivial = 0;
    for (int F : inc.faces) nontrivial += p.face[F];
    if (inc.interior) {
      p.edge[inc.edge] = !inc.trivial;
    } else if (nontrivial >= 2) {
      throw CertificationError(ename(inc.edge) + " lies on the domain boundary between " +
                               std::to_string(nontrivial) + " nontrivial faces");
    }
  }
  for (const auto& inc : vi) {
    if (inc.interior) {
      p.vertex[inc.vertex] = !inc.trivial;
    } else {
      for (int e : K.vertex_edges[inc.vertex])
        if (p.edge[e])
          throw CertificationError(ename(e) + " reaches the domain boundary at " + vname(inc.vertex));
    }
  }
  return p;
}

double distance_to_nonincident(const SimplicialComplex& K, int v) {
  const Vec3& P = K.points[v];
  double d = 1e300;
  for (size_t u = 0; u < K.points.size(); ++u)
    if (int(u) != v) d = std::min(d, (K.points[u] - P).norm());
  for (const auto& e : K.edges)
    if (e[0] != v && e[1] != v) d = std::min(d, point_segment_distance(P, K.points[e[0]], K.points[e[1]]));
  for (const auto& t : K.faces)
    if (t[0] != v && t[1] != v && t[2] != v)
      d = std::min(d, point_triangle_distance(P, K.points[t[0]], K.points[t[1]], K.points[t[2]]));
  return d;
}

// Height of cell c over its face F.
double height_over(const SimplicialComplex& K, int c, int F) {
  const auto& fv = K.faces[F];
  for (int v : K.cells[c])
    if (v != fv[0] && v != fv[1] && v != fv[2])
      return point_triangle_distance(K.points[v], K.points[fv[0]], K.points[fv[1]], K.points[fv[2]]);
  return 0;
}

double fan_gap(const EdgeIncidence& inc) {
  double gap = 2 * kPi;
  const size_t m = inc.angles.size();
  for (size_t i = 0; i < m; ++i) {
    double next = i + 1 < m ? inc.angles[i + 1] : inc.angles[0] + 2 * kPi;
    gap = std::min(gap, next - inc.angles[i]);
  }
  return gap;
}

// Width bound keeping slabs apart near the edge, as enforced by the edge module.
double edge_width_bound(const EdgeIncidence& inc, double r) {
  return r / 4 * std::tan(std::min(fan_gap(inc), kPi / 8) / 8);
}

struct LevelInput {
  const PLMap* f;
  const std::vector<FaceIncidence>* face_inc;
  const std::vector<EdgeIncidence>* edge_inc;
  const SmoothingParams* params;
  double lambda = 1.0;
  // restrict to simplices containing this vertex (-1: all)
  int around = -1;
  double local_factor = 1.0;
};

std::shared_ptr<Level> make_level(const LevelInput& in) {
  const PLMap& f = *in.f;
  const auto& K = f.mesh();
  const auto& P = *in.params;
  auto L = std::make_shared<Level>();
  L->lambda = in.lambda;
  L->f = in.f;
  L->cell_faces.resize(K.cells.size());
  L->cell_edges.resize(K.cells.size());
  auto touches = [&](const auto& simplex) {
    return in.around < 0 || std::find(simplex.begin(), simplex.end(), in.around) != simplex.end();
  };
  auto width_of = [&](int F) {
    return in.lambda * P.face_width[F] * (touches(K.faces[F]) && in.around >= 0 ? in.local_factor : 1.0);
  };
  auto radius_of = [&](int e) {
    return in.lambda * P.edge_radius[e] * (touches(K.edges[e]) && in.around >= 0 ? in.local_factor : 1.0);
  };

  for (const auto& inc : *in.face_inc) {
    if (!(P.face_width[inc.face] > 0) || !touches(K.faces[inc.face])) continue;
    FacePatch p;
    p.face = inc.face;
    p.in_cell = inc.in_cell;
    p.out_cell = inc.out_cell;
    p.width = width_of(inc.face);
    try {
      p.blend = make_face_blend(face_pair_from(f, inc), WidthField::constant(p.width));
    } catch (const CertificationError& e) {
      throw CertificationError(fname(inc.face) + ": " + e.what());
    }
    L->cell_faces[p.out_cell].push_back(int(L->faces.size()));
    L->faces.push_back(std::move(p));
  }
  for (const auto& inc : *in.edge_inc) {
    if (!(P.edge_radius[inc.edge] > 0) || !touches(K.edges[inc.edge])) continue;
    EdgePatch p;
    p.edge = inc.edge;
    p.a = inc.a;
    p.b = inc.b;
    p.radius = radius_of(inc.edge);
    p.length = inc.length;
    std::vector<WidthField> widths;
    std::vector<bool> side;
    double fallback = 0.5 * edge_width_bound(inc, p.radius);
    for (size_t i = 0; i < inc.faces.size(); ++i) {
      int F = inc.faces[i];
      double w = P.face_width[F] > 0 ? width_of(F) : fallback;
      widths.push_back(WidthField::constant(w));
      side.push_back((*in.face_inc)[F].out_cell == inc.cells[i]);
    }
    try {
      p.smoother = make_edge_smoother(edge_fan_from(f, inc), widths, RadiusField::constant(p.radius), side);
    } catch (const Error& e) {
      throw CertificationError(ename(inc.edge) + ": " + e.what());
    }
    for (int c : K.edge_cells[inc.edge]) L->cell_edges[c].push_back(int(L->edges.size()));
    L->edges.push_back(std::move(p));
  }
  return L;
}

template <class T>
V3<T> edge_patch_eval(const EdgePatch& p, const V3<T>& x) {
  const auto& s = p.smoother;
  return s.fan.image_frame.to_world(seglem_extend(s, s.fan.frame.to_local(x)));
}

bool in_tube(const EdgePatch& p, const Vec3& x, double* t_out = nullptr, double* l3_out = nullptr) {
  Vec3 l = p.smoother.fan.frame.to_local(V3<double>(x));
  double t = std::hypot(l(0), l(1));
  if (t_out) *t_out = t;
  if (l3_out) *l3_out = l(2);
  return t < p.radius && l(2) >= 0 && l(2) <= p.length;
}

bool in_slab(const FacePatch& p, const Vec3& x) {
  double y1 = p.blend.pair.frame.to_local(V3<double>(x))(0);
  return y1 > 0 && y1 < p.width;
}

// Evaluation with balls ignored: tubes, then slabs, then the piece of `cell`.
template <class T>
V3<T> outer_eval(const Level& L, int cell, const V3<T>& x, Owner* who) {
  const Vec3 xv(val(x(0)), val(x(1)), val(x(2)));
  for (int k : L.cell_edges[cell])
    if (in_tube(L.edges[k], xv)) {
      if (who) *who = {Patch::Edge, L.edges[k].edge, cell};
      return edge_patch_eval(L.edges[k], x);
    }
  for (int k : L.cell_faces[cell])
    if (in_slab(L.faces[k], xv)) {
      if (who) *who = {Patch::Face, L.faces[k].face, cell};
      return face_blend_world(L.faces[k].blend, x);
    }
  if (who) *who = {Patch::Bulk, -1, cell};
  return L.f->pieces[cell](x);
}

/// Star of a vertex viewed as a cone: every direction belongs to a cell.
struct Cone {
  int vertex = -1;
  Vec3 center, image;
  std::vector<int> cells;
  std::vector<Mat3> inv;  // direction -> coordinates along the three opposite vertices
  std::vector<int> edges;  // patches in the level
  std::vector<int> faces;

  int cell_of(const Vec3& y) const {
    int best = -1;
    double score = -1e300;
    for (size_t i = 0; i < cells.size(); ++i) {
      Vec3 b = inv[i] * y;
      double m = b.minCoeff();
      if (m > score) {
        score = m;
        best = int(i);
      }
    }
    return cells[best];
  }
};

Cone make_cone(const PLMap& f, const Level& L, int v) {
  const auto& K = f.mesh();
  Cone c;
  c.vertex = v;
  c.center = K.points[v];
  c.image = f.vertex_image(v);
  for (int cell : K.vertex_cells[v]) {
    Mat3 M;
    int k = 0;
    for (int u : K.cells[cell])
      if (u != v) M.col(k++) = K.points[u] - c.center;
    c.cells.push_back(cell);
    c.inv.push_back(M.inverse());
  }
  for (size_t i = 0; i < L.edges.size(); ++i)
    if (L.edges[i].a == v || L.edges[i].b == v) c.edges.push_back(int(i));
  for (size_t i = 0; i < L.faces.size(); ++i) {
    const auto& fv = K.faces[L.faces[i].face];
    if (fv[0] == v || fv[1] == v || fv[2] == v) c.faces.push_back(int(i));
  }
  return c;
}

// The assembly of tubes, slabs and pieces near the vertex with vertex and
// image at the origin; the star is extended as a cone.
template <class T>
V3<T> cone_eval(const Level& L, const Cone& c, const V3<T>& y) {
  const Vec3 yv(val(y(0)), val(y(1)), val(y(2)));
  const Vec3 xv = c.center + yv;
  V3<T> x = y + lift<T>(c.center);
  for (int k : c.edges) {
    const auto& p = L.edges[k];
    double t, l3;
    in_tube(p, xv, &t, &l3);
    bool ahead = p.a == c.vertex ? l3 > 0 : l3 < p.length;
    if (t < p.radius && ahead) return V3<T>(edge_patch_eval(p, x) - lift<T>(c.image));
  }
  const int cell = c.cell_of(yv);
  for (int k : c.faces) {
    const auto& p = L.faces[k];
    if (p.out_cell == cell && in_slab(p, xv)) return V3<T>(face_blend_world(p.blend, x) - lift<T>(c.image));
  }
  return V3<T>(L.f->pieces[cell](x) - lift<T>(c.image));
}

// Sample points in the slabs and tubes meeting the vertex, a <= |y| <= b.
std::vector<Vec3> cone_features(const Level& L, const Cone& c, double a, double b) {
  const auto& K = L.f->mesh();
  std::vector<Vec3> out;
  const double g1 = 0.5 * (std::sqrt(5.0) - 1), g2 = std::sqrt(2.0) - 1, g3 = std::sqrt(3.0) - 1;
  auto frac = [](double x) { return x - std::floor(x); };
  const int n = 300;
  for (int k : c.faces) {
    const auto& p = L.faces[k];
    const auto& fv = K.faces[p.face];
    Vec3 d[2];
    int j = 0;
    for (int u : fv)
      if (u != c.vertex) d[j++] = (K.points[u] - c.center).normalized();
    Vec3 n1 = p.blend.pair.frame.rotation.row(0).transpose();
    for (int i = 0; i < n; ++i) {
      double al = 0.02 + 0.96 * frac((i + 0.5) * g1);
      Vec3 u = (al * d[0] + (1 - al) * d[1]).normalized();
      double r = a + (b - a) * frac((i + 0.5) * g2);
      out.push_back(r * u + p.width * frac((i + 0.5) * g3) * n1);
    }
  }
  for (int k : c.edges) {
    const auto& p = L.edges[k];
    const Frame& fr = p.smoother.fan.frame;
    double sign = p.a == c.vertex ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) {
      double t = p.radius * frac((i + 0.5) * g1);
      double th = 2 * kPi * frac((i + 0.5) * g2);
      double r = a + (b - a) * frac((i + 0.5) * g3);
      double along = std::sqrt(std::max(r * r - t * t, 0.0));
      Vec3 l(t * std::cos(th), t * std::sin(th), 0);
      Vec3 w = fr.rotation.transpose() * l + sign * along * fr.rotation.row(2).transpose();
      out.push_back(w);
    }
  }
  return out;
}

double max_piece_norm(const PLMap& f, int v) {
  double m = 0;
  for (int c : f.mesh().vertex_cells[v]) m = std::max(m, f.pieces[c].matrix.norm());
  return m;
}

HatMap hat_from(const PLMap& f, std::shared_ptr<const Level> L, int v) {
  auto cone = std::make_shared<Cone>(make_cone(f, *L, v));
  HatMap h = HatMap::from(
      [L, cone](const auto& y) {
        using T = typename std::decay_t<decltype(y)>::Scalar;
        return cone_eval<T>(*L, *cone, y);
      },
      max_piece_norm(f, v));
  h.features = [L, cone](double a, double b) { return cone_features(*L, *cone, a, b); };
  return h;
}


struct Feature {
  bool face = false;
  int id = -1;
  std::vector<int> verts;
  double* thick = nullptr;
};

double feature_distance(const SimplicialComplex& K, const Feature& B, const Vec3& x) {
  const auto& v = B.verts;
  if (!B.face) return point_segment_distance(x, K.points[v[0]], K.points[v[1]]);
  return point_triangle_distance(x, K.points[v[0]], K.points[v[1]], K.points[v[2]]);
}

// Sample points of a feature away from the balls at its vertices, with the
// sample spacing.
std::vector<Vec3> feature_samples(const SimplicialComplex& K, const Feature& A,
                                  const std::vector<double>& R, double* spacing) {
  std::vector<Vec3> pts;
  const int n = A.face ? 40 : 64;
  double longest = 0;
  for (size_t i = 0; i < A.verts.size(); ++i)
    for (size_t j = i + 1; j < A.verts.size(); ++j)
      longest = std::max(longest, (K.points[A.verts[i]] - K.points[A.verts[j]]).norm());
  *spacing = longest / n;
  auto keep = [&](const Vec3& x) {
    for (int v : A.verts)
      if (R[v] > 0 && (x - K.points[v]).norm() < 0.9 * R[v]) return false;
    return true;
  };
  const Vec3& a = K.points[A.verts[0]];
  const Vec3& b = K.points[A.verts[1]];
  if (!A.face) {
    for (int i = 0; i <= n; ++i) {
      Vec3 x = a + (b - a) * (double(i) / n);
      if (keep(x)) pts.push_back(x);
    }
    return pts;
  }
  const Vec3& c = K.points[A.verts[2]];
  for (int i = 0; i <= n; ++i)
    for (int j = 0; i + j <= n; ++j) {
      Vec3 x = a + (b - a) * (double(i) / n) + (c - a) * (double(j) / n);
      if (keep(x)) pts.push_back(x);
    }
  return pts;
}

int shared_count(const Feature& A, const Feature& B) {
  int k = 0;
  for (int v : A.verts) k += contains(B.verts, v);
  return k;
}

}  // namespace

SmoothingParams choose_params(const PLMap& input, const ParamOptions& opt) {
  const PLMap f = normalize_orientation(input);
  const auto& K = f.mesh();
  const auto fi = face_pairs(f);
  const auto ei = edge_fans(f);
  const auto vi = vertex_stars(f);
  const Plan plan = make_plan(f, fi, ei, vi);

  SmoothingParams P;
  P.vertex_radius.assign(K.points.size(), 0.0);
  P.edge_radius.assign(K.edges.size(), 0.0);
  P.face_width.assign(K.faces.size(), 0.0);
  auto note = [&](const std::string& s) { P.log.push_back(s); };

  for (size_t v = 0; v < K.points.size(); ++v)
    if (plan.vertex[v]) P.vertex_radius[v] = opt.radius_fraction * distance_to_nonincident(K, int(v));

  for (size_t e = 0; e < K.edges.size(); ++e) {
    if (!plan.edge[e]) continue;
    int a = K.edges[e][0], b = K.edges[e][1];
    const Vec3 pa = K.points[a], pb = K.points[b];
    const double len = (pb - pa).norm();
    double r = 0.25 * std::min(P.vertex_radius[a], P.vertex_radius[b]);
    // keep the tube inside the star of the edge between the two balls
    double s0 = 0.9 * P.vertex_radius[a], s1 = len - 0.9 * P.vertex_radius[b];
    double clearance = 1e300;
    for (int i = 0; i <= 32; ++i) {
      Vec3 x = pa + (pb - pa) * ((s0 + (s1 - s0) * i / 32) / len);
      for (const auto& t : K.faces) {
        if (contains({t[0], t[1], t[2]}, a) && contains({t[0], t[1], t[2]}, b)) continue;
        clearance = std::min(clearance, point_triangle_distance(x, K.points[t[0]], K.points[t[1]], K.points[t[2]]));
      }
    }
    P.edge_radius[e] = std::min(r, 0.5 * clearance);
  }

  auto width_cap = [&](int F) {
    const auto& inc = fi[F];
    double w = 0.25 * std::min(height_over(K, inc.in_cell, F), height_over(K, inc.out_cell, F));
    const auto& v = K.faces[F];
    for (int k = 0; k < 3; ++k) {
      int e = K.find_edge(v[k], v[(k + 1) % 3]);
      if (P.edge_radius[e] > 0) w = std::min(w, 0.5 * edge_width_bound(ei[e], P.edge_radius[e]));
    }
    return w;
  };
  for (size_t F = 0; F < K.faces.size(); ++F)
    if (plan.face[F]) P.face_width[F] = width_cap(int(F));

  // tubes and slabs of simplices sharing no edge stay apart outside the balls
  std::vector<Feature> feats;
  for (size_t e = 0; e < K.edges.size(); ++e)
    if (P.edge_radius[e] > 0) feats.push_back({false, int(e), {K.edges[e][0], K.edges[e][1]}, &P.edge_radius[e]});
  for (size_t F = 0; F < K.faces.size(); ++F)
    if (P.face_width[F] > 0)
      feats.push_back({true, int(F), {K.faces[F][0], K.faces[F][1], K.faces[F][2]}, &P.face_width[F]});
  std::vector<std::vector<Vec3>> samples(feats.size());
  std::vector<double> spacing(feats.size());
  std::vector<Box> boxes(feats.size());
  for (size_t i = 0; i < feats.size(); ++i) {
    samples[i] = feature_samples(K, feats[i], P.vertex_radius, &spacing[i]);
    for (int v : feats[i].verts) boxes[i].add(K.points[v]);
  }
  for (int round = 0;; ++round) {
    int violations = 0;
    for (size_t i = 0; i < feats.size(); ++i)
      for (size_t j = 0; j < feats.size(); ++j) {
        if (i == j) continue;
        const Feature& A = feats[i];
        const Feature& B = feats[j];
        int shared = shared_count(A, B);
        if (shared >= 2) continue;
        double need = 2 * (*A.thick + *B.thick) + spacing[i];
        Box bi = boxes[i];
        bi.inflate(need);
        if (!bi.overlaps(boxes[j])) continue;
        double d = 1e300;
        Vec3 at = Vec3::Zero();
        for (const Vec3& x : samples[i]) {
          double di = feature_distance(K, B, x);
          if (di < d) {
            d = di;
            at = x;
          }
        }
        if (d >= need) continue;
        ++violations;
        if (round >= 40) {
          std::ostringstream os;
          os << (A.face ? fname(A.id) : ename(A.id)) << " and " << (B.face ? fname(B.id) : ename(B.id))
             << " cannot be separated near (" << at.transpose() << ")";
          throw CertificationError(os.str());
        }
        *(*A.thick >= *B.thick ? A.thick : B.thick) *= 0.5;
      }
    for (size_t F = 0; F < K.faces.size(); ++F)
      if (P.face_width[F] > 0) P.face_width[F] = std::min(P.face_width[F], width_cap(int(F)));
    if (!violations) break;
  }

  // radial subdeterminant around every ball, shrinking the local tubes and slabs
  for (int round = 0;; ++round) {
    bool changed = false;
    for (size_t v = 0; v < K.points.size(); ++v) {
      if (!(P.vertex_radius[v] > 0)) continue;
      auto build = [&](double factor) {
        LevelInput in{&f, &fi, &ei, &P, 1.0, int(v), factor};
        return hat_from(f, make_level(in), int(v));
      };
      int k;
      try {
        k = shrink_until_certified(build, P.vertex_radius[v], opt.max_halvings, opt.delta_samples);
      } catch (const Error& e) {
        throw CertificationError(vname(int(v)) + ": " + e.what());
      }
      if (k == 0) continue;
      // one extra halving as margin
      const double factor = std::ldexp(1.0, -(k + 1));
      for (int e : K.vertex_edges[v]) P.edge_radius[e] *= factor;
      for (int F : K.vertex_faces[v]) P.face_width[F] *= factor;
      note(vname(int(v)) + ": tubes and slabs shrunk by " + std::to_string(factor));
      changed = true;
    }
    if (!changed) break;
    if (round > 8) throw CertificationError("radius selection does not settle");
  }

  // every patch must build at lambda = 1
  make_level({&f, &fi, &ei, &P, 1.0, -1, 1.0});
  std::ostringstream os;
  os << P.smoothed_vertices() << " balls, " << P.smoothed_edges() << " tubes, " << P.smoothed_faces() << " slabs";
  note(os.str());
  return P;
}

SmoothedMap::SmoothedMap(const PLMap& input, const SmoothingParams& params, const ParamOptions& opt) {
  auto base = std::make_shared<Base>();
  base->input = input;
  base->f = normalize_orientation(input);
  if (base->f.reflected != input.reflected) base->reflect = Vec3(-1, 1, 1).asDiagonal();
  base->params = params;
  base->params.lambda = 1.0;
  base->opt = opt;
  const PLMap& f = base->f;
  const auto& K = f.mesh();
  if (params.vertex_radius.size() != K.points.size() || params.edge_radius.size() != K.edges.size() ||
      params.face_width.size() != K.faces.size())
    throw DomainError("parameters do not match the mesh");
  base->face_inc = face_pairs(f);
  base->edge_inc = edge_fans(f);
  base->unit = make_level({&base->f, &base->face_inc, &base->edge_inc, &base->params, 1.0, -1, 1.0});

  base->cell_vertices.resize(K.cells.size());
  for (size_t v = 0; v < K.points.size(); ++v) {
    if (!(params.vertex_radius[v] > 0)) continue;
    VertexPatch p;
    p.vertex = int(v);
    p.center = K.points[v];
    p.image = f.vertex_image(int(v));
    p.radius = params.vertex_radius[v];
    VertexOptions vo;
    vo.rho_fraction = opt.rho_fraction;
    vo.delta_samples = opt.delta_samples;
    vo.provider = first_of({linear_sphere_isotopy, unnormalized_sphere_isotopy});
    try {
      p.smoother = make_vertex_smoother(hat_from(f, base->unit, int(v)), p.radius, vo);
    } catch (const Error& e) {
      throw CertificationError(vname(int(v)) + ": " + e.what());
    }
    p.smoother.vertex = int(v);
    for (int c : K.vertex_cells[v]) base->cell_vertices[c].push_back(int(base->vertices.size()));
    base->vertices.push_back(std::move(p));
  }

  Box ib;
  for (size_t c = 0; c < K.cells.size(); ++c)
    for (const auto& q : f.image_cell(int(c))) ib.add(q);
  base->image_index = std::make_shared<GridIndex>(ib, int(K.cells.size()));
  for (size_t c = 0; c < K.cells.size(); ++c) {
    Box b = box_of(f.image_cell(int(c)));
    b.inflate(1e-9 * K.scale);
    base->image_index->insert(int(c), b);
    base->inverse_pieces.push_back(f.pieces[c].inverse());
  }
  base_ = base;
  level_ = params.lambda == 1.0 ? base->unit
                                : make_level({&base->f, &base->face_inc, &base->edge_inc, &base->params,
                                              params.lambda, -1, 1.0});
}

SmoothedMap SmoothedMap::scaled(double lambda) const {
  if (!(lambda > 0) || lambda > 1) throw DomainError("lambda must lie in (0, 1]");
  SmoothedMap g;
  g.base_ = base_;
  g.level_ = lambda == 1.0 ? base_->unit
                           : make_level({&base_->f, &base_->face_inc, &base_->edge_inc, &base_->params,
                                         lambda, -1, 1.0});
  return g;
}

double SmoothedMap::lambda() const { return level_->lambda; }
const SmoothingParams& SmoothedMap::params() const { return base_->params; }
const PLMap& SmoothedMap::input() const { return base_->input; }
const PLMap& SmoothedMap::working() const { return base_->f; }
const std::vector<FacePatch>& SmoothedMap::faces() const { return level_->faces; }
const std::vector<EdgePatch>& SmoothedMap::edges() const { return level_->edges; }
const std::vector<VertexPatch>& SmoothedMap::vertices() const { return base_->vertices; }

template <class T>
V3<T> SmoothedMap::eval(const V3<T>& x) const {
  const Vec3 xv(val(x(0)), val(x(1)), val(x(2)));
  const auto& K = base_->f.mesh();
  int cell = K.locate(xv);
  if (cell < 0) throw DomainError("point outside the domain");
  const double lam = level_->lambda;
  for (int k : base_->cell_vertices[cell]) {
    const auto& p = base_->vertices[k];
    if ((xv - p.center).norm() < lam * p.radius) {
      V3<T> y = (x - lift<T>(p.center)) / lam;
      return V3<T>(lift<T>(p.image) + lam * vertex_map(p.smoother, y));
    }
  }
  return outer_eval(*level_, cell, x, nullptr);
}

template V3<double> SmoothedMap::eval(const V3<double>&) const;
template V3<Jet> SmoothedMap::eval(const V3<Jet>&) const;

Mat3 SmoothedMap::jacobian(const Vec3& x) const { return jacobian_of(eval(seed(x))); }

Owner SmoothedMap::owner(const Vec3& x) const {
  const auto& K = base_->f.mesh();
  int cell = K.locate(x);
  if (cell < 0) throw DomainError("point outside the domain");
  for (int k : base_->cell_vertices[cell]) {
    const auto& p = base_->vertices[k];
    if ((x - p.center).norm() < level_->lambda * p.radius) return {Patch::Vertex, p.vertex, cell};
  }
  Owner who;
  outer_eval(*level_, cell, V3<double>(x), &who);
  return who;
}

Vec3 SmoothedMap::operator()(const Vec3& x) const { return eval(V3<double>(base_->reflect * x)); }

Mat3 SmoothedMap::derivative(const Vec3& x) const { return jacobian(base_->reflect * x) * base_->reflect; }

Vec3 SmoothedMap::inverse(const Vec3& y) const { return base_->reflect * working_inverse(y); }

Vec3 SmoothedMap::pl_inverse(const Vec3& y, int* cell) const {
  const auto& K = base_->f.mesh();
  int best = -1;
  double best_min = -1e300;
  for (int c : base_->image_index->query(y)) {
    auto l = barycentric(base_->f.image_cell(c), y);
    double m = *std::min_element(l.begin(), l.end());
    if (m > best_min) {
      best_min = m;
      best = c;
    }
  }
  if (best < 0 || best_min < -1e-9) throw DomainError("point outside the image");
  if (cell) *cell = best;
  (void)K;
  return base_->inverse_pieces[best](V3<double>(y));
}

Vec3 SmoothedMap::working_inverse(const Vec3& y) const {
  const double scale = base_->f.mesh().scale;
  const double tol = 1e-11 * scale;
  auto residual = [&](const Vec3& x, Vec3* r) {
    try {
      *r = eval(V3<double>(x)) - y;
      return true;
    } catch (const DomainError&) {
      return false;
    }
  };
  // damped Newton towards target from x; false on stagnation
  auto newton = [&](Vec3& x, const Vec3& target, int iters) {
    Vec3 r = eval(V3<double>(x)) - target;
    for (int it = 0; it < iters; ++it) {
      if (r.norm() <= 0.05 * tol) return true;
      Vec3 dx = jacobian(x).lu().solve(r);
      double step = 1.0;
      bool moved = false;
      while (step > 1e-6) {
        Vec3 trial = x - step * dx, rt;
        if (residual(trial, &rt) && (rt = rt + y - target, rt.norm() < r.norm())) {
          x = trial;
          r = rt;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) return r.norm() <= tol;
    }
    return r.norm() <= tol;
  };

  const Vec3 seed_x = pl_inverse(y);
  Vec3 x = seed_x;
  if (newton(x, y, 60)) return x;

  // continuation along the image segment from g(seed) to y
  x = seed_x;
  const Vec3 y0 = eval(V3<double>(seed_x));
  double s = 0, ds = 0.25;
  while (s < 1) {
    double next = std::min(1.0, s + ds);
    Vec3 trial = x;
    if (newton(trial, y0 + next * (y - y0), 30)) {
      x = trial;
      s = next;
      ds = std::min(0.5, 2 * ds);
    } else {
      ds *= 0.5;
      if (ds < 1e-7) {
        std::ostringstream os;
        os << "inverse failed at y = (" << y.transpose() << ")";
        throw NumericalError(os.str());
      }
    }
  }
  return x;
}

HatMap vertex_hat(const SmoothedMap& g, int vertex) {
  for (const auto& p : g.vertices())
    if (p.vertex == vertex) return p.smoother.hat;
  throw DomainError(vname(vertex) + " is not smoothed");
}

namespace {

// Owner kind, Bulk for points outside the domain.
Patch owner_kind(const SmoothedMap& g, const Vec3& x) {
  try {
    return g.owner(x).kind;
  } catch (const DomainError&) {
    return Patch::Bulk;
  }
}

}  // namespace

InterfaceReport interface_mismatch(const SmoothedMap& g, int samples, unsigned seed) {
  InterfaceReport rep;
  const auto& K = g.working().mesh();
  const double scale = K.scale, eps = 1e-12;
  const double lam = g.lambda();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N(0, 1);
  const size_t kinds = g.vertices().size() + g.edges().size() + 2 * g.faces().size();
  if (!kinds) {
    rep.ok = true;
    return rep;
  }
  const int per = std::max(1, int(samples / kinds));
  auto compare = [&](const Vec3& inner, const Vec3& outer) {
    Vec3 a, b;
    try {
      a = g.eval(V3<double>(inner));
      b = g.eval(V3<double>(outer));
    } catch (const DomainError&) {
      return;
    }
    double d = (a - b).norm() / scale;
    ++rep.samples;
    if (d > rep.worst) {
      rep.worst = d;
      rep.witness = 0.5 * (inner + outer);
    }
  };
  for (const auto& p : g.vertices())
    for (int i = 0; i < per; ++i) {
      Vec3 u = Vec3(N(rng), N(rng), N(rng)).normalized();
      double R = lam * p.radius;
      compare(p.center + R * (1 - eps) * u, p.center + R * (1 + eps) * u);
    }
  for (const auto& p : g.edges()) {
    const Frame& fr = p.smoother.fan.frame;
    for (int i = 0; i < per; ++i) {
      double th = 2 * kPi * U(rng), l3 = p.length * U(rng);
      auto at = [&](double t) {
        return fr.to_world(V3<double>(Vec3(t * std::cos(th), t * std::sin(th), l3)));
      };
      Vec3 in = at(p.radius * (1 - eps)), out = at(p.radius * (1 + eps));
      if (owner_kind(g, in) != Patch::Edge) continue;
      compare(in, out);
    }
  }
  for (const auto& p : g.faces()) {
    const auto& v = K.faces[p.face];
    const Frame& fr = p.blend.pair.frame;
    for (int i = 0; i < 2 * per; ++i) {
      double a = U(rng), b = U(rng);
      if (a + b > 1) {
        a = 1 - a;
        b = 1 - b;
      }
      Vec3 x = K.points[v[0]] + a * (K.points[v[1]] - K.points[v[0]]) + b * (K.points[v[2]] - K.points[v[0]]);
      Vec3 y = fr.to_local(V3<double>(x));
      double h = i % 2 ? p.width : 0.0;
      y(0) = h - eps * p.width;
      Vec3 lo = fr.to_world(V3<double>(y));
      y(0) = h + eps * p.width;
      Vec3 hi = fr.to_world(V3<double>(y));
      if (owner_kind(g, i % 2 ? lo : hi) != Patch::Face) continue;
      compare(lo, hi);
    }
  }
  rep.ok = rep.worst <= 1e-10;
  return rep;
}

}  // namespace plsmooth
