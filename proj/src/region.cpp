#include <algorithm>
#include <cmath>
#include <queue>

#include "plsmooth/norms.hpp"
#include "plsmooth/quadrature.hpp"

namespace plsmooth {

namespace {

double diff_power(const SmoothedMap& g, const Vec3& x, int cell, double p) {
  if (cell < 0) cell = g.owner(x).cell;
  Mat3 D = g.jacobian(x) - g.working().pieces[cell].matrix;
  return std::pow(D.norm(), p);
}

template <class Geom>
struct Elem {
  Geom geom;
  std::vector<RegionNode> nodes;
  double value = 0;
  double err = 0;
};

// Global adaptive refinement: the leaf with the largest error estimate
// (parent minus children) is split until the summed estimate meets the
// relative tolerance or the budget runs out.
template <class Geom, class Split, class Integrate>
std::vector<Elem<Geom>> adapt(const std::vector<Geom>& roots, Split split, Integrate integrate, double tol,
                              int budget) {
  using E = Elem<Geom>;
  std::vector<E> leaves;
  std::vector<char> alive;
  std::priority_queue<std::pair<double, int>> heap;
  double total = 0, errsum = 0;
  auto refine = [&](const E& parent) {
    std::vector<E> kids;
    double sum = 0;
    for (const Geom& gk : split(parent.geom)) {
      E k;
      k.geom = gk;
      integrate(k);
      sum += k.value;
      kids.push_back(std::move(k));
    }
    double e = std::abs(parent.value - sum);
    for (auto& k : kids) {
      k.err = e / double(kids.size());
      total += k.value;
      errsum += k.err;
      heap.push({k.err, int(leaves.size())});
      leaves.push_back(std::move(k));
      alive.push_back(1);
    }
  };
  for (const Geom& r : roots) {
    E root;
    root.geom = r;
    integrate(root);
    refine(root);
  }
  for (int refinements = 0; !heap.empty() && refinements < budget && errsum > tol * std::abs(total);) {
    int i = heap.top().second;
    heap.pop();
    if (!alive[i]) continue;
    alive[i] = 0;
    total -= leaves[i].value;
    errsum -= leaves[i].err;
    E parent = leaves[i];
    refine(parent);
    ++refinements;
  }
  std::vector<E> out;
  for (size_t i = 0; i < leaves.size(); ++i)
    if (alive[i]) out.push_back(std::move(leaves[i]));
  return out;
}

struct ConeElem {
  Vec3 a, b, c;
  double r0, r1;
};

struct TubeElem {
  double t0, t1, th0, th1;
};

void ball_nodes(const SmoothedMap& g1, const VertexPatch& vp, const RegionOptions& opt,
                std::vector<RegionNode>& out) {
  const auto& K = g1.working().mesh();
  const Vec3 V = vp.center;
  const double R = vp.radius;
  const auto& tri = triangle_rule();
  const auto rad = gauss_legendre(2);
  for (int c : K.vertex_cells[vp.vertex]) {
    std::vector<Vec3> opp;
    for (int i : K.cells[c])
      if (i != vp.vertex) opp.push_back(K.points[i]);
    Vec3 n = (opp[1] - opp[0]).cross(opp[2] - opp[0]).normalized();
    if (n.dot(opp[0] - V) < 0) n = -n;
    const double d = n.dot(opp[0] - V);
    const double omega = std::abs(solid_angle(opp[0] - V, opp[1] - V, opp[2] - V));

    auto integrate = [&](Elem<ConeElem>& e) {
      const auto& G = e.geom;
      double area = 0.5 * (G.b - G.a).cross(G.c - G.a).norm();
      e.nodes.clear();
      e.value = 0;
      for (size_t k = 0; k < tri.weights.size(); ++k) {
        Vec3 p = tri.nodes[k][0] * G.a + tri.nodes[k][1] * G.b + tri.nodes[k][2] * G.c;
        double dist = (p - V).norm();
        Vec3 u = (p - V) / dist;
        double dw = tri.weights[k] * area * d / (dist * dist * dist);
        for (size_t j = 0; j < rad.nodes.size(); ++j) {
          double r = G.r0 + 0.5 * (rad.nodes[j] + 1) * (G.r1 - G.r0);
          RegionNode node{V + r * u, dw * 0.5 * rad.weights[j] * (G.r1 - G.r0) * r * r, Patch::Vertex,
                          vp.vertex, c};
          e.value += node.weight * diff_power(g1, node.x, c, opt.p);
          e.nodes.push_back(node);
        }
      }
    };
    auto split = [](const ConeElem& G) {
      Vec3 ab = 0.5 * (G.a + G.b), bc = 0.5 * (G.b + G.c), ca = 0.5 * (G.c + G.a);
      double rm = 0.5 * (G.r0 + G.r1);
      std::vector<ConeElem> kids;
      for (auto [r0, r1] : {std::pair{G.r0, rm}, std::pair{rm, G.r1}}) {
        kids.push_back({G.a, ab, ca, r0, r1});
        kids.push_back({ab, G.b, bc, r0, r1});
        kids.push_back({ca, bc, G.c, r0, r1});
        kids.push_back({ab, bc, ca, r0, r1});
      }
      return kids;
    };
    std::vector<ConeElem> roots;
    const Vec3 &A = opp[0], &B = opp[1], &C = opp[2];
    for (auto [r0, r1] : {std::pair{0.5, 0.75}, std::pair{0.75, 0.875}, std::pair{0.875, 1.0}})
      roots.push_back({A, B, C, r0 * R, r1 * R});
    int budget = std::max(4, opt.ball_refinements / int(K.vertex_cells[vp.vertex].size()));
    auto leaves = adapt<ConeElem>(roots, split, integrate, opt.tolerance, budget);

    // the shell weights are rescaled to the exact shell volume of the cone
    double exact = omega * (R * R * R - 0.125 * R * R * R) / 3;
    double sum = 0;
    for (const auto& l : leaves)
      for (const auto& nd : l.nodes) sum += nd.weight;
    for (const auto& l : leaves)
      for (auto nd : l.nodes) {
        nd.weight *= exact / sum;
        out.push_back(nd);
      }
    // inside R/2 the map is linear: one node carries the whole cone
    Vec3 dir = ((A + B + C) / 3 - V).normalized();
    out.push_back({V + 0.25 * R * dir, omega * 0.125 * R * R * R / 3, Patch::Vertex, vp.vertex, c});
  }
}

double end_radius(const SmoothingParams& P, int v) { return P.vertex_radius[v] > 0 ? P.vertex_radius[v] : 0.0; }

// Parameter-space nodes (t, theta) with weight dt dtheta t, refined at unit scale.
std::vector<RegionNode> tube_section(const SmoothedMap& g1, const EdgePatch& ep, const RegionOptions& opt) {
  const auto& P = g1.params();
  const auto& s = ep.smoother;
  const auto& ang = s.fan.angles;
  const double r = ep.radius;
  const double Ra = end_radius(P, ep.a), Rb = end_radius(P, ep.b);
  auto mid_x3 = [&](double t) {
    double lo = Ra > t ? std::sqrt(Ra * Ra - t * t) : 0.0;
    double hi = ep.length - (Rb > t ? std::sqrt(Rb * Rb - t * t) : 0.0);
    return 0.5 * (lo + hi);
  };
  const auto q = gauss_legendre(2);
  auto integrate = [&](Elem<TubeElem>& e) {
    const auto& G = e.geom;
    e.nodes.clear();
    e.value = 0;
    for (size_t i = 0; i < q.nodes.size(); ++i) {
      double t = G.t0 + 0.5 * (q.nodes[i] + 1) * (G.t1 - G.t0);
      for (size_t j = 0; j < q.nodes.size(); ++j) {
        double th = G.th0 + 0.5 * (q.nodes[j] + 1) * (G.th1 - G.th0);
        double w = 0.25 * q.weights[i] * q.weights[j] * (G.t1 - G.t0) * (G.th1 - G.th0) * t;
        Vec3 x = s.fan.frame.to_world(Vec3(t * std::cos(th), t * std::sin(th), mid_x3(t)));
        e.value += w * diff_power(g1, x, -1, opt.p);
        e.nodes.push_back({Vec3(t, th, 0), w, Patch::Edge, ep.edge, -1});
      }
    }
  };
  auto split = [](const TubeElem& G) {
    double tm = 0.5 * (G.t0 + G.t1), hm = 0.5 * (G.th0 + G.th1);
    return std::vector<TubeElem>{
        {G.t0, tm, G.th0, hm}, {tm, G.t1, G.th0, hm}, {G.t0, tm, hm, G.th1}, {tm, G.t1, hm, G.th1}};
  };
  std::vector<TubeElem> roots;
  const int m = int(ang.size());
  const int nt = 4;
  for (int i = 0; i < m; ++i) {
    double a0 = ang[i], a1 = i + 1 < m ? ang[i + 1] : ang[0] + 2 * kPi;
    double w0 = s.blends[i].width.w0, w1 = s.blends[(i + 1) % m].width.w0;
    for (int k = 0; k < nt; ++k) {
      double t0 = r * k / nt, t1 = r * (k + 1) / nt;
      // break the sector where the slabs along its two faces end
      std::vector<double> br = {a0, a1, 0.5 * (a0 + a1)};
      for (double t : {t0, t1}) {
        if (!(t > 0)) continue;
        if (w0 < t) br.push_back(a0 + std::asin(w0 / t));
        if (w1 < t) br.push_back(a1 - std::asin(w1 / t));
      }
      std::sort(br.begin(), br.end());
      br.erase(std::remove_if(br.begin(), br.end(), [&](double b) { return b < a0 || b > a1; }), br.end());
      br.erase(std::unique(br.begin(), br.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }),
               br.end());
      for (size_t j = 0; j + 1 < br.size(); ++j) roots.push_back({t0, t1, br[j], br[j + 1]});
    }
  }
  int budget = opt.tube_refinements;
  auto leaves = adapt<TubeElem>(roots, split, integrate, opt.tolerance, budget);
  std::vector<RegionNode> out;
  for (const auto& l : leaves) out.insert(out.end(), l.nodes.begin(), l.nodes.end());
  return out;
}

// Tube minus the two end balls: pi len rho^2 minus the caps.
double tube_volume(double len, double rho, double Ra, double Rb) {
  double v = kPi * len * rho * rho;
  for (double R : {Ra, Rb})
    if (R > rho) v -= 2 * kPi * (R * R * R - std::pow(R * R - rho * rho, 1.5)) / 3;
  return v;
}

std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& poly, const Vec2& m, double c) {
  // keeps m . z >= c
  std::vector<Vec2> out;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    double dp = m.dot(p) - c, dq = m.dot(q) - c;
    if (dp >= 0) out.push_back(p);
    if ((dp >= 0) != (dq >= 0)) out.push_back(p + (dp / (dp - dq)) * (q - p));
  }
  return out;
}

double area2(const std::vector<Vec2>& poly) {
  double a = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p(0) * q(1) - p(1) * q(0);
  }
  return 0.5 * std::abs(a);
}

void slab_nodes(const SmoothedMap& g, const FacePatch& fp, RegionQuadrature& quad) {
  const auto& K = g.working().mesh();
  const double lam = g.lambda();
  const Frame& fr = fp.blend.pair.frame;
  const Vec3 n = fr.rotation.row(0).transpose();
  const Tet cell = K.cell_points(fp.out_cell);
  const auto& F = K.faces[fp.face];
  auto local2 = [&](const Vec3& x) {
    Vec3 l = fr.to_local(V3<double>(x));
    return Vec2(l(1), l(2));
  };
  struct Strip {
    Vec2 m;
    double c0;
    double radius;
  };
  std::vector<Strip> strips;
  for (const auto& ep : g.edges()) {
    const auto& E = K.edges[ep.edge];
    int third = -1, hits = 0;
    for (int v : F) {
      if (v == E[0] || v == E[1]) ++hits;
      else third = v;
    }
    if (hits != 2) continue;
    Vec2 pa = local2(K.points[E[0]]), pb = local2(K.points[E[1]]), pc = local2(K.points[third]);
    Vec2 d = (pb - pa).normalized();
    Vec2 m(-d(1), d(0));
    if (m.dot(pc - pa) < 0) m = -m;
    strips.push_back({m, m.dot(pa), ep.radius});
  }
  struct Disk {
    Vec2 c;
    double R;
  };
  std::vector<Disk> disks;
  for (const auto& vp : g.vertices())
    if (std::find(F.begin(), F.end(), vp.vertex) != F.end()) disks.push_back({local2(vp.center), lam * vp.radius});

  const auto q = gauss_legendre(8);
  const int pieces = 8;
  const double w = fp.width;
  for (int s = 0; s < pieces; ++s) {
    double h0 = w * s / pieces, h1 = w * (s + 1) / pieces;
    for (size_t k = 0; k < q.nodes.size(); ++k) {
      double h = h0 + 0.5 * (q.nodes[k] + 1) * (h1 - h0);
      double gw = 0.5 * q.weights[k] * (h1 - h0);
      std::vector<Vec2> poly;
      for (const Vec3& x : slice_tet(cell, n, h + n.dot(fr.origin))) poly.push_back(local2(x));
      if (poly.size() < 3) continue;
      for (const auto& st : strips) {
        if (h >= st.radius) continue;
        poly = clip_half_plane(poly, st.m, st.c0 + std::sqrt(st.radius * st.radius - h * h));
        if (poly.size() < 3) break;
      }
      if (poly.size() < 3) continue;
      double area = area2(poly);
      std::vector<Disk> cut;
      for (const auto& dk : disks)
        if (dk.R > h) {
          cut.push_back({dk.c, std::sqrt(dk.R * dk.R - h * h)});
          area -= disk_polygon_area(cut.back().c, cut.back().R, poly);
        }
      if (!(area > 0)) continue;
      Vec2 cen = Vec2::Zero();
      for (const auto& p : poly) cen += p;
      cen /= double(poly.size());
      std::vector<Vec2> candidates = {cen};
      for (double f : {0.5, 0.8, 0.3})
        for (const auto& p : poly) candidates.push_back(cen + f * (p - cen));
      bool placed = false;
      for (const Vec2& z : candidates) {
        bool free = std::all_of(cut.begin(), cut.end(), [&](const Disk& dk) { return (z - dk.c).norm() > dk.R * 1.001; });
        if (!free) continue;
        Vec3 x = fr.to_world(V3<double>(Vec3(h, z(0), z(1))));
        Owner o;
        try {
          o = g.owner(x);
        } catch (const DomainError&) {
          continue;
        }
        if (o.kind != Patch::Face || o.id != fp.face) continue;
        quad.nodes.push_back({x, gw * area, Patch::Face, fp.face, o.cell});
        placed = true;
        break;
      }
      if (!placed) ++quad.owner_mismatch;
      quad.slab_volume += gw * area;
    }
  }
}

}  // namespace

RegionTemplate region_template(const SmoothedMap& g, const RegionOptions& opt) {
  RegionTemplate t;
  t.opt = opt;
  const SmoothedMap g1 = g.scaled(1.0);
  for (const auto& vp : g1.vertices()) ball_nodes(g1, vp, opt, t.balls);
  for (const auto& ep : g1.edges()) t.tube_sections.push_back(tube_section(g1, ep, opt));
  return t;
}

RegionQuadrature difference_set_quadrature(const SmoothedMap& g, const RegionTemplate& tmpl) {
  RegionQuadrature quad;
  const double lam = g.lambda();
  quad.lambda = lam;
  const auto& P = g.params();
  const auto& K = g.working().mesh();

  for (auto nd : tmpl.balls) {
    const Vec3& V = K.points[nd.id];
    nd.x = V + lam * (nd.x - V);
    nd.weight *= lam * lam * lam;
    quad.nodes.push_back(nd);
  }
  for (const auto& vp : g.vertices()) quad.ball_volume += 4 * kPi * std::pow(lam * vp.radius, 3) / 3;
  quad.ball_nodes = quad.nodes.size();

  if (tmpl.tube_sections.size() != g.edges().size()) throw DomainError("template does not match the map");
  for (size_t k = 0; k < g.edges().size(); ++k) {
    const auto& ep = g.edges()[k];
    const double Ra = lam * end_radius(P, ep.a), Rb = lam * end_radius(P, ep.b);
    const double exact = tube_volume(ep.length, ep.radius, Ra, Rb);
    std::vector<RegionNode> nodes;
    double sum = 0;
    // the tube map does not depend on the axial coordinate
    for (const auto& s : tmpl.tube_sections[k]) {
      double t = lam * s.x(0), th = s.x(1);
      double lo = Ra > t ? std::sqrt(Ra * Ra - t * t) : 0.0;
      double hi = ep.length - (Rb > t ? std::sqrt(Rb * Rb - t * t) : 0.0);
      Vec3 x = ep.smoother.fan.frame.to_world(V3<double>(Vec3(t * std::cos(th), t * std::sin(th), 0.5 * (lo + hi))));
      double wgt = lam * lam * s.weight * (hi - lo);
      nodes.push_back({x, wgt, Patch::Edge, ep.edge, -1});
      sum += wgt;
    }
    for (auto& nd : nodes) {
      nd.weight *= exact / sum;
      quad.nodes.push_back(nd);
    }
    quad.tube_volume += exact;
  }

  for (const auto& fp : g.faces()) slab_nodes(g, fp, quad);

  for (auto& nd : quad.nodes) {
    if (nd.kind == Patch::Face) continue;
    Owner o;
    try {
      o = g.owner(nd.x);
    } catch (const DomainError&) {
      ++quad.owner_mismatch;
      continue;
    }
    if (o.kind != nd.kind || o.id != nd.id) ++quad.owner_mismatch;
    nd.cell = o.cell;
  }
  quad.volume = quad.ball_volume + quad.tube_volume + quad.slab_volume;
  return quad;
}

RegionQuadrature difference_set_quadrature(const SmoothedMap& g, const RegionOptions& opt) {
  return difference_set_quadrature(g, region_template(g, opt));
}

NodeSample sample_node(const SmoothedMap& g, const Vec3& x, int cell) {
  const auto& f = g.working();
  if (cell < 0) cell = g.owner(x).cell;
  V3<Jet> y = g.eval(seed(x));
  const Vec3 gx = value_of(y);
  const Mat3 J = jacobian_of(y);
  const Affine& A = f.pieces[cell];
  NodeSample s;
  s.gap = (gx - A(V3<double>(x))).norm();
  s.ddiff = (J - A.matrix).norm();
  s.det = J.determinant();
  s.norm_dg = J.norm();
  const Mat3 Ji = J.inverse();
  s.norm_dginv = Ji.norm();
  int c2 = -1;
  const Vec3 back = g.pl_inverse(gx, &c2);
  s.inv_gap = (back - x).norm();
  s.inv_ddiff = (Ji - f.pieces[c2].matrix.inverse()).norm();
  return s;
}

double w1p_difference(const SmoothedMap& g, double p, const RegionQuadrature& quad) {
  double s = 0;
  for (const auto& nd : quad.nodes) s += nd.weight * diff_power(g, nd.x, nd.cell, p);

  return std::pow(s, 1 / p);
}

double local_max_gap(const SmoothedMap& g, const Vec3& x0, double step) {
  const auto& f = g.working();
  auto gap = [&](const Vec3& x) {
    int c = f.mesh().locate(x);
    if (c < 0) return 0.0;
    return (g.eval(V3<double>(x)) - f.pieces[c](V3<double>(x))).norm();
  };
  Vec3 x = x0;
  double best = gap(x);
  // coordinate pattern search, three step halvings
  for (int level = 0; level < 3; ++level, step *= 0.5) {
    for (bool moved = true; moved;) {
      moved = false;
      for (int k = 0; k < 6; ++k) {
        Vec3 y = x + (k % 2 ? -step : step) * Vec3::Unit(k / 2);
        double v = gap(y);
        if (v > best) {
          best = v;
          x = y;
          moved = true;
        }
      }
    }
  }
  return best;
}

double linf_difference(const SmoothedMap& g, const RegionQuadrature& quad) {
  const auto& f = g.working();
  double best = 0;
  const RegionNode* arg = nullptr;
  for (const auto& nd : quad.nodes) {
    double v = (g.eval(V3<double>(nd.x)) - f.pieces[nd.cell](V3<double>(nd.x))).norm();
    if (v > best) {
      best = v;
      arg = &nd;
    }
  }
  if (!arg) return best;
  return std::max(best, local_max_gap(g, arg->x, 0.5 * std::cbrt(arg->weight)));
}

}  // namespace plsmooth
