#include "plsmooth/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace plsmooth {

namespace {

// Runs body(i) for i < n on `workers` threads; results go to caller-owned
// slots, so the outcome does not depend on the schedule.
template <class Body>
void parallel_for(size_t n, int workers, Body body) {
  if (workers <= 1 || n < 2048) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  auto run = [&] {
    try {
      for (size_t i; (i = next.fetch_add(256)) < n;)
        for (size_t j = i; j < std::min(n, i + 256); ++j) body(j);
    } catch (...) {
      std::lock_guard<std::mutex> lock(m);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Draws near a quadrature node chosen with probability proportional to its weight.
Sampler node_sampler(std::vector<Vec3> xs, std::vector<double> ws) {
  std::vector<double> cumulative;
  std::vector<double> size;
  double total = 0;
  for (double w : ws) {
    total += w;
    cumulative.push_back(total);
    size.push_back(0.5 * std::cbrt(w));
  }
  return [xs, cumulative, size, total](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0, 1);
    size_t k = std::lower_bound(cumulative.begin(), cumulative.end(), U(rng) * total) - cumulative.begin();
    k = std::min(k, xs.size() - 1);
    Vec3 u(U(rng) - 0.5, U(rng) - 0.5, U(rng) - 0.5);
    return Vec3(xs[k] + size[k] * u);
  };
}

}  // namespace

std::vector<CertificationReport> certify_level(const SmoothedMap& g, const RegionQuadrature& quad,
                                               const std::vector<double>& dets, long audit_samples,
                                               int boundary_samples, unsigned long long seed) {
  std::vector<CertificationReport> out;
  const auto& f = g.working();
  const auto& K = f.mesh();

  CertificationReport jac;
  jac.check = "jacobian at nodes";
  jac.samples = long(dets.size());
  jac.extreme = 1e300;
  for (size_t i = 0; i < dets.size(); ++i)
    if (!std::isnan(dets[i]) && dets[i] < jac.extreme) {
      jac.extreme = dets[i];
      jac.witness = quad.nodes[i].x;
    }
  if (dets.empty()) jac.extreme = 0;
  jac.worst = -jac.extreme;
  jac.pass = dets.empty() || jac.extreme > 0;
  jac.note = dets.empty() ? "no smoothed region" : "min det " + fmt(jac.extreme);
  if (jac.pass) jac.witness.reset();
  out.push_back(jac);

  std::vector<Stratum> strata;
  const Patch kinds[3] = {Patch::Vertex, Patch::Edge, Patch::Face};
  double covered = 0;
  for (Patch kind : kinds) {
    std::vector<Vec3> xs;
    std::vector<double> ws;
    for (const auto& nd : quad.nodes)
      if (nd.kind == kind) {
        xs.push_back(nd.x);
        ws.push_back(nd.weight);
      }
    if (xs.empty()) continue;
    double m = 0;
    for (double w : ws) m += w;
    covered += m;
    strata.push_back({patch_name(kind), m, node_sampler(std::move(xs), std::move(ws))});
  }
  double total = 0;
  for (size_t c = 0; c < K.cells.size(); ++c) total += std::abs(signed_volume(K.cell_points(int(c))));
  strata.push_back({"bulk", std::max(total - covered, 0.0), cells_sampler(K)});
  PointMap map = [&](const Vec3& x) { return g.eval(V3<double>(x)); };
  JacobianMap jm = [&](const Vec3& x) { return g.jacobian(x); };
  out.push_back(injectivity_audit(map, jm, strata, audit_samples, K.scale, seed));

  CertificationReport bd;
  bd.check = "boundary agreement";
  bd.tolerance = 1e-12 * K.scale;
  bd.seed = seed;
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<int> bfaces;
  for (size_t F = 0; F < K.faces.size(); ++F)
    if (K.boundary_face[F]) bfaces.push_back(int(F));
  for (int i = 0; i < boundary_samples && !bfaces.empty(); ++i) {
    int F = bfaces[std::min(bfaces.size() - 1, size_t(U(rng) * bfaces.size()))];
    int c = K.face_cells[F].front();
    double a = U(rng), b = U(rng);
    if (a + b > 1) {
      a = 1 - a;
      b = 1 - b;
    }
    const auto& v = K.faces[F];
    Vec3 x = (1 - a - b) * K.points[v[0]] + a * K.points[v[1]] + b * K.points[v[2]];
    Vec3 inward = (tet_centroid(K.cell_points(c)) - x).normalized();
    x += 1e-7 * K.scale * inward;
    double gap;
    try {
      gap = (g.eval(V3<double>(x)) - f.pieces[c](V3<double>(x))).norm();
    } catch (const DomainError&) {
      continue;
    }
    ++bd.samples;
    if (gap > bd.worst) {
      bd.worst = gap;
      bd.witness = x;
    }
  }
  bd.extreme = bd.worst;
  bd.pass = bd.worst <= bd.tolerance;
  if (bfaces.empty()) bd.note = "no boundary faces";
  if (bd.pass) bd.witness.reset();
  out.push_back(bd);
  return out;
}

SweepTable lambda_sweep(const SmoothedMap& g, const SweepOptions& opt) {
  SweepTable table;
  table.p = opt.p;
  table.q = opt.q;
  for (const auto& n : opt.norms) table.norm_names.push_back(n.name());
  const auto& f = g.working();
  const auto& K = f.mesh();

  double bulk_dg = 0, bulk_dginv = 0, domain_volume = 0;
  for (size_t c = 0; c < K.cells.size(); ++c) {
    bulk_dg = std::max(bulk_dg, f.pieces[c].matrix.norm());
    bulk_dginv = std::max(bulk_dginv, f.pieces[c].matrix.inverse().norm());
    domain_volume += std::abs(signed_volume(K.cell_points(int(c))));
  }
  RegionOptions ro = opt.region;
  ro.p = opt.p;
  const RegionTemplate tmpl = region_template(g, ro);

  for (double lam : opt.lambdas) {
    SweepRow row;
    row.lambda = lam;
    try {
      const SmoothedMap gl = g.scaled(lam);
      const RegionQuadrature quad = difference_set_quadrature(gl, tmpl);
      row.vol_E = quad.volume;
      row.vol_balls = quad.ball_volume;
      row.vol_tubes = quad.tube_volume;
      row.vol_slabs = quad.slab_volume;
      row.nodes = long(quad.nodes.size());
      row.owner_mismatch = quad.owner_mismatch;

      std::vector<NodeSample> s(quad.nodes.size());
      std::vector<char> failed(quad.nodes.size(), 0);
      parallel_for(quad.nodes.size(), opt.workers, [&](size_t i) {
        try {
          s[i] = sample_node(gl, quad.nodes[i].x, quad.nodes[i].cell);
        } catch (const Error&) {
          failed[i] = 1;
        }
      });

      double sp = 0, sq = 0;
      size_t arg = 0;
      long bad = 0;
      std::vector<double> dets;
      std::vector<WeightedValue> ddiff;
      for (size_t i = 0; i < s.size(); ++i) {
        if (failed[i]) {
          ++bad;
          dets.push_back(std::nan(""));
          continue;
        }
        const double w = quad.nodes[i].weight;
        sp += w * std::pow(s[i].ddiff, opt.p);
        sq += w * s[i].det * std::pow(s[i].inv_ddiff, opt.q);
        row.image_volume += w * s[i].det;
        if (s[i].gap > row.linf_f) {
          row.linf_f = s[i].gap;
          arg = i;
        }
        row.linf_inv = std::max(row.linf_inv, s[i].inv_gap);
        row.sup_ddiff = std::max(row.sup_ddiff, s[i].ddiff);
        row.sup_Dg = std::max(row.sup_Dg, s[i].norm_dg);
        row.sup_Dginv = std::max(row.sup_Dginv, s[i].norm_dginv);
        dets.push_back(s[i].det);
        ddiff.push_back({s[i].ddiff, w});
      }
      if (!quad.nodes.empty())
        row.linf_f = std::max(row.linf_f, local_max_gap(gl, quad.nodes[arg].x, 0.5 * std::cbrt(quad.nodes[arg].weight)));
      row.w1p_f = std::pow(sp, 1 / opt.p);
      row.w1q_inv = std::pow(sq, 1 / opt.q);
      row.sup_Dg = std::max(row.sup_Dg, bulk_dg);
      row.sup_Dginv = std::max(row.sup_Dginv, bulk_dginv);
      row.lp_bound = std::pow(row.sup_ddiff, opt.p) * row.vol_E;
      row.min_det = 0;
      for (size_t i = 0; i < dets.size(); ++i)
        if (!failed[i] && (row.min_det == 0 || dets[i] < row.min_det)) row.min_det = dets[i];
      ddiff.push_back({0.0, std::max(domain_volume - row.vol_E, 0.0)});
      const Rearrangement rearr(ddiff);
      for (const auto& n : opt.norms) row.ri.push_back(n(rearr));

      row.checks = certify_level(gl, quad, dets, opt.audit_samples, opt.boundary_samples, opt.seed);
      // a diffeomorphism onto its image; g = f at the boundary is reported
      // separately since face slabs may reach the boundary
      row.certified = bad == 0 && row.owner_mismatch == 0 && row.checks[0].pass && row.checks[1].pass;
      row.boundary_fixed = row.checks[2].pass;
      std::ostringstream note;
      if (bad) note << bad << " nodes failed to evaluate; ";
      if (row.owner_mismatch) note << row.owner_mismatch << " nodes outside their patch; ";
      for (const auto& c : row.checks)
        if (!c.pass) note << c.summary() << "; ";
      row.note = note.str();
    } catch (const Error& e) {
      row.certified = false;
      row.note = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string SweepTable::csv() const {
  std::ostringstream os;
  os << "lambda,vol_E,linf_f,w1p_f,linf_inv,w1q_inv,sup_Dg,sup_Dginv";
  for (const auto& n : norm_names) os << "," << n;
  os << ",certified\n";
  for (const auto& r : rows) {
    os << fmt(r.lambda) << "," << fmt(r.vol_E) << "," << fmt(r.linf_f) << "," << fmt(r.w1p_f) << ","
       << fmt(r.linf_inv) << "," << fmt(r.w1q_inv) << "," << fmt(r.sup_Dg) << "," << fmt(r.sup_Dginv);
    for (double v : r.ri) os << "," << fmt(v);
    os << "," << (r.certified ? "yes" : "no") << "\n";
  }
  return os.str();
}

int SweepTable::first_below(double epsilon) const {
  for (size_t i = 0; i < rows.size(); ++i)
    if (rows[i].certified && rows[i].w1p_f + rows[i].w1q_inv < epsilon) return int(i);
  return -1;
}

}  // namespace plsmooth
