#include "plsmooth/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace plsmooth {

std::string CertificationReport::summary() const {
  std::ostringstream os;
  os << check << ": " << (pass ? "pass" : "FAIL") << " (" << samples << " samples, worst " << worst
     << ", tolerance " << tolerance << ")";
  if (witness) os << " at (" << witness->transpose() << ")";
  if (witness2) os << " and (" << witness2->transpose() << ")";
  if (!note.empty()) os << "; " << note;
  return os.str();
}

Sampler box_sampler(const Box& box) {
  return [box](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0, 1);
    Vec3 u(U(rng), U(rng), U(rng));
    return Vec3(box.lo + u.cwiseProduct(box.hi - box.lo));
  };
}

Sampler cells_sampler(const SimplicialComplex& K, const std::vector<int>& cells) {
  std::vector<Tet> tets;
  std::vector<double> cumulative;
  double total = 0;
  for (int c : cells) {
    tets.push_back(K.cell_points(c));
    total += std::abs(signed_volume(tets.back()));
    cumulative.push_back(total);
  }
  return [tets, cumulative, total](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0, 1);
    size_t k = std::lower_bound(cumulative.begin(), cumulative.end(), U(rng) * total) - cumulative.begin();
    k = std::min(k, tets.size() - 1);
    // uniform barycentric coordinates from sorted uniforms
    double u[3] = {U(rng), U(rng), U(rng)};
    std::sort(u, u + 3);
    double l[4] = {u[0], u[1] - u[0], u[2] - u[1], 1 - u[2]};
    Vec3 x = Vec3::Zero();
    for (int i = 0; i < 4; ++i) x += l[i] * tets[k][i];
    return x;
  };
}

Sampler cells_sampler(const SimplicialComplex& K) {
  std::vector<int> all(K.cells.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = int(i);
  return cells_sampler(K, all);
}

CertificationReport fd_check(const PointMap& map, const JacobianMap& jac, const Sampler& region, int n,
                             double scale, unsigned long long seed) {
  CertificationReport rep;
  rep.check = "finite differences";
  rep.tolerance = 1e-5;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  const double h = 1e-6 * scale;
  long skipped = 0;
  for (int i = 0; i < n; ++i) {
    Vec3 x = region(rng);
    Mat3 fd;
    Mat3 J;
    try {
      J = jac(x);
      for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Unit(k) * h;
        fd.col(k) = (map(x + e) - map(x - e)) / (2 * h);
      }
    } catch (const DomainError&) {
      ++skipped;
      continue;
    }
    double err = (fd - J).norm() / std::max(J.norm(), 1e-300);
    ++rep.samples;
    if (err > rep.worst) {
      rep.worst = err;
      rep.witness = x;
    }
  }
  rep.extreme = rep.worst;
  rep.pass = rep.samples > 0 && rep.worst <= rep.tolerance;
  if (skipped) rep.note = std::to_string(skipped) + " samples too close to the boundary";
  if (rep.pass) rep.witness.reset();
  return rep;
}

CertificationReport jacobian_points(const JacobianMap& jac, const std::vector<Vec3>& points, double floor) {
  CertificationReport rep;
  rep.check = "jacobian floor";
  rep.extreme = 1e300;
  for (const Vec3& x : points) {
    double d;
    try {
      d = jac(x).determinant();
    } catch (const DomainError&) {
      continue;
    }
    ++rep.samples;
    if (d < rep.extreme) {
      rep.extreme = d;
      rep.witness = x;
    }
  }
  rep.worst = floor - rep.extreme;
  rep.pass = rep.samples > 0 && rep.worst <= 0;
  std::ostringstream os;
  os << "min det " << rep.extreme << ", floor " << floor;
  rep.note = os.str();
  if (rep.pass) rep.witness.reset();
  return rep;
}

CertificationReport jacobian_grid(const JacobianMap& jac, const Box& box, int grid, double floor) {
  std::vector<Vec3> pts;
  pts.reserve(size_t(grid + 1) * (grid + 1) * (grid + 1));
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= grid; ++j)
      for (int k = 0; k <= grid; ++k)
        pts.push_back(box.lo + Vec3(i, j, k).cwiseProduct(box.hi - box.lo) / grid);
  return jacobian_points(jac, pts, floor);
}

namespace {

struct CellKey {
  long i, j, k;
  bool operator==(const CellKey& o) const { return i == o.i && j == o.j && k == o.k; }
};
struct CellHash {
  size_t operator()(const CellKey& c) const {
    return size_t(c.i * 73856093) ^ size_t(c.j * 19349663) ^ size_t(c.k * 83492791);
  }
};

}  // namespace

CertificationReport injectivity_audit(const PointMap& map, const JacobianMap& jac,
                                      const std::vector<Stratum>& strata, long n, double scale,
                                      unsigned long long seed) {
  CertificationReport rep;
  rep.check = "injectivity";
  // two samples whose images agree to 1e-9 scale must be the same point
  const double image_tol = 1e-9 * scale;
  rep.tolerance = 1e-6 * scale;
  rep.seed = seed;
  std::mt19937_64 rng(seed);

  double total = 0;
  for (const auto& s : strata) total += s.measure;
  std::vector<Vec3> xs, ys;
  std::vector<int> owner;
  for (size_t k = 0; k < strata.size(); ++k) {
    long m = std::max(500L, long(std::ceil(n * strata[k].measure / std::max(total, 1e-300))));
    for (long i = 0; i < m; ++i) {
      Vec3 x = strata[k].draw(rng);
      Vec3 y;
      try {
        y = map(x);
      } catch (const DomainError&) {
        continue;
      }
      xs.push_back(x);
      ys.push_back(y);
      owner.push_back(int(k));
    }
  }
  rep.samples = long(xs.size());
  if (xs.empty()) return rep;

  Box ib;
  for (const Vec3& y : ys) ib.add(y);
  const double h = std::max(std::cbrt((ib.hi - ib.lo).prod() / double(xs.size())), 1e-12 * scale);
  std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
  auto key = [&](const Vec3& y) {
    Vec3 u = (y - ib.lo) / h;
    return CellKey{long(std::floor(u(0))), long(std::floor(u(1))), long(std::floor(u(2)))};
  };
  for (size_t i = 0; i < ys.size(); ++i) grid[key(ys[i])].push_back(int(i));

  // Newton from x towards target; returns the converged point or nothing
  auto solve = [&](Vec3 x, const Vec3& target) -> std::optional<Vec3> {
    for (int it = 0; it < 40; ++it) {
      Vec3 r;
      Mat3 J;
      try {
        r = map(x) - target;
        if (r.norm() <= image_tol) return x;
        J = jac(x);
      } catch (const DomainError&) {
        return std::nullopt;
      }
      if (!(std::abs(J.determinant()) > 0)) return std::nullopt;
      x -= J.lu().solve(r);
    }
    return std::nullopt;
  };

  long refined = 0;
  std::vector<std::optional<double>> stretch(xs.size());
  for (size_t i = 0; i < ys.size(); ++i) {
    CellKey c = key(ys[i]);
    for (long a = -1; a <= 1; ++a)
      for (long b = -1; b <= 1; ++b)
        for (long d = -1; d <= 1; ++d) {
          auto it = grid.find({c.i + a, c.j + b, c.k + d});
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j == int(i)) continue;
            double dy = (ys[i] - ys[j]).norm();
            if (dy > h) continue;
            double dx = (xs[i] - xs[j]).norm();
            if (!stretch[j]) {
              try {
                Mat3 J = jac(xs[j]);
                stretch[j] = std::abs(J.determinant()) > 0 ? J.inverse().norm() : 1e300;
              } catch (const DomainError&) {
                stretch[j] = 1e300;
              }
            }
            // preimages further apart than the local inverse allows
            if (dx <= 4 * *stretch[j] * dy + 1e-9 * scale) continue;
            ++refined;
            auto z = solve(xs[j], ys[i]);
            if (!z) continue;
            double sep = (*z - xs[i]).norm();
            rep.worst = std::max(rep.worst, sep);
            if (sep > rep.tolerance) {
              rep.witness = xs[i];
              rep.witness2 = *z;
              std::ostringstream os;
              os << "images of strata " << strata[owner[i]].name << " and " << strata[owner[j]].name
                 << " coincide";
              rep.note = os.str();
              rep.pass = false;
              return rep;
            }
          }
        }
  }
  rep.pass = true;
  rep.note = std::to_string(refined) + " close pairs refined";
  return rep;
}

}  // namespace plsmooth
