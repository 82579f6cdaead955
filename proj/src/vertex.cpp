#include "plsmooth/vertex.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "plsmooth/geometry.hpp"
#include "plsmooth/quadrature.hpp"

namespace plsmooth {

HatMap HatMap::linear(const Mat3& A) {
  return from([A](const auto& x) { return mul(A, x); }, A.norm());
}

Vec3 SphereMap::operator()(const Vec3& x) const { return value_of(map(lift<Jet>(x))); }

SphereMap SphereMap::from_hat(const HatMap& g, double radius) {
  SphereMap m;
  m.raw = [g, radius](const V3<Jet>& x) { return V3<Jet>(g(V3<Jet>(radius * x)) / radius); };
  m.map = [raw = m.raw](const V3<Jet>& x) {
    V3<Jet> y = raw(x);
    return V3<Jet>(y / norm3(y));
  };
  return m;
}

SphereMap SphereMap::linear(const Mat3& A) {
  return from_hat(HatMap::linear(A), 1.0);
}

namespace {

// Jet point on the sphere at x with slots 0, 1 along the tangent basis rows 1, 2 of B.
V3<Jet> tangent_seed(const Vec3& x, const Mat3& B) {
  V3<Jet> p;
  for (int j = 0; j < 3; ++j) {
    p(j) = Jet(x(j));
    p(j).v(0) = B(1, j);
    p(j).v(1) = B(2, j);
  }
  return V3<Jet>(p / norm3(p));
}

Vec3 slot(const V3<Jet>& m, int k) { return {m(0).v(k), m(1).v(k), m(2).v(k)}; }

std::optional<Vec3> newton_preimage(const SphereMap& mu, const Vec3& y, Vec3 x) {
  for (int it = 0; it < 30; ++it) {
    Mat3 B = frame_with_first_axis(x);
    V3<Jet> m = mu.map(tangent_seed(x, B));
    Vec3 r = value_of(m) - y;
    if (r.norm() <= 1e-12) return x;
    Eigen::Matrix<double, 3, 2> J;
    J.col(0) = slot(m, 0);
    J.col(1) = slot(m, 1);
    Eigen::Matrix2d N = J.transpose() * J;
    if (!(std::abs(N.determinant()) > 1e-300)) return std::nullopt;
    Vec2 d = -N.inverse() * (J.transpose() * r);
    if (d.norm() > 0.5) d *= 0.5 / d.norm();
    x = (x + d(0) * B.row(1).transpose() + d(1) * B.row(2).transpose()).normalized();
  }
  if ((mu(x) - y).norm() <= 1e-10) return x;
  return std::nullopt;
}

struct Preimages {
  std::vector<Vec3> points;
  std::vector<double> dets;
};

Preimages find_preimages(const SphereMap& mu, const Vec3& y, int level) {
  Preimages p;
  for (const Vec3& s : icosphere(level)) {
    auto x = newton_preimage(mu, y, s);
    if (!x) continue;
    bool dup = false;
    for (const Vec3& q : p.points) dup = dup || (q - *x).norm() < 1e-7;
    if (dup) continue;
    p.points.push_back(*x);
    p.dets.push_back(tangent_det(mu, *x));
  }
  return p;
}

double resolved_integral_degree(const SphereMap& mu) {
  double coarse = integral_degree(mu, 0.5), fine = integral_degree(mu, 0.25);
  double k = std::round(fine);
  if (std::abs(fine - k) > 0.1 || std::abs(coarse - k) > 0.1) {
    std::ostringstream os;
    os << "integral degree not resolved (" << fine << " vs " << coarse << " at twice the edge length)";
    throw NumericalError(os.str());
  }
  return fine;
}

}  // namespace

double tangent_det(const SphereMap& mu, const Vec3& x) {
  Vec3 n = x.normalized();
  V3<Jet> m = mu.map(tangent_seed(n, frame_with_first_axis(n)));
  return value_of(m).dot(slot(m, 0).cross(slot(m, 1)));
}

double integral_degree(const SphereMap& mu, double max_edge) {
  SphereMesh base = icosphere_mesh(2);
  std::vector<Vec3> img;
  for (const Vec3& p : base.points) img.push_back(mu(p));
  double total = 0;
  // depth-first refinement of one triangle and its image
  std::function<void(const Vec3&, const Vec3&, const Vec3&, const Vec3&, const Vec3&, const Vec3&, int)> add =
      [&](const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& ma, const Vec3& mb, const Vec3& mc, int depth) {
        auto ang = [](const Vec3& u, const Vec3& v) { return std::atan2(u.cross(v).norm(), u.dot(v)); };
        double e = std::max({ang(ma, mb), ang(mb, mc), ang(mc, ma)});
        if (e <= max_edge || depth >= 14) {
          total += solid_angle(ma, mb, mc);
          return;
        }
        Vec3 ab = (a + b).normalized(), bc = (b + c).normalized(), ca = (c + a).normalized();
        Vec3 mab = mu(ab), mbc = mu(bc), mca = mu(ca);
        // close the crack against a neighbour that keeps the edge unsplit; the
        // terms cancel exactly when the neighbour splits it too
        total += solid_angle(ma, mb, mab) + solid_angle(mb, mc, mbc) + solid_angle(mc, ma, mca);
        add(a, ab, ca, ma, mab, mca, depth + 1);
        add(b, bc, ab, mb, mbc, mab, depth + 1);
        add(c, ca, bc, mc, mca, mbc, depth + 1);
        add(ab, bc, ca, mab, mbc, mca, depth + 1);
      };
  for (auto [i, j, k] : base.triangles) add(base.points[i], base.points[j], base.points[k], img[i], img[j], img[k], 0);
  return total / (4 * kPi);
}

DegreeResult degree(const SphereMap& mu, const Vec3& y0) {
  double fine = resolved_integral_degree(mu);
  double k = std::round(fine);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Vec3 y = y0.normalized();
  for (int level : {3, 4}) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Preimages p = find_preimages(mu, y, level);
      bool regular = true;
      for (double d : p.dets) regular = regular && std::abs(d) >= 1e-8;
      if (!regular) {
        y = (y + 1e-3 * Vec3(nd(rng), nd(rng), nd(rng))).normalized();
        continue;
      }
      DegreeResult r;
      r.integral = fine;
      r.value = y;
      r.preimages = p.points;
      for (double d : p.dets) {
        r.signs.push_back(d > 0 ? 1 : -1);
        r.degree += r.signs.back();
      }
      if (r.degree == int(k)) return r;
      break;  // disagreement: refine the seed grid
    }
  }
  throw NumericalError("preimage count disagrees with the integral degree");
}

DegreeResult degree(const SphereMap& mu, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  return degree(mu, Vec3(nd(rng), nd(rng), nd(rng)));
}

namespace {

// Psi(x, t) = normalize((1 - s) x + s end(x)), certified on samples of (x, t).
SphereIsotopy straight_path(const SphereMap& mu, const SphereMap::Fn& end, const std::string& name) {
  double k = resolved_integral_degree(mu);
  if (std::round(k) != 1) {
    std::ostringstream os;
    os << "sphere map has degree " << std::round(k) << ", an isotopy to the identity needs degree 1";
    throw NoIsotopyFound(os.str());
  }
  SphereIsotopy psi = [end](const V3<Jet>& x, const Jet& t) {
    Jet s = time_profile(t);
    V3<Jet> v = (1.0 - s) * x + s * end(x);
    return V3<Jet>(v / norm3(v));
  };
  const auto pts = fibonacci_sphere(2000);
  for (int i = 0; i <= 16; ++i) {
    double t = i / 16.0;
    double s = time_profile(t);
    SphereMap at{[psi, t](const V3<Jet>& x) { return psi(x, Jet(t)); }, {}};
    for (const Vec3& x : pts) {
      Vec3 e = value_of(end(lift<Jet>(x)));
      Vec3 v = (1 - s) * x + s * e;
      if (v.norm() < 1e-3 * ((1 - s) + s * e.norm())) {
        std::ostringstream os;
        os << name << " vanishes near x = (" << x.transpose() << ") at t = " << t;
        throw NoIsotopyFound(os.str());
      }
      if (!(tangent_det(at, x) > 0)) {
        std::ostringstream os;
        os << name << " folds near x = (" << x.transpose() << ") at t = " << t;
        throw NoIsotopyFound(os.str());
      }
    }
    if (i % 4 == 0 && std::round(resolved_integral_degree(at)) != 1)
      throw NoIsotopyFound(name + " loses degree one");
  }
  return psi;
}

}  // namespace

SphereIsotopy linear_sphere_isotopy(const SphereMap& mu) {
  return straight_path(mu, mu.map, "linear sphere isotopy");
}

SphereIsotopy unnormalized_sphere_isotopy(const SphereMap& mu) {
  if (!mu.raw) throw NoIsotopyFound("sphere map carries no unnormalized form");
  return straight_path(mu, mu.raw, "unnormalized sphere isotopy");
}

IsotopyProvider first_of(std::vector<IsotopyProvider> providers) {
  return [providers](const SphereMap& mu) {
    std::string why;
    for (const auto& p : providers) {
      try {
        return p(mu);
      } catch (const NoIsotopyFound& e) {
        why += std::string(why.empty() ? "" : "; ") + e.what();
      }
    }
    throw NoIsotopyFound(why);
  };
}

SubdeterminantReport radial_subdeterminant(const HatMap& g, double a, double b, int samples) {
  SubdeterminantReport rep;
  rep.floor = rep.radial_floor = 1e300;
  rep.required = 1e-6 * g.df_norm * g.df_norm;
  auto check = [&](const Vec3& x) {
    Vec3 u = x.normalized();
    V3<Jet> y = g(seed(x));
    Mat3 J = jacobian_of(y);
    Mat3 B = frame_with_first_axis(u);
    Vec3 mu = value_of(y).normalized();
    double d = mu.dot((J * B.row(1).transpose()).cross(J * B.row(2).transpose()));
    double radial = mu.dot(J * u);
    if (d < rep.floor) {
      rep.floor = d;
      rep.worst = x;
    }
    if (radial < rep.radial_floor) {
      rep.radial_floor = radial;
      if (radial < 1e-6 * g.df_norm) rep.worst = x;
    }
  };
  const auto dirs = fibonacci_sphere(samples);
  const double phi = 0.5 * (std::sqrt(5.0) - 1);
  for (int k = 0; k < samples; ++k) check((a + (b - a) * std::fmod((k + 0.5) * phi, 1.0)) * dirs[k]);
  // thin features (slabs, tubes) are invisible to the uniform directions
  if (g.features)
    for (const Vec3& x : g.features(a, b)) check(x);
  rep.ok = rep.floor >= rep.required && rep.radial_floor >= 1e-6 * g.df_norm;
  return rep;
}

int shrink_until_certified(const std::function<HatMap(double)>& build, double R, int max_halvings,
                           int samples) {
  SubdeterminantReport last;
  for (int k = 0; k <= max_halvings; ++k) {
    last = radial_subdeterminant(build(std::ldexp(1.0, -k)), R / 2, 2 * R, samples);
    if (last.ok) return k;
  }
  std::ostringstream os;
  os << "radial subdeterminant still " << last.floor << " (radial growth " << last.radial_floor
     << ") at (" << last.worst.transpose() << ") after "
     << max_halvings << " halvings";
  throw CertificationError(os.str());
}

VertexSmoother make_vertex_smoother(const HatMap& hat, double R, const VertexOptions& opt) {
  if (!(R > 0)) throw DomainError("vertex radius must be positive");
  VertexSmoother s;
  s.R = R;
  s.hat = hat;

  auto rep = radial_subdeterminant(hat, R / 2, 2 * R, opt.delta_samples);
  if (!rep.ok) {
    std::ostringstream os;
    os << "radial subdeterminant " << rep.floor << " (radial growth " << rep.radial_floor << ") at ("
       << rep.worst.transpose() << ")";
    throw CertificationError(os.str());
  }
  s.delta_floor = rep.floor;

  // minimal radial stretch |g(x)| / |x| on 3R/4 <= |x| <= R: samples, then a
  // pattern search on the sphere from the best few
  double ratio = 1e300;
  for (int i = 0; i <= 8; ++i) {
    double r = R * (0.75 + 0.25 * i / 8);
    auto ratio_at = [&](const Vec3& d) { return hat(Vec3(r * d.normalized())).norm() / r; };
    std::vector<std::pair<double, Vec3>> best;
    for (const Vec3& d : fibonacci_sphere(4096)) best.emplace_back(ratio_at(d), d);
    if (hat.features)
      for (const Vec3& x : hat.features(r, r)) best.emplace_back(ratio_at(x), x.normalized());
    std::partial_sort(best.begin(), best.begin() + 8, best.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int j = 0; j < 8; ++j) {
      auto [v, d] = best[j];
      for (double step = 0.05; step > 1e-9;) {
        Mat3 B = frame_with_first_axis(d);
        bool moved = false;
        for (int k = 0; k < 4 && !moved; ++k) {
          Vec3 e = (k < 2 ? 1.0 : -1.0) * B.row(1 + k % 2).transpose();
          Vec3 trial = (d + step * e).normalized();
          double tv = ratio_at(trial);
          if (tv < v) {
            v = tv;
            d = trial;
            moved = true;
          }
        }
        if (!moved) step *= 0.5;
      }
      ratio = std::min(ratio, v);
    }
  }
  if (opt.rho) {
    if (!(*opt.rho > 0) || *opt.rho > ratio * (1 + 1e-12))
      throw CertificationError("requested inner ratio does not fit inside the image of the ball");
    s.rho = *opt.rho;
  } else {
    s.rho = opt.rho_fraction * ratio;
  }
  if (!(s.rho > 0) || !std::isfinite(s.rho)) throw CertificationError("inner ratio collapsed");

  s.mu = SphereMap::from_hat(hat, 0.75 * R);
  s.isotopy = opt.provider(s.mu);
  return s;
}

template <class T>
V3<T> vertex_map(const VertexSmoother& s, const V3<T>& x) {
  const double R = s.R;
  const double r = std::sqrt(val(x(0)) * val(x(0)) + val(x(1)) * val(x(1)) + val(x(2)) * val(x(2)));
  if (r >= R) return s.hat(x);
  if (r <= 0.5 * R) return V3<T>(s.rho * x);
  T rr = norm3(x);
  if (r >= 0.75 * R) {
    T e = eta(T((4.0 * rr - 3.0 * R) / R));
    // projection radius, frozen at 3R/4 near the inner sphere
    T c = 0.75 * R + (rr - 0.75 * R) * eta(T((8.0 * rr - 6.0 * R) / R));
    V3<T> q = s.hat(V3<T>(x * (c / rr)));
    V3<T> g = s.hat(x);
    return V3<T>(e * g + (1.0 - e) * s.rho * rr * q / norm3(q));
  }
  T t = eta(T((4.0 * rr - 2.0 * R) / R));
  if constexpr (std::is_same_v<T, Jet>) {
    return V3<T>(s.rho * rr * s.isotopy(V3<Jet>(x / rr), t));
  } else {
    Vec3 p = value_of(s.isotopy(lift<Jet>(Vec3(x / rr)), Jet(t)));
    return V3<T>(s.rho * rr * p);
  }
}

template V3<double> vertex_map(const VertexSmoother&, const V3<double>&);
template V3<Jet> vertex_map(const VertexSmoother&, const V3<Jet>&);

VertexCertificate certify_vertex(const VertexSmoother& s, int n) {
  VertexCertificate c;
  c.min_det = 1e300;
  for (int i = 0; i < n; ++i) {
    double r = 2 * s.R * (i + 0.5) / n;
    for (int j = 0; j < n; ++j) {
      double th = kPi * (j + 0.5) / n;
      for (int k = 0; k < n; ++k) {
        double ph = 2 * kPi * (k + 0.5) / n;
        Vec3 x = r * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
        double d = jacobian_of(vertex_map(s, seed(x))).determinant();
        if (d < c.min_det) {
          c.min_det = d;
          c.worst = x;
        }
      }
    }
  }
  c.ok = c.min_det > 0;
  return c;
}

}  // namespace plsmooth
