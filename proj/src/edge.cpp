#include "plsmooth/edge.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace plsmooth {

namespace {

constexpr int kTwistSamples = 1024;

double wrap_to(double a, double ref) { return ref + wrap_angle(a - ref); }

std::string edge_name(const EdgeFan& fan) {
  return fan.edge >= 0 ? "edge " + std::to_string(fan.edge) : "edge fan";
}

}  // namespace

EdgeFan make_edge_fan(std::vector<double> angles, std::vector<Mat3> pieces) {
  const size_t m = angles.size();
  if (m < 2 || pieces.size() != m) throw ValidationError("edge fan needs matching angles and pieces");
  for (size_t i = 0; i < m; ++i) {
    if (angles[i] < -kPi || angles[i] >= kPi) throw ValidationError("fan angle outside [-pi, pi)");
    if (i && !(angles[i] > angles[i - 1])) throw ValidationError("fan angles must increase");
  }
  EdgeFan fan;
  fan.stretch = pieces[0](2, 2);
  if (!(fan.stretch > 0)) throw ValidationError("edge stretch must be positive");
  double mag = 0;
  for (const auto& B : pieces) mag = std::max(mag, B.norm());
  for (size_t i = 0; i < m; ++i) {
    const Mat3& B = pieces[i];
    if ((B.col(2) - Vec3(0, 0, fan.stretch)).norm() > 1e-10 * mag)
      throw ValidationError("fan pieces must map the axis to the image axis with one stretch");
    if (!(B.determinant() > 0)) throw ValidationError("fan piece is not sense preserving");
    const Mat3& P = pieces[(i + m - 1) % m];
    Vec3 ray(std::cos(angles[i]), std::sin(angles[i]), 0);
    if ((B * ray - P * ray).norm() > 1e-10 * mag)
      throw ValidationError("fan pieces disagree on a face ray");
  }
  fan.trivial = true;
  for (size_t i = 1; i < m; ++i)
    if ((pieces[i] - pieces[0]).norm() > 1e-12 * mag) fan.trivial = false;
  fan.angles = std::move(angles);
  fan.pieces = std::move(pieces);
  return fan;
}

EdgeFan edge_fan_from(const PLMap& f, const EdgeIncidence& inc) {
  for (int c : inc.cells)
    if (c < 0) throw ValidationError("edge " + std::to_string(inc.edge) + " is on the boundary");
  const Mat3& F = inc.frame.rotation;
  Vec3 dir = F.row(2).transpose();
  Vec3 v = f.pieces[inc.cells[0]].matrix * dir;
  Mat3 Q = frame_with_third_axis(v);
  // turn the image frame about the axis so that the first piece carries no
  // rotation around it; otherwise the untwist annulus has to undo it
  Mat3 B0 = Q * f.pieces[inc.cells[0]].matrix * F.transpose();
  double psi = std::atan2(B0(1, 0) - B0(0, 1), B0(0, 0) + B0(1, 1));
  Q = Eigen::AngleAxisd(-psi, Vec3::UnitZ()).toRotationMatrix() * Q;
  std::vector<Mat3> pieces;
  for (int c : inc.cells) {
    Mat3 B = Q * f.pieces[c].matrix * F.transpose();
    if ((B.col(2) - Vec3(0, 0, v.norm())).norm() <= 1e-10 * B.norm()) B.col(2) = Vec3(0, 0, v.norm());
    pieces.push_back(B);
  }
  EdgeFan fan = make_edge_fan(inc.angles, pieces);
  fan.edge = inc.edge;
  fan.length = inc.length;
  fan.frame = inc.frame;
  fan.image_frame.rotation = Q;
  fan.image_frame.origin = f.vertex_image(inc.a);
  return fan;
}

RadiusField RadiusField::constant(double r) {
  if (!(r > 0)) throw DomainError("radius must be positive");
  RadiusField f;
  f.r0 = f.r1 = r;
  return f;
}

RadiusField RadiusField::ramp(double r0, double r1, double start, double length) {
  if (!(r0 > 0) || !(r1 > 0) || !(length > 0)) throw DomainError("invalid radius ramp");
  RadiusField f;
  f.r0 = r0;
  f.r1 = r1;
  f.start = start;
  f.length = length;
  return f;
}

double RadiusField::slope_bound() const {
  if (is_constant()) return 0.0;
  return std::abs(r1 - r0) * profile_constants().sup_eta_prime / length;
}

namespace {

double delta_ref(const EdgeSmoother& s, double theta) {
  const int n = int(s.delta_grid.size());
  double u = (theta + kPi) / (2 * kPi) * n;
  u -= n * std::floor(u / n);
  int k = int(u) % n;
  double a = u - std::floor(u);
  double d0 = s.delta_grid[k];
  double d1 = s.delta_grid[(k + 1) % n];
  if (k + 1 == n) d1 = wrap_to(d1, d0);
  return (1 - a) * d0 + a * d1;
}

template <class T>
V3<T> on_circle(const T& radius, const T& theta, const T& x3) {
  using std::cos;
  using std::sin;
  return V3<T>(radius * cos(theta), radius * sin(theta), x3);
}

// |horizontal part of the wedge map| / t at (t, theta, x3).
double radial_ratio(const EdgeSmoother& s, double t, double theta, double x3) {
  Vec3 g = wedge_map(s, V3<double>(on_circle(t, theta, x3)));
  return std::hypot(g(0), g(1)) / t;
}

double golden_min(const std::function<double(double)>& fn, double a, double b) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 60; ++i) {
    double c = b - r * (b - a), d = a + r * (b - a);
    if (fn(c) < fn(d))
      b = d;
    else
      a = c;
  }
  return fn(0.5 * (a + b));
}

}  // namespace

EdgeSmoother make_edge_smoother(const EdgeFan& fan, const std::vector<WidthField>& widths,
                                const RadiusField& radius, const std::vector<bool>& slab_on_next) {
  const size_t m = fan.angles.size();
  if (widths.size() != m) throw ValidationError("one width per fan face is required");
  if (!slab_on_next.empty() && slab_on_next.size() != m) throw ValidationError("one slab side per fan face");
  EdgeSmoother s;
  s.fan = fan;
  s.radius = radius;

  double gap = 2 * kPi;
  for (size_t i = 0; i < m; ++i) {
    double next = i + 1 < m ? fan.angles[i + 1] : fan.angles[0] + 2 * kPi;
    gap = std::min(gap, next - fan.angles[i]);
  }
  double bound = radius.min() / 4 * std::tan(std::min(gap, kPi / 8) / 8);
  for (size_t i = 0; i < m; ++i) {
    if (widths[i].max() >= bound) {
      std::ostringstream os;
      os << "slab overlap at " << edge_name(fan) << ", face " << i << ": width " << widths[i].max()
         << " must stay below " << bound;
      throw CertificationError(os.str());
    }
  }

  for (size_t i = 0; i < m; ++i) {
    const Mat3& prev = fan.pieces[(i + m - 1) % m];
    const Mat3& next = fan.pieces[i];
    Vec3 n(-std::sin(fan.angles[i]), std::cos(fan.angles[i]), 0);
    bool forward = slab_on_next.empty() ? next.determinant() >= prev.determinant() : bool(slab_on_next[i]);
    Frame fr;
    fr.rotation = frame_with_first_axis(forward ? n : Vec3(-n));
    Affine left{forward ? prev : next, Vec3::Zero()};
    Affine right{forward ? next : prev, Vec3::Zero()};
    s.blends.push_back(make_face_blend(make_face_pair(left, right, fr), widths[i]));
  }
  if (fan.trivial) {
    s.rho = 1.0;
    return s;
  }

  std::vector<double> heights{0.0};
  if (!radius.is_constant())
    for (double k : {-1.0, 0.0, 0.5, 1.0, 2.0}) heights.push_back(radius.start + k * radius.length);
  double best = 1e300;
  for (double z : heights) {
    double r = radius(z);
    for (int it = 0; it <= 10; ++it) {
      double t = r * (0.5 + 0.05 * it);
      int arg = 0;
      double lo = 1e300;
      for (int k = 0; k < kTwistSamples; ++k) {
        double v = radial_ratio(s, t, -kPi + 2 * kPi * k / kTwistSamples, z);
        if (v < lo) {
          lo = v;
          arg = k;
        }
      }
      double h = 2 * kPi / kTwistSamples;
      double th = -kPi + h * arg;
      lo = std::min(lo, golden_min([&](double a) { return radial_ratio(s, t, a, z); }, th - h, th + h));
      best = std::min(best, lo);
    }
  }
  s.rho = 0.9 * best;
  if (!(s.rho > 0) || !std::isfinite(s.rho))
    throw CertificationError("squeeze radius collapsed at " + edge_name(fan));

  // twist angle delta(theta) = arg U(theta) - theta, unwrapped along the grid
  const double r = radius(0.0);
  s.delta_grid.resize(kTwistSamples);
  double prev_arg = 0;
  double first = 0;
  for (int k = 0; k <= kTwistSamples; ++k) {
    double th = -kPi + 2 * kPi * k / kTwistSamples;
    Vec3 g = wedge_map(s, V3<double>(on_circle(0.6 * r, th, 0.0)));
    double a = std::atan2(g(1), g(0));
    if (k == 0) {
      a = wrap_to(a, th);  // the twist starts on the branch nearest zero
      first = a;
    } else {
      a = wrap_to(a, prev_arg);
      if (!(a > prev_arg)) throw CertificationError("image circle is not star shaped at " + edge_name(fan));
    }
    prev_arg = a;
    if (k < kTwistSamples) s.delta_grid[k] = a - th;
  }
  if (std::abs(prev_arg - first - 2 * kPi) > 1e-6)
    throw CertificationError("image circle does not wind once at " + edge_name(fan));
  return s;
}

template <class T>
V3<T> wedge_map(const EdgeSmoother& s, const V3<T>& y) {
  double th = std::atan2(val(y(1)), val(y(0)));
  size_t best = 0;
  double bd = 1e300;
  for (size_t i = 0; i < s.fan.angles.size(); ++i) {
    double d = std::abs(wrap_angle(th - s.fan.angles[i]));
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return face_blend_world(s.blends[best], y);
}

template <class T>
V3<T> seglem_extend(const EdgeSmoother& s, const V3<T>& y) {
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const double lam = s.fan.stretch;
  if (s.fan.trivial) return mul(s.fan.pieces[0], y);
  T r = s.radius(y(2));
  const double tv = std::hypot(val(y(0)), val(y(1)));
  const double sv = tv / val(r);
  if (sv >= 1.0) return wedge_map(s, y);
  if (sv < 0.4) return V3<T>(s.rho * y(0), s.rho * y(1), lam * y(2));

  T t = sqrt(y(0) * y(0) + y(1) * y(1));
  T sr = t / r;
  if (sv >= 0.8) {
    V3<T> g = wedge_map(s, y);
    T e = eta(T(5.0 * sr - 4.0));
    return V3<T>(g(0), g(1), lam * y(2) + e * (g(2) - lam * y(2)));
  }
  // direction of the image of the circle of radius 3r/5 along this ray
  T k = 0.6 * r / t;
  V3<T> q = wedge_map(s, V3<T>(k * y(0), k * y(1), y(2)));
  T qn = sqrt(q(0) * q(0) + q(1) * q(1));
  if (sv >= 0.6) {
    V3<T> g = wedge_map(s, y);
    T e = eta(T(5.0 * sr - 3.0));
    T c = (1.0 - e) * t * s.rho / qn;
    return V3<T>(e * g(0) + c * q(0), e * g(1) + c * q(1), lam * y(2));
  }
  T theta = atan2(y(1), y(0));
  T arg_u = atan2(q(1), q(0));
  double dref = delta_ref(s, val(theta));
  double turns = std::round((val(arg_u) - val(theta) - dref) / (2 * kPi));
  T delta = arg_u - theta - 2 * kPi * turns;
  T alpha = theta + time_profile(T(5.0 * sr - 2.0)) * delta;
  T rad = t * s.rho;
  return V3<T>(rad * cos(alpha), rad * sin(alpha), lam * y(2));
}

template V3<double> wedge_map(const EdgeSmoother&, const V3<double>&);
template V3<Jet> wedge_map(const EdgeSmoother&, const V3<Jet>&);
template V3<double> seglem_extend(const EdgeSmoother&, const V3<double>&);
template V3<Jet> seglem_extend(const EdgeSmoother&, const V3<Jet>&);

// ---------------------------------------------------------------------------

CircleIsotopy CircleIsotopy::from_lift(Lift lift) {
  CircleIsotopy c;
  c.lift_ = std::move(lift);
  c.validate();
  return c;
}

CircleIsotopy CircleIsotopy::from_samples(const std::vector<double>& samples) {
  const int n = int(samples.size());
  if (n < 4) throw ValidationError("too few lift samples");
  for (int k = 1; k < n; ++k)
    if (!(samples[k] > samples[k - 1])) throw ValidationError("nonmonotone lift samples");
  std::vector<double> d(n);
  for (int k = 0; k < n; ++k) d[k] = samples[k] - 2 * kPi * k / n;
  const int half = n / 2;
  std::vector<double> a(half + 1, 0.0), b(half + 1, 0.0);
  for (int j = 0; j <= half; ++j) {
    for (int k = 0; k < n; ++k) {
      double ang = 2 * kPi * double(j) * k / n;
      a[j] += d[k] * std::cos(ang);
      b[j] += d[k] * std::sin(ang);
    }
    double scale = (j == 0 || (n % 2 == 0 && j == half)) ? 1.0 / n : 2.0 / n;
    a[j] *= scale;
    b[j] *= scale;
  }
  if (n % 2 == 0) b[half] = 0;
  return from_lift([a, b](const Jet& th) {
    Jet c1 = cos(th), s1 = sin(th);
    Jet cj(1.0), sj(0.0);
    Jet out = th + a[0];
    for (size_t j = 1; j < a.size(); ++j) {
      Jet cn = cj * c1 - sj * s1;
      sj = sj * c1 + cj * s1;
      cj = cn;
      out += a[j] * cj + b[j] * sj;
    }
    return out;
  });
}

void CircleIsotopy::validate() const {
  for (int k = 0; k < 2048; ++k) {
    double th = 2 * kPi * k / 2048;
    if (!(lift_prime(th) > 0)) throw ValidationError("nonmonotone lift");
  }
  for (double th : {0.0, 1.0, 2.5, -2.0}) {
    if (std::abs(lift(th + 2 * kPi) - lift(th) - 2 * kPi) > 1e-9)
      throw ValidationError("lift is not of degree one");
  }
}

Jet CircleIsotopy::angle(const Jet& theta, const Jet& t) const {
  Jet s = time_profile(t);
  return theta + s * (lift_(theta) - theta);
}

double CircleIsotopy::angle(double theta, double t) const {
  return angle(Jet(theta), Jet(t)).a;
}

double CircleIsotopy::lift(double theta) const { return lift_(Jet(theta)).a; }
double CircleIsotopy::lift_prime(double theta) const { return lift_(Jet(theta, 0)).v(0); }

CircleIsotopy::Bounds CircleIsotopy::bounds(int n_theta, int n_t) const {
  Bounds b;
  b.min_lift_prime = b.min_dtheta = 1e300;
  for (int k = 0; k < n_theta; ++k) {
    double th = 2 * kPi * k / n_theta;
    Jet h = lift_(Jet(th, 0));
    b.min_lift_prime = std::min(b.min_lift_prime, h.v(0));
    b.max_lift_prime = std::max(b.max_lift_prime, h.v(0));
    for (int i = 0; i < n_t; ++i) {
      double t = double(i) / (n_t - 1);
      double s = time_profile(t);
      double dth = (1 - s) + s * h.v(0);
      double dt = time_profile_prime(t) * (h.a - th);
      b.min_dtheta = std::min(b.min_dtheta, dth);
      b.max_dtheta = std::max(b.max_dtheta, dth);
      b.max_dt = std::max(b.max_dt, std::abs(dt));
    }
  }
  return b;
}

CircleIsotopy edge_isotopy(const EdgeSmoother& s, double x3) {
  if (s.fan.trivial) return CircleIsotopy::from_lift([](const Jet& th) { return th; });
  auto shared = std::make_shared<EdgeSmoother>(s);
  return CircleIsotopy::from_lift([shared, x3](const Jet& th) {
    const EdgeSmoother& e = *shared;
    Jet r = Jet(0.6 * e.radius(x3));
    V3<Jet> q = wedge_map(e, on_circle(r, th, Jet(x3)));
    Jet arg = atan2(q(1), q(0));
    double dref = delta_ref(e, wrap_angle(th.a));
    double turns = std::round((arg.a - th.a - dref) / (2 * kPi));
    return arg - 2 * kPi * turns;
  });
}

EdgeCertificate certify_edge(const EdgeSmoother& s, int n_t, int n_theta, int n_z, double z0,
                             double z1) {
  EdgeCertificate c;
  c.min_det = 1e300;
  for (int l = 0; l < n_z; ++l) {
    double z = z0 + (z1 - z0) * (l + 0.5) / n_z;
    double r = s.radius(z);
    for (int i = 0; i < n_t; ++i) {
      double t = r * (i + 1.0) / n_t;
      for (int j = 0; j < n_theta; ++j) {
        double th = -kPi + 2 * kPi * (j + 0.5) / n_theta;
        Vec3 y(t * std::cos(th), t * std::sin(th), z);
        Mat3 D = jacobian_of(seglem_extend(s, seed(y)));
        double d = D.determinant();
        if (d < c.min_det) {
          c.min_det = d;
          c.worst = y;
        }
        c.max_norm = std::max(c.max_norm, D.norm());
      }
    }
  }
  c.ok = c.min_det > 0;
  return c;
}

VariableRadiusReport certify_variable_radius(const EdgeSmoother& s, double constant_floor, int n) {
  VariableRadiusReport rep;
  rep.slope_bound = s.radius.slope_bound();
  rep.required_floor = 0.5 * constant_floor;
  double z0 = s.radius.start - s.radius.length, z1 = s.radius.start + 2 * s.radius.length;
  auto c = certify_edge(s, n, n, n, z0, z1);
  rep.min_det = c.min_det;
  rep.ok = c.min_det >= rep.required_floor;
  return rep;
}

}  // namespace plsmooth
