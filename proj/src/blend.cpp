#include "plsmooth/blend.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace plsmooth {

namespace {

double eta_value(double t) { return eta(t); }

// u(t) = 1/t - 1/(1-t) and its derivatives; eta = 1 / (1 + e^u).
double du(double t) { return -1.0 / (t * t) - 1.0 / ((1 - t) * (1 - t)); }
double ddu(double t) { return 2.0 / (t * t * t) - 2.0 / ((1 - t) * (1 - t) * (1 - t)); }

double golden_max(const std::function<double(double)>& fn, double a, double b, double* argmax) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = fn(d);
    }
  }
  double x = 0.5 * (a + b);
  if (argmax) *argmax = x;
  return fn(x);
}

double grid_then_golden(const std::function<double(double)>& fn, double* argmax) {
  const int n = 20000;
  int best = 1;
  double bv = -1;
  for (int i = 1; i < n; ++i) {
    double v = fn(double(i) / n);
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  return golden_max(fn, double(best - 1) / n, double(best + 1) / n, argmax);
}

}  // namespace

double eta_prime(double t) {
  if (t <= 0 || t >= 1) return 0.0;
  double s = eta_value(t);
  return -s * (1 - s) * du(t);
}

double eta_second(double t) {
  if (t <= 0 || t >= 1) return 0.0;
  double s = eta_value(t);
  return -eta_prime(t) * (1 - 2 * s) * du(t) - s * (1 - s) * ddu(t);
}

double time_profile_prime(double t) { return 3.0 * eta_prime(3.0 * t - 1.0); }

const ProfileConstants& profile_constants() {
  static const ProfileConstants c = [] {
    ProfileConstants p;
    p.sup_eta_prime = grid_then_golden(eta_prime, &p.argmax_eta_prime);
    p.sup_t_eta_prime = grid_then_golden([](double t) { return t * eta_prime(t); }, nullptr);
    p.sup_t2_eta_prime = grid_then_golden([](double t) { return t * t * eta_prime(t); }, nullptr);
    if (p.sup_eta_prime > 2.0 + 1e-12) throw ValidationError("blend profile violates eta' <= 2");
    return p;
  }();
  return c;
}

WidthField WidthField::constant(double w) {
  if (!(w > 0)) throw DomainError("width must be positive");
  WidthField f;
  f.w0 = f.w1 = w;
  return f;
}

WidthField WidthField::ramp(double w0, double w1, const Vec2& dir, double start, double length) {
  if (!(w0 > 0) || !(w1 > 0) || !(length > 0)) throw DomainError("invalid width ramp");
  WidthField f;
  f.w0 = w0;
  f.w1 = w1;
  f.dir = dir.normalized();
  f.start = start;
  f.length = length;
  return f;
}

Vec2 WidthField::gradient(double y2, double y3) const {
  if (is_constant()) return Vec2::Zero();
  double s = (dir(0) * y2 + dir(1) * y3 - start) / length;
  return (w1 - w0) * eta_prime(s) / length * dir;
}

double WidthField::gradient_bound() const {
  if (is_constant()) return 0.0;
  return std::abs(w1 - w0) * profile_constants().sup_eta_prime / length;
}

WidthField WidthField::scaled(double s) const {
  WidthField f = *this;
  f.w0 *= s;
  f.w1 *= s;
  f.start *= s;
  f.length *= s;
  return f;
}

FacePair make_face_pair(const Affine& left, const Affine& right, const Frame& frame, int face) {
  FacePair p;
  p.face = face;
  p.left = left;
  p.right = right;
  p.frame = frame;
  const Mat3& R = frame.rotation;
  Affine to_world{R.transpose(), frame.origin};
  p.left_local = left.compose(to_world);
  p.right_local = right.compose(to_world);

  double scale = std::max(1.0, frame.origin.norm());
  double mag = 1.0 + left.matrix.norm() + right.matrix.norm();
  for (int k = 0; k < 3; ++k) {
    Vec3 x = frame.origin + (k ? Vec3(R.row(k).transpose()) : Vec3::Zero());
    if ((left(V3<double>(x)) - right(V3<double>(x))).norm() > 1e-10 * mag * scale)
      throw ValidationError("pieces do not agree on the face plane");
  }
  Vec3 t1 = R.row(1).transpose(), t2 = R.row(2).transpose();
  Vec3 c = (left.matrix * t1).cross(left.matrix * t2);
  p.in_plane_jacobian = c.norm();
  if (!(p.in_plane_jacobian > 1e-14 * left.matrix.squaredNorm()))
    throw ValidationError("degenerate face pair: image face has zero area");
  p.left_stretch = left.det() / p.in_plane_jacobian;
  p.right_stretch = right.det() / p.in_plane_jacobian;
  p.trivial = pieces_agree(left, right, scale);
  return p;
}

FacePair face_pair_from(const PLMap& f, const FaceIncidence& inc) {
  if (inc.out_cell < 0) throw ValidationError("face has a single cell");
  return make_face_pair(f.pieces[inc.in_cell], f.pieces[inc.out_cell], inc.frame, inc.face);
}

namespace {

struct StripGeometry {
  Vec3 ml_n, d, b2, b3;
  double a1j2;
};

StripGeometry strip_geometry(const FacePair& p) {
  const Mat3& R = p.frame.rotation;
  Vec3 n = R.row(0).transpose();
  StripGeometry g;
  g.ml_n = p.left.matrix * n;
  g.d = (p.right.matrix - p.left.matrix) * n;
  g.b2 = p.left.matrix * R.row(1).transpose();
  g.b3 = p.left.matrix * R.row(2).transpose();
  g.a1j2 = p.left_stretch * p.in_plane_jacobian;
  return g;
}

// Jacobian determinant inside the strip at y1 = tau w with width gradient (g2, g3).
double strip_det(const StripGeometry& g, double tau, double e, double ep, double g2, double g3) {
  Mat3 D;
  D.col(0) = g.ml_n + (e + tau * ep) * g.d;
  D.col(1) = g.b2 - ep * tau * tau * g2 * g.d;
  D.col(2) = g.b3 - ep * tau * tau * g3 * g.d;
  return D.determinant();
}

double sampled_min_det(const StripGeometry& g, double grad) {
  const int nt = 400, na = 64;
  double m = 1e300;
  for (int i = 1; i < nt; ++i) {
    double tau = double(i) / nt;
    double e = eta(tau), ep = eta_prime(tau);
    for (int k = 0; k < na; ++k) {
      double a = 2 * kPi * k / na;
      m = std::min(m, strip_det(g, tau, e, ep, grad * std::cos(a), grad * std::sin(a)));
    }
  }
  return m;
}

}  // namespace

SigmaCertificate sigma_for_face(const FacePair& p, bool empirical) {
  if (!(p.in_plane_jacobian > 0)) throw ValidationError("degenerate face pair");
  if (!(p.left_stretch > 0)) throw ValidationError("face pair is not sense preserving");
  if (p.right_stretch < p.left_stretch * (1 - 1e-12))
    throw ValidationError("face pair is not normalized: the right piece must stretch more");
  SigmaCertificate c;
  StripGeometry g = strip_geometry(p);
  c.floor = 0.5 * g.a1j2;
  if (p.trivial || g.d.norm() == 0) return c;

  const auto& k = profile_constants();
  double k1 = std::max(g.ml_n.norm(), (g.ml_n + g.d).norm()) + k.sup_t_eta_prime * g.d.norm();
  double bnorm = std::sqrt(g.b2.squaredNorm() + g.b3.squaredNorm());
  c.sigma = (g.a1j2 - c.floor) / (k1 * k.sup_t2_eta_prime * g.d.norm() * bnorm);

  if (!empirical) return c;
  double lo = 0, hi = c.sigma;
  while (sampled_min_det(g, hi) >= c.floor) {
    lo = hi;
    hi *= 2;
    if (hi > 1e12 * c.sigma) return c;  // never fails: keep infinity
  }
  for (int i = 0; i < 40; ++i) {
    double mid = 0.5 * (lo + hi);
    (sampled_min_det(g, mid) >= c.floor ? lo : hi) = mid;
  }
  c.sigma_empirical = lo;
  return c;
}

FaceBlend make_face_blend(const FacePair& pair, const WidthField& width, bool empirical) {
  FaceBlend b;
  b.pair = pair;
  b.width = width;
  b.cert = sigma_for_face(pair, empirical);
  if (width.gradient_bound() > b.cert.sigma)
    throw CertificationError("width gradient exceeds the certified sigma");
  return b;
}

Mat3 face_blend_jacobian(const FaceBlend& b, const Vec3& y) {
  double w = b.width(y(1), y(2));
  if (!(w > 0)) throw DomainError("blend width must be positive");
  const Mat3& ml = b.pair.left_local.matrix;
  const Mat3& mr = b.pair.right_local.matrix;
  if (y(0) <= 0) return ml;
  if (y(0) >= w) return mr;
  double tau = y(0) / w;
  double e = eta(tau), ep = eta_prime(tau);
  Vec2 gw = b.width.gradient(y(1), y(2));
  Vec3 grad_tau(1.0 / w, -tau * gw(0) / w, -tau * gw(1) / w);
  Vec3 diff = b.pair.right_local(V3<double>(y)) - b.pair.left_local(V3<double>(y));
  return (1 - e) * ml + e * mr + ep * diff * grad_tau.transpose();
}

}  // namespace plsmooth
