#pragma once

#include <limits>

#include "plsmooth/core.hpp"
#include "plsmooth/mesh.hpp"

namespace plsmooth {

// Smooth step: 0 for t <= 0, 1 for t >= 1, eta(t) = psi(t) / (psi(t) + psi(1 - t))
// with psi(t) = exp(-1/t) in between.
template <class T>
T eta(const T& t) {
  using std::exp;
  const double tv = val(t);
  if (tv <= 0) return T(0.0);
  if (tv >= 1) return T(1.0);
  T u = 1.0 / t - 1.0 / (1.0 - t);
  if (val(u) > 700) return T(0.0);
  if (val(u) < -700) return T(1.0);
  return 1.0 / (1.0 + exp(u));
}

double eta_prime(double t);
double eta_second(double t);

// Time reparametrization used by the isotopies: constant near both ends.
template <class T>
T time_profile(const T& t) {
  return eta(T(3.0 * t - 1.0));
}
double time_profile_prime(double t);

struct ProfileConstants {
  double sup_eta_prime = 0;     // sup eta'
  double argmax_eta_prime = 0;
  double sup_t_eta_prime = 0;   // sup t eta'(t)
  double sup_t2_eta_prime = 0;  // sup t^2 eta'(t)
};
// Computed once by a dense grid followed by golden-section refinement.
const ProfileConstants& profile_constants();

/// Smooth positive width w(y2, y3) over the face plane: either a constant or a
/// ramp w0 + (w1 - w0) eta((<(y2, y3), dir> - start) / length).
struct WidthField {
  double w0 = 1.0;
  double w1 = 1.0;
  Vec2 dir = Vec2(1, 0);
  double start = 0.0;
  double length = 1.0;

  static WidthField constant(double w);
  static WidthField ramp(double w0, double w1, const Vec2& dir, double start, double length);

  bool is_constant() const { return w0 == w1; }
  template <class T>
  T operator()(const T& y2, const T& y3) const {
    if (is_constant()) return T(w0);
    T s = (dir(0) * y2 + dir(1) * y3 - start) / length;
    return w0 + (w1 - w0) * eta(s);
  }
  Vec2 gradient(double y2, double y3) const;
  double gradient_bound() const;  // sup |grad w|
  double min() const { return std::min(w0, w1); }
  double max() const { return std::max(w0, w1); }
  WidthField scaled(double s) const;
};

/// Two affine pieces agreeing on a plane, expressed in the plane's frame:
/// local y = frame.to_local(x), the plane is {y1 = 0} and `left` lives on y1 <= 0.
struct FacePair {
  int face = -1;
  Affine left;   // world pieces
  Affine right;
  Frame frame;
  Affine left_local;  // y -> left(frame.to_world(y))
  Affine right_local;
  double left_stretch = 0;   // normal stretch in the image frame
  double right_stretch = 0;
  double in_plane_jacobian = 0;
  bool trivial = false;
};

FacePair make_face_pair(const Affine& left, const Affine& right, const Frame& frame, int face = -1);
FacePair face_pair_from(const PLMap& f, const FaceIncidence& inc);

struct SigmaCertificate {
  double sigma = std::numeric_limits<double>::infinity();
  double floor = 0;
  double sigma_empirical = std::numeric_limits<double>::infinity();
};

// The empirical value (bisection on sampled Jacobians) is a diagnostic and
// costs far more than the closed form; skip it with empirical = false.
SigmaCertificate sigma_for_face(const FacePair& pair, bool empirical = true);

struct FaceBlend {
  FacePair pair;
  WidthField width;
  SigmaCertificate cert;
};

// Throws CertificationError when the width gradient exceeds the certified sigma.
FaceBlend make_face_blend(const FacePair& pair, const WidthField& width, bool empirical = false);

// Blend evaluated at local point y; the result is in image (world) coordinates.
template <class T>
V3<T> face_blend(const FaceBlend& b, const V3<T>& y) {
  T w = b.width(y(1), y(2));
  if (!(val(w) > 0)) throw DomainError("blend width must be positive");
  if (val(y(0)) <= 0) return b.pair.left_local(y);
  if (val(y(0)) >= val(w)) return b.pair.right_local(y);
  T e = eta(T(y(0) / w));
  return (1.0 - e) * b.pair.left_local(y) + e * b.pair.right_local(y);
}

// Closed-form derivative with respect to the local coordinates.
Mat3 face_blend_jacobian(const FaceBlend& b, const Vec3& y);

// Same blend, taking and returning world coordinates on the domain side.
// Outside the strip this is literally the affine piece applied to x.
template <class T>
V3<T> face_blend_world(const FaceBlend& b, const V3<T>& x) {
  V3<T> y = b.pair.frame.to_local(x);
  T w = b.width(y(1), y(2));
  if (!(val(w) > 0)) throw DomainError("blend width must be positive");
  if (val(y(0)) <= 0) return b.pair.left(x);
  if (val(y(0)) >= val(w)) return b.pair.right(x);
  T e = eta(T(y(0) / w));
  return (1.0 - e) * b.pair.left(x) + e * b.pair.right(x);
}

}  // namespace plsmooth
