#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <ceres/jet.h>

namespace plsmooth {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

// Forward-mode jet carrying the gradient with respect to the three spatial
// inputs. Every patch evaluator is templated on double / Jet so that the
// same code path yields the value and its exact Jacobian.
using Jet = ceres::Jet<double, 3>;

template <class T>
using V3 = Eigen::Matrix<T, 3, 1>;

inline double val(double x) { return x; }
inline double val(const Jet& x) { return x.a; }

inline V3<Jet> seed(const Vec3& x) {
  V3<Jet> out;
  for (int i = 0; i < 3; ++i) out(i) = Jet(x(i), i);
  return out;
}

inline Vec3 value_of(const V3<Jet>& y) { return {y(0).a, y(1).a, y(2).a}; }
inline Vec3 value_of(const Vec3& y) { return y; }

// Row i holds the gradient of component i.
inline Mat3 jacobian_of(const V3<Jet>& y) {
  Mat3 J;
  for (int i = 0; i < 3; ++i) J.row(i) = y(i).v.transpose();
  return J;
}

template <class T>
V3<T> lift(const Vec3& v) {
  return v.cast<T>();
}

template <class T>
V3<T> mul(const Mat3& M, const V3<T>& x) {
  V3<T> out;
  for (int i = 0; i < 3; ++i) out(i) = M(i, 0) * x(0) + M(i, 1) * x(1) + M(i, 2) * x(2);
  return out;
}

template <class T>
T dot3(const V3<T>& a, const V3<T>& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

template <class T>
T norm3(const V3<T>& a) {
  using std::sqrt;
  return sqrt(dot3(a, a));
}

/// Affine map x -> matrix * x + offset.
struct Affine {
  Mat3 matrix = Mat3::Identity();
  Vec3 offset = Vec3::Zero();

  template <class T>
  V3<T> operator()(const V3<T>& x) const {
    return mul(matrix, x) + lift<T>(offset);
  }
  Affine inverse() const {
    Mat3 inv = matrix.inverse();
    return {inv, -inv * offset};
  }
  Affine compose(const Affine& inner) const {  // this o inner
    return {matrix * inner.matrix, matrix * inner.offset + offset};
  }
  double det() const { return matrix.determinant(); }
};

/// Rigid motion: local = rotation * (world - origin).
struct Frame {
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();

  template <class T>
  V3<T> to_local(const V3<T>& x) const {
    return mul(rotation, V3<T>(x - lift<T>(origin)));
  }
  template <class T>
  V3<T> to_world(const V3<T>& y) const {
    return mul(Mat3(rotation.transpose()), y) + lift<T>(origin);
  }
};

// Orthonormal, positively oriented basis whose first row is `n`. For n = e1
// the result is the identity.
Mat3 frame_with_first_axis(const Vec3& n);
// Same, with the third row along `n`.
Mat3 frame_with_third_axis(const Vec3& n);

double wrap_angle(double a);  // to (-pi, pi]

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class DomainError : public Error {
 public:
  using Error::Error;
};
class CertificationError : public Error {
 public:
  using Error::Error;
};
class NumericalError : public Error {
 public:
  using Error::Error;
};
class NoIsotopyFound : public Error {
 public:
  using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace plsmooth
