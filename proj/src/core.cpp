#include "plsmooth/core.hpp"

namespace plsmooth {

Mat3 frame_with_first_axis(const Vec3& n_in) {
  Vec3 n = n_in.normalized();
  Vec3 helper = std::abs(n(0)) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  if (std::abs(n(0) - 1.0) < 1e-15) return Mat3::Identity();
  Vec3 u = (helper - helper.dot(n) * n).normalized();
  Vec3 v = n.cross(u);
  Mat3 R;
  R.row(0) = n.transpose();
  R.row(1) = u.transpose();
  R.row(2) = v.transpose();
  return R;
}

Mat3 frame_with_third_axis(const Vec3& n_in) {
  Mat3 F = frame_with_first_axis(n_in);
  Mat3 R;
  R.row(0) = F.row(1);
  R.row(1) = F.row(2);
  R.row(2) = F.row(0);
  return R;
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

}  // namespace plsmooth
