#pragma once

#include <functional>
#include <vector>

#include "plsmooth/blend.hpp"
#include "plsmooth/mesh.hpp"

namespace plsmooth {

/// Local picture around an edge. Domain local coordinates put the edge on the
/// x3-axis starting at the origin; image local coordinates send the edge image
/// to the x3-axis with D3 f = (0, 0, stretch). Pieces are linear in these
/// coordinates; pieces[i] fills the sector from angles[i] to angles[i+1].
struct EdgeFan {
  int edge = -1;
  std::vector<double> angles;  // sorted, in [-pi, pi)
  std::vector<Mat3> pieces;
  double stretch = 1.0;
  double length = 0.0;
  Frame frame;        // domain world -> local
  Frame image_frame;  // image world -> local
  bool trivial = false;
};

EdgeFan make_edge_fan(std::vector<double> angles, std::vector<Mat3> pieces);
EdgeFan edge_fan_from(const PLMap& f, const EdgeIncidence& inc);

/// Tube radius, constant or a ramp r0 + (r1 - r0) eta((x3 - start) / length).
struct RadiusField {
  double r0 = 1.0;
  double r1 = 1.0;
  double start = 0.0;
  double length = 1.0;

  static RadiusField constant(double r);
  static RadiusField ramp(double r0, double r1, double start, double length);
  bool is_constant() const { return r0 == r1; }
  template <class T>
  T operator()(const T& x3) const {
    if (is_constant()) return T(r0);
    return r0 + (r1 - r0) * eta(T((x3 - start) / length));
  }
  double slope_bound() const;  // sup |r'|
  double min() const { return std::min(r0, r1); }
};

/// Positive-Jacobian smoothing of an edge neighbourhood.
struct EdgeSmoother {
  EdgeFan fan;
  std::vector<FaceBlend> blends;  // blends[i] acts across angles[i]
  RadiusField radius;
  double rho = 0.0;  // squeeze ratio: the inner map is rho * (x1, x2) + stretch * x3 e3
  std::vector<double> delta_grid;  // unwrapped twist angle samples on [-pi, pi)
};

// Checks the slab-separation condition, picks rho and tabulates the twist.
// Throws CertificationError on a slab overlap or a collapsed squeeze radius.
// The slab across angles[i] lies on the side of the larger determinant unless
// slab_on_next is given (true: inside pieces[i]).
EdgeSmoother make_edge_smoother(const EdgeFan& fan, const std::vector<WidthField>& widths,
                                const RadiusField& radius, const std::vector<bool>& slab_on_next = {});

// The sector-wise assembled face blends (valid away from the axis).
template <class T>
V3<T> wedge_map(const EdgeSmoother& s, const V3<T>& y);

// Full smoothing: wedge map outside the tube, flatten / squeeze / untwist
// annuli inside, and the linear map rho (x1, x2) + stretch x3 e3 near the axis.
template <class T>
V3<T> seglem_extend(const EdgeSmoother& s, const V3<T>& y);

/// Isotopy from the identity of the circle to h, through lifts
/// alpha(theta, t) = theta + s(t) (H(theta) - theta).
class CircleIsotopy {
 public:
  using Lift = std::function<Jet(const Jet&)>;

  static CircleIsotopy from_lift(Lift lift);
  // N samples of H on the uniform grid theta_k = 2 pi k / N, interpolated
  // by a trigonometric polynomial in H(theta) - theta.
  static CircleIsotopy from_samples(const std::vector<double>& samples);

  // Derivative slots: theta seeds slot 0, t seeds slot 1.
  Jet angle(const Jet& theta, const Jet& t) const;
  double angle(double theta, double t) const;
  double lift(double theta) const;
  double lift_prime(double theta) const;

  struct Bounds {
    double min_lift_prime = 0;  // inf H'
    double max_lift_prime = 0;  // sup H'
    double min_dtheta = 0;      // inf d alpha / d theta over (theta, t)
    double max_dtheta = 0;
    double max_dt = 0;          // sup |d alpha / d t|
  };
  Bounds bounds(int n_theta = 1024, int n_t = 65) const;

 private:
  Lift lift_;
  void validate() const;
};

CircleIsotopy edge_isotopy(const EdgeSmoother& s, double x3);

struct EdgeCertificate {
  double min_det = 0;
  double max_norm = 0;
  Vec3 worst = Vec3::Zero();
  bool ok = false;
};

// Jacobian sampling on a cylindrical grid t in (0, r], theta, x3 in [z0, z1].
EdgeCertificate certify_edge(const EdgeSmoother& s, int n_t, int n_theta, int n_z, double z0,
                             double z1);

struct VariableRadiusReport {
  double slope_bound = 0;
  double min_det = 0;
  double required_floor = 0;
  bool ok = false;
};

// Accepts a variable-radius smoother when its sampled Jacobian floor stays
// above half of the constant-radius floor.
VariableRadiusReport certify_variable_radius(const EdgeSmoother& s, double constant_floor,
                                             int n = 32);

}  // namespace plsmooth
