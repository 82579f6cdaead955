#pragma once

#include <array>
#include <string>
#include <vector>

#include "plsmooth/geometry.hpp"
#include "plsmooth/pipeline.hpp"

namespace plsmooth {

/// Symmetric rules with positive weights summing to one (barycentric nodes).
struct SimplexRule {
  std::vector<std::array<double, 4>> nodes;  // unused trailing coordinates are zero
  std::vector<double> weights;
  int degree = 0;
};
const SimplexRule& tet_rule();       // 14 points, degree 5
const SimplexRule& triangle_rule();  // 7 points, degree 5

struct QuadNode {
  Vec3 x;
  double weight;
};
// Nodes of the rule mapped onto the tetrahedron; weights sum to its volume.
std::vector<QuadNode> tet_nodes(const Tet& t);

struct WeightedValue {
  double value = 0;
  double weight = 0;
};

/// Non-increasing rearrangement of |f| from weighted samples: a step
/// function with values_[k] on [ends_[k-1], ends_[k]).
class Rearrangement {
 public:
  explicit Rearrangement(std::vector<WeightedValue> samples);

  double operator()(double s) const;  // f*(s)
  double maximal(double s) const;     // f**(s), the average of f* over [0, s]
  double measure() const { return ends_.empty() ? 0.0 : ends_.back(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& ends() const { return ends_; }

 private:
  std::vector<double> values_;
  std::vector<double> ends_;
};

/// Rearrangement-invariant norms: L^p, Lorentz L^{p,q} with
/// ||f|| = (int_0^inf (t^{1/p} f*(t))^q dt / t)^{1/q}, and L^inf.
struct RINorm {
  enum class Kind { Lp, Lorentz, Linf };
  Kind kind = Kind::Lp;
  double p = 2;
  double q = 2;

  static RINorm lp(double p);
  static RINorm lorentz(double p, double q);
  static RINorm linf();
  // "lp:2", "lorentz:2:1", "linf"
  static RINorm parse(const std::string& spec);
  std::string name() const;

  double operator()(const Rearrangement& r) const;
  double operator()(const std::vector<WeightedValue>& samples) const;
  // norm of the indicator of a set of measure s
  double fundamental(double s) const;
};

// sum |v|^p w in input order, for cross-checks
double direct_lp(const std::vector<WeightedValue>& samples, double p);

struct RozumnyRow {
  double delta = 0;       // |G| / |E|
  double norm = 0;        // ||M chi_G||
  double normalized = 0;  // norm / |E|
  double oracle = 0;      // M phi(delta |E|)
};
struct RozumnyTable {
  std::vector<RozumnyRow> rows;
  bool monotone = false;  // strictly decreasing towards zero
};
// Bounded functions with small L^1 norm have small X norm: the extremal
// family u = M chi_G with |G| = delta |E|, tabulated over the deltas given in
// decreasing order.
RozumnyTable rozumny_check(const RINorm& norm, double M, double measure, const std::vector<double>& deltas);

/// Quadrature over the set where g may differ from f, split by owner.
struct RegionNode {
  Vec3 x;
  double weight = 0;
  Patch kind = Patch::Bulk;
  int id = -1;
  int cell = -1;
};

struct RegionQuadrature {
  double lambda = 1;
  std::vector<RegionNode> nodes;
  double volume = 0;  // balls + tubes + slabs, from the exact geometry
  double ball_volume = 0;
  double tube_volume = 0;
  double slab_volume = 0;
  int owner_mismatch = 0;  // nodes not owned by the patch that placed them
  size_t ball_nodes = 0;   // the ball nodes come first
};

struct RegionOptions {
  double p = 2;             // exponent steering the refinement
  double tolerance = 1e-3;  // relative, per patch
  int ball_refinements = 200;  // budget per ball
  int tube_refinements = 100;  // per tube
};

// Ball nodes and tube cross-sections refined on the unit-scale map. Both
// patches are exact dilations of their unit-scale versions, so the nodes
// carry over to every lambda by rescaling.
struct RegionTemplate {
  RegionOptions opt;
  std::vector<RegionNode> balls;
  std::vector<std::vector<RegionNode>> tube_sections;  // x = (t, theta, 0), weight dt dtheta t
};
RegionTemplate region_template(const SmoothedMap& g, const RegionOptions& opt = {});

// Nodes for g.lambda(); slabs are laid out directly at that scale.
RegionQuadrature difference_set_quadrature(const SmoothedMap& g, const RegionTemplate& tmpl);
RegionQuadrature difference_set_quadrature(const SmoothedMap& g, const RegionOptions& opt = {});

// Everything the sweep needs at one point, from a single derivative pass
// (working coordinates; matrix norms are Frobenius).
struct NodeSample {
  double gap = 0;         // |g - f|
  double ddiff = 0;       // |Dg - Df|
  double det = 0;         // det Dg
  double norm_dg = 0;     // |Dg|
  double norm_dginv = 0;  // |Dg^-1|
  double inv_gap = 0;     // |x - f^-1(g(x))|, the inverse error at y = g(x)
  double inv_ddiff = 0;   // |Dg^-1 - Df^-1| at y = g(x)
};
NodeSample sample_node(const SmoothedMap& g, const Vec3& x, int cell = -1);

// ||Dg - Df||_{L^p} over the difference set (zero elsewhere).
double w1p_difference(const SmoothedMap& g, double p, const RegionQuadrature& quad);
// sup |g - f| over the difference set with local refinement around the max.
double linf_difference(const SmoothedMap& g, const RegionQuadrature& quad);
// Pattern search for a larger |g - f| starting at x with the given step.
double local_max_gap(const SmoothedMap& g, const Vec3& x, double step);

// Intersection area of a disk with a convex polygon in the plane.
double disk_polygon_area(const Vec2& center, double radius, const std::vector<Vec2>& polygon);

}  // namespace plsmooth
