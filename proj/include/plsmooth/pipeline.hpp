#pragma once

#include <memory>
#include <string>
#include <vector>

#include "plsmooth/blend.hpp"
#include "plsmooth/edge.hpp"
#include "plsmooth/mesh.hpp"
#include "plsmooth/vertex.hpp"

namespace plsmooth {

/// Sizes of the smoothing patches. Zero marks a simplex that keeps f.
struct SmoothingParams {
  std::vector<double> vertex_radius;  // per vertex
  std::vector<double> edge_radius;    // per edge
  std::vector<double> face_width;     // per face
  double lambda = 1.0;
  std::vector<std::string> log;

  int smoothed_vertices() const;
  int smoothed_edges() const;
  int smoothed_faces() const;
};

struct ParamOptions {
  int delta_samples = 20000;
  int max_halvings = 12;
  double rho_fraction = 0.9;  // vertex inner ratio relative to the minimal stretch
  double radius_fraction = 0.25;  // ball radius over the distance to non-incident simplices
};

// Radii and widths at lambda = 1. Throws CertificationError naming the
// offending simplex, ValidationError for an invalid map.
SmoothingParams choose_params(const PLMap& f, const ParamOptions& opt = {});

enum class Patch { Bulk, Face, Edge, Vertex };
const char* patch_name(Patch p);

struct Owner {
  Patch kind = Patch::Bulk;
  int id = -1;    // vertex, edge or face id
  int cell = -1;  // cell containing the point
};

struct FacePatch {
  int face = -1;
  int in_cell = -1;
  int out_cell = -1;
  double width = 0;
  FaceBlend blend;
};

struct EdgePatch {
  int edge = -1;
  int a = -1;
  int b = -1;
  double radius = 0;
  double length = 0;
  EdgeSmoother smoother;
};

struct VertexPatch {
  int vertex = -1;
  Vec3 center;
  Vec3 image;
  double radius = 0;  // at lambda = 1
  VertexSmoother smoother;
};

/// The smoothed map g_lambda. Coordinates are those of the input map; when
/// the input was orientation reversing the construction runs on the
/// reflected domain and every call converts.
class SmoothedMap {
 public:
  SmoothedMap(const PLMap& f, const SmoothingParams& params, const ParamOptions& opt = {});
  // Same construction at another scale; vertex smoothers are shared.
  SmoothedMap scaled(double lambda) const;

  Vec3 operator()(const Vec3& x) const;
  Mat3 derivative(const Vec3& x) const;
  // Newton on g seeded from the piecewise linear inverse.
  Vec3 inverse(const Vec3& y) const;

  double lambda() const;
  const SmoothingParams& params() const;
  const PLMap& input() const;

  // Everything below works on the sense-preserving (possibly reflected) map.
  const PLMap& working() const;
  template <class T>
  V3<T> eval(const V3<T>& x) const;
  Mat3 jacobian(const Vec3& x) const;
  Owner owner(const Vec3& x) const;
  Vec3 pl_inverse(const Vec3& y, int* cell = nullptr) const;
  Vec3 working_inverse(const Vec3& y) const;

  const std::vector<FacePatch>& faces() const;
  const std::vector<EdgePatch>& edges() const;
  const std::vector<VertexPatch>& vertices() const;

  struct Base;
  struct Level;

 private:
  SmoothedMap() = default;
  std::shared_ptr<const Base> base_;
  std::shared_ptr<const Level> level_;
};

// The vertex-local outer map around a smoothed vertex at lambda = 1.
HatMap vertex_hat(const SmoothedMap& g, int vertex);

struct InterfaceReport {
  int samples = 0;
  double worst = 0;  // max |g(x+) - g(x-)| / scale
  Vec3 witness = Vec3::Zero();
  bool ok = false;
};

// Continuity across ball spheres, tube walls and slab sides, sampled just
// inside and just outside each interface.
InterfaceReport interface_mismatch(const SmoothedMap& g, int samples = 10000, unsigned seed = 7);

}  // namespace plsmooth
