#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plsmooth/core.hpp"
#include "plsmooth/geometry.hpp"

namespace plsmooth {

using Cell = std::array<int, 4>;
using FaceKey = std::array<int, 3>;  // sorted vertex ids
using EdgeKey = std::array<int, 2>;  // sorted vertex ids

/// Finite 3-dimensional simplicial complex in R^3 with its incidence tables.
struct SimplicialComplex {
  std::vector<Vec3> points;
  std::vector<Cell> cells;
  std::vector<FaceKey> faces;
  std::vector<EdgeKey> edges;

  std::vector<std::array<int, 4>> cell_faces;  // face opposite local vertex i
  std::vector<std::array<int, 6>> cell_edges;
  std::vector<std::vector<int>> face_cells;
  std::vector<std::vector<int>> edge_cells;
  std::vector<std::vector<int>> edge_faces;
  std::vector<std::vector<int>> vertex_cells;
  std::vector<std::vector<int>> vertex_edges;
  std::vector<std::vector<int>> vertex_faces;

  std::vector<char> boundary_face;
  std::vector<char> boundary_edge;
  std::vector<char> boundary_vertex;

  double scale = 1.0;  // bounding-box diagonal
  Box bounds;

  int find_face(int a, int b, int c) const;
  int find_edge(int a, int b) const;
  Tet cell_points(int c) const;
  double min_volume() const;

  // Cell containing x (closed, relative tolerance); -1 when x is outside.
  int locate(const Vec3& x) const;

  std::shared_ptr<GridIndex> cell_index;
};

// Builds incidence tables and checks that the cells form a simplicial complex
// (valid indices, nondegenerate cells, proper pairwise intersections).
// Throws ParseError on malformed input and ValidationError on geometry.
SimplicialComplex build_complex(std::vector<Vec3> points, std::vector<Cell> cells);

// Flags the listed faces (and their edges and vertices) as domain boundary.
void mark_boundary(SimplicialComplex& K, const std::vector<FaceKey>& faces);

struct ComplexIssue {
  std::string kind;  // "overlap", "contact", "degenerate", "nonmanifold"
  int a = -1;
  int b = -1;
  Vec3 witness = Vec3::Zero();
  std::string message;
};

std::vector<ComplexIssue> complex_issues(const std::vector<Vec3>& points,
                                         const std::vector<Cell>& cells, double scale);

/// Piecewise-linear map: one affine piece per cell of the complex.
struct PLMap {
  std::shared_ptr<const SimplicialComplex> complex;
  std::vector<Affine> pieces;
  bool reflected = false;  // x1 -> -x1 applied to make the map sense preserving

  Vec3 operator()(const Vec3& x) const;
  Vec3 vertex_image(int v) const;
  Tet image_cell(int c) const;
  const SimplicialComplex& mesh() const { return *complex; }
};

PLMap make_pl_map(std::shared_ptr<const SimplicialComplex> complex, std::vector<Affine> pieces);
// Pieces determined by the images of the vertices.
PLMap pl_map_from_vertex_images(std::shared_ptr<const SimplicialComplex> complex,
                                const std::vector<Vec3>& images);

struct ValidationFailure {
  std::string kind;  // "discontinuity", "degenerate", "orientation", "overlap", "contact"
  int a = -1;
  int b = -1;
  Vec3 witness = Vec3::Zero();
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  bool reflected = false;
  std::vector<ValidationFailure> failures;
  double min_det = 0;
  double max_det = 0;
};

// Checks continuity, nondegeneracy, orientation and injectivity (image cells
// form a simplicial complex). A map with all determinants negative is
// accepted after reflection; see PLMap::reflected.
ValidationReport validate_pl_homeo(const PLMap& f);
// Validates and returns the sense-preserving version; throws ValidationError
// listing every failure.
PLMap normalize_orientation(const PLMap& f);

/// The two pieces across an interior face. `in_cell` carries the piece with
/// the smaller determinant, so the blending slab lies in `out_cell`.
struct FaceIncidence {
  int face = -1;
  int in_cell = -1;
  int out_cell = -1;
  Vec3 normal = Vec3::Zero();  // unit, pointing into out_cell
  Frame frame;  // normal -> e1, origin at the face vertex with smallest index
  bool interior = false;
  bool trivial = true;  // pieces agree
};

struct EdgeIncidence {
  int edge = -1;
  int a = -1;
  int b = -1;
  std::vector<int> faces;  // sorted by angle
  std::vector<double> angles;  // angle of faces[i] in the edge frame, in [-pi, pi)
  std::vector<int> cells;  // cells[i] fills the sector from faces[i] to faces[i+1]; -1 outside
  Frame frame;  // origin at a, third axis along b - a
  double length = 0;
  bool interior = false;
  bool trivial = true;
};

struct VertexIncidence {
  int vertex = -1;
  std::vector<int> cells;
  std::vector<int> link_faces;  // faces of star cells not containing the vertex
  bool interior = false;
  bool trivial = true;
  int nontrivial_faces = 0;
};

std::vector<FaceIncidence> face_pairs(const PLMap& f);
std::vector<EdgeIncidence> edge_fans(const PLMap& f);
std::vector<VertexIncidence> vertex_stars(const PLMap& f);

bool pieces_agree(const Affine& a, const Affine& b, double scale);

/// Parsed mesh document (JSON).
struct MeshDocument {
  std::vector<Vec3> points;
  std::vector<Cell> cells;
  std::optional<std::vector<Affine>> pieces;
  std::optional<std::vector<Vec3>> images;
  std::optional<std::vector<FaceKey>> domain_boundary;
};

MeshDocument parse_mesh_document(std::string_view text);
std::string serialize_mesh_document(const MeshDocument& doc);
MeshDocument read_mesh_file(const std::string& path);

SimplicialComplex complex_from_document(const MeshDocument& doc);
PLMap map_from_document(const MeshDocument& doc);
MeshDocument document_from_map(const PLMap& f);

}  // namespace plsmooth
