#include <fstream>
#include <sstream>

#include <json.hpp>

#include "plsmooth/mesh.hpp"

namespace plsmooth {

using nlohmann::json;

namespace {

Vec3 read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + ": expected 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(what) + ": expected a number");
    v(i) = j[i].get<double>();
  }
  return v;
}

Mat3 read_matrix(const json& j) {
  Mat3 M;
  if (j.is_array() && j.size() == 9) {
    for (int k = 0; k < 9; ++k) {
      if (!j[k].is_number()) throw ParseError("matrix: expected numbers");
      M(k / 3, k % 3) = j[k].get<double>();
    }
    return M;
  }
  if (!j.is_array() || j.size() != 3) throw ParseError("matrix: expected 3x3 row-major");
  for (int r = 0; r < 3; ++r) M.row(r) = read_vec3(j[r], "matrix row").transpose();
  return M;
}

json vec_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

}  // namespace

MeshDocument parse_mesh_document(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed mesh document: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("mesh document must be an object");
  if (!j.contains("points") || !j.contains("cells"))
    throw ParseError("mesh document needs 'points' and 'cells'");
  MeshDocument doc;
  for (const auto& p : j.at("points")) doc.points.push_back(read_vec3(p, "point"));
  for (const auto& c : j.at("cells")) {
    if (!c.is_array() || c.size() != 4) throw ParseError("cell: expected 4 indices");
    Cell cell;
    for (int i = 0; i < 4; ++i) {
      if (!c[i].is_number_integer()) throw ParseError("cell: expected integer indices");
      cell[i] = c[i].get<int>();
    }
    doc.cells.push_back(cell);
  }
  if (j.contains("pieces")) {
    std::vector<Affine> pieces;
    for (const auto& p : j.at("pieces")) {
      if (!p.is_object() || !p.contains("matrix") || !p.contains("offset"))
        throw ParseError("piece: expected {matrix, offset}");
      pieces.push_back({read_matrix(p.at("matrix")), read_vec3(p.at("offset"), "offset")});
    }
    doc.pieces = std::move(pieces);
  }
  if (j.contains("images")) {
    std::vector<Vec3> images;
    for (const auto& p : j.at("images")) images.push_back(read_vec3(p, "image"));
    doc.images = std::move(images);
  }
  if (j.contains("domain_boundary")) {
    std::vector<FaceKey> faces;
    for (const auto& f : j.at("domain_boundary")) {
      if (!f.is_array() || f.size() != 3) throw ParseError("domain_boundary: expected triples");
      FaceKey k{f[0].get<int>(), f[1].get<int>(), f[2].get<int>()};
      std::sort(k.begin(), k.end());
      faces.push_back(k);
    }
    doc.domain_boundary = std::move(faces);
  }
  return doc;
}

std::string serialize_mesh_document(const MeshDocument& doc) {
  json j;
  j["points"] = json::array();
  for (const auto& p : doc.points) j["points"].push_back(vec_json(p));
  j["cells"] = json::array();
  for (const auto& c : doc.cells) j["cells"].push_back({c[0], c[1], c[2], c[3]});
  if (doc.pieces) {
    j["pieces"] = json::array();
    for (const auto& a : *doc.pieces) {
      json m = json::array();
      for (int r = 0; r < 3; ++r) m.push_back({a.matrix(r, 0), a.matrix(r, 1), a.matrix(r, 2)});
      j["pieces"].push_back({{"matrix", m}, {"offset", vec_json(a.offset)}});
    }
  }
  if (doc.images) {
    j["images"] = json::array();
    for (const auto& p : *doc.images) j["images"].push_back(vec_json(p));
  }
  if (doc.domain_boundary) {
    j["domain_boundary"] = json::array();
    for (const auto& f : *doc.domain_boundary) j["domain_boundary"].push_back({f[0], f[1], f[2]});
  }
  return j.dump(1);
}

MeshDocument read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mesh_document(ss.str());
}

SimplicialComplex complex_from_document(const MeshDocument& doc) {
  SimplicialComplex K = build_complex(doc.points, doc.cells);
  if (doc.domain_boundary) mark_boundary(K, *doc.domain_boundary);
  return K;
}

PLMap map_from_document(const MeshDocument& doc) {
  auto K = std::make_shared<const SimplicialComplex>(complex_from_document(doc));
  if (doc.pieces) return make_pl_map(K, *doc.pieces);
  if (doc.images) return pl_map_from_vertex_images(K, *doc.images);
  return make_pl_map(K, std::vector<Affine>(K->cells.size()));
}

MeshDocument document_from_map(const PLMap& f) {
  MeshDocument doc;
  doc.points = f.mesh().points;
  doc.cells = f.mesh().cells;
  doc.pieces = f.pieces;
  return doc;
}

}  // namespace plsmooth
