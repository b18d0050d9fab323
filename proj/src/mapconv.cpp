/*
 * Copyright 2026 The Anchorline Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "anchorline/mapconv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "anchorline/errors.hpp"
#include "internal/io.hpp"

namespace anchorline {
namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    parse_error(line, "bad number '" + s + "'");
  }
  return v;
}

long long to_int(const std::string& s, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    parse_error(line, "bad integer '" + s + "'");
  }
  return v;
}

bool degenerate(const TriangleMesh& mesh, const std::array<std::uint32_t, 3>& t) {
  if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
  const Vec3& a = mesh.vertices[t[0]];
  const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
  return 0.5 * n.norm() <= 1e-12;
}

MeshLoadResult finish(TriangleMesh raw) {
  MeshLoadResult result;
  result.mesh.vertices = std::move(raw.vertices);
  for (const auto& t : raw.triangles) {
    if (degenerate(result.mesh, t)) {
      ++result.dropped_degenerate;
    } else {
      result.mesh.triangles.push_back(t);
    }
  }
  return result;
}

MeshLoadResult load_obj(std::istream& in) {
  TriangleMesh raw;
  struct PendingFace {
    std::array<long long, 3> idx;
    std::size_t line;
  };
  std::vector<PendingFace> faces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& kind = tok[0];
    if (kind == "v") {
      if (tok.size() != 4 && tok.size() != 5) parse_error(line_no, "vertex needs 3 coordinates");
      raw.vertices.emplace_back(to_double(tok[1], line_no), to_double(tok[2], line_no),
                                to_double(tok[3], line_no));
    } else if (kind == "f") {
      if (tok.size() > 4) {
        throw Error(Errc::NonTriangleFace, "line " + std::to_string(line_no) + ": face has " +
                                               std::to_string(tok.size() - 1) + " vertices");
      }
      if (tok.size() < 4) parse_error(line_no, "face needs 3 vertices");
      PendingFace f{{}, line_no};
      for (int i = 0; i < 3; ++i) {
        const std::string& ref = tok[i + 1];
        f.idx[i] = to_int(ref.substr(0, ref.find('/')), line_no);
        // Negative indices are relative to the vertices read so far.
        if (f.idx[i] < 0) f.idx[i] += static_cast<long long>(raw.vertices.size()) + 1;
      }
      faces.push_back(f);
    } else if (kind == "vt" || kind == "vn" || kind == "vp" || kind == "o" || kind == "g" ||
               kind == "s" || kind == "usemtl" || kind == "mtllib" || kind == "l") {
      continue;
    } else {
      parse_error(line_no, "unknown record '" + kind + "'");
    }
  }
  for (const auto& f : faces) {
    std::array<std::uint32_t, 3> t{};
    for (int i = 0; i < 3; ++i) {
      if (f.idx[i] < 1 || f.idx[i] > static_cast<long long>(raw.vertices.size())) {
        parse_error(f.line, "vertex index out of range");
      }
      t[i] = static_cast<std::uint32_t>(f.idx[i] - 1);
    }
    raw.triangles.push_back(t);
  }
  return finish(std::move(raw));
}

MeshLoadResult load_ply(std::istream& in) {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
    bool has_list = false;
  };
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply") parse_error(1, "missing 'ply' magic");
  std::vector<Element> elements;
  bool ascii = false;
  while (true) {
    if (!next_line()) parse_error(line_no, "unterminated header");
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") parse_error(line_no, "only ascii PLY is supported");
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_error(line_no, "bad element line");
      elements.push_back({tok[1], static_cast<std::size_t>(to_int(tok[2], line_no)), {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty()) parse_error(line_no, "property before element");
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) parse_error(line_no, "bad list property");
        elements.back().has_list = true;
        elements.back().properties.push_back(tok[4]);
      } else {
        if (tok.size() != 3) parse_error(line_no, "bad property");
        elements.back().properties.push_back(tok[2]);
      }
    } else {
      parse_error(line_no, "unknown header line");
    }
  }
  if (!ascii) parse_error(line_no, "missing format line");

  TriangleMesh raw;
  for (const auto& el : elements) {
    for (std::size_t n = 0; n < el.count; ++n) {
      if (!next_line()) parse_error(line_no, "unexpected end of file in " + el.name);
      const auto tok = split_ws(line);
      if (el.name == "vertex") {
        int ix = -1, iy = -1, iz = -1;
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          if (el.properties[p] == "x") ix = static_cast<int>(p);
          if (el.properties[p] == "y") iy = static_cast<int>(p);
          if (el.properties[p] == "z") iz = static_cast<int>(p);
        }
        if (ix < 0 || iy < 0 || iz < 0) parse_error(line_no, "vertex lacks x/y/z");
        if (tok.size() != el.properties.size()) parse_error(line_no, "vertex field count");
        raw.vertices.emplace_back(to_double(tok[ix], line_no), to_double(tok[iy], line_no),
                                  to_double(tok[iz], line_no));
      } else if (el.name == "face") {
        if (tok.empty()) parse_error(line_no, "empty face");
        const long long k = to_int(tok[0], line_no);
        if (k > 3) {
          throw Error(Errc::NonTriangleFace, "line " + std::to_string(line_no) + ": face has " +
                                                 std::to_string(k) + " vertices");
        }
        if (k != 3 || tok.size() < 4) parse_error(line_no, "face needs 3 vertices");
        std::array<std::uint32_t, 3> t{};
        for (int i = 0; i < 3; ++i) {
          const long long v = to_int(tok[i + 1], line_no);
          if (v < 0 || v >= std::numeric_limits<std::uint32_t>::max()) {
            parse_error(line_no, "vertex index out of range");
          }
          t[i] = static_cast<std::uint32_t>(v);
        }
        raw.triangles.push_back(t);
      }
    }
  }
  for (const auto& t : raw.triangles) {
    for (auto v : t) {
      if (v >= raw.vertices.size()) parse_error(line_no, "vertex index out of range");
    }
  }
  return finish(std::move(raw));
}

// Axis-aligned box distance, a lower bound for anything inside it.
double box_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
  return d.norm();
}

class TriangleBvh {
 public:
  explicit TriangleBvh(const TriangleMesh& mesh) : mesh_(mesh) {
    const std::size_t n = mesh.triangles.size();
    order_.resize(n);
    lo_.resize(n);
    hi_.resize(n);
    centroid_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      order_[i] = static_cast<std::uint32_t>(i);
      const auto c = mesh.corners(i);
      lo_[i] = c[0].cwiseMin(c[1]).cwiseMin(c[2]);
      hi_[i] = c[0].cwiseMax(c[1]).cwiseMax(c[2]);
      centroid_[i] = (c[0] + c[1] + c[2]) / 3.0;
    }
    nodes_.reserve(2 * n);
    build(0, n);
  }

  double nearest(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (box_distance(p, node.lo, node.hi) > best) continue;
      if (node.count > 0) {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
          const auto c = mesh_.corners(order_[i]);
          best = std::min(best, point_triangle_distance(p, c[0], c[1], c[2]));
        }
        continue;
      }
      const Node& l = nodes_[node.left];
      const Node& r = nodes_[node.right];
      const double dl = box_distance(p, l.lo, l.hi);
      const double dr = box_distance(p, r.lo, r.hi);
      // Push the farther child first so the nearer one is visited next.
      if (dl <= dr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
    return best;
  }

 private:
  struct Node {
    Vec3 lo, hi;
    std::uint32_t left = 0, right = 0;
    std::uint32_t first = 0, count = 0;  // count > 0 marks a leaf
  };

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    Vec3 clo = lo, chi = hi;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(lo_[order_[i]]);
      hi = hi.cwiseMax(hi_[order_[i]]);
      clo = clo.cwiseMin(centroid_[order_[i]]);
      chi = chi.cwiseMax(centroid_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= 4) {
      nodes_[id].first = static_cast<std::uint32_t>(begin);
      nodes_[id].count = static_cast<std::uint32_t>(end - begin);
      return id;
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::size_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       if (centroid_[a][axis] != centroid_[b][axis]) {
                         return centroid_[a][axis] < centroid_[b][axis];
                       }
                       return a < b;
                     });
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  const TriangleMesh& mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> lo_, hi_, centroid_;
  std::vector<Node> nodes_;
};

}  // namespace

MeshLoadResult load_mesh(std::istream& in, MeshFormat format) {
  return format == MeshFormat::Obj ? load_obj(in) : load_ply(in);
}

MeshLoadResult load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return load_mesh(in, MeshFormat::Obj);
  if (ext == ".ply") return load_mesh(in, MeshFormat::Ply);
  throw Error(Errc::ParseError, "unsupported mesh extension '" + ext + "'");
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

GridSpec grid_for_mesh(const TriangleMesh& mesh, double resolution, int margin_voxels) {
  if (mesh.triangles.empty()) throw Error(Errc::EmptyMesh, "mesh has no triangles");
  if (!(resolution > 0.0) || margin_voxels < 1) {
    throw Error(Errc::InvalidArgument, "resolution must be positive and margin >= 1");
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& t : mesh.triangles) {
    for (auto v : t) {
      lo = lo.cwiseMin(mesh.vertices[v]);
      hi = hi.cwiseMax(mesh.vertices[v]);
    }
  }
  GridSpec spec;
  spec.resolution = resolution;
  for (int a = 0; a < 3; ++a) {
    spec.origin[a] = (std::floor(lo[a] / resolution) - margin_voxels) * resolution;
    spec.dims[a] = static_cast<int>(std::ceil((hi[a] - spec.origin[a]) / resolution)) +
                   margin_voxels + 1;
  }
  return spec;
}

// Closest point on triangle by Voronoi-region classification.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).norm();
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).norm();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

std::vector<double> unsigned_distance(const TriangleMesh& mesh, const GridSpec& spec,
                                      unsigned workers) {
  if (mesh.triangles.empty()) throw Error(Errc::EmptyMesh, "mesh has no triangles");
  const TriangleBvh bvh(mesh);
  std::vector<double> out(spec.size());
  const int nz = spec.dims[2];
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(nz));

  // Each worker owns whole Z layers, so writes never overlap.
  auto run = [&](unsigned w) {
    for (int k = static_cast<int>(w); k < nz; k += static_cast<int>(workers)) {
      for (int j = 0; j < spec.dims[1]; ++j) {
        for (int i = 0; i < spec.dims[0]; ++i) {
          out[spec.index(i, j, k)] = bvh.nearest(spec.center(i, j, k));
        }
      }
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  return out;
}

SdfGrid sign_by_flood_fill(std::vector<double> distances, const GridSpec& spec) {
  if (distances.size() != spec.size()) {
    throw Error(Errc::InvalidArgument, "distance grid does not match spec");
  }
  const double clearance = spec.resolution / 2.0;
  const auto [nx, ny, nz] = spec.dims;
  std::vector<std::uint8_t> outside(spec.size(), 0);
  std::deque<std::array<int, 3>> frontier;
  auto seed = [&](int i, int j, int k) {
    const std::size_t idx = spec.index(i, j, k);
    if (!outside[idx] && distances[idx] > clearance) {
      outside[idx] = 1;
      frontier.push_back({i, j, k});
    }
  };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1) seed(i, j, k);
      }
    }
  }
  static constexpr int kSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                       {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (!frontier.empty()) {
    const auto [i, j, k] = frontier.front();
    frontier.pop_front();
    for (const auto& s : kSteps) {
      const int a = i + s[0], b = j + s[1], c = k + s[2];
      if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz) continue;
      seed(a, b, c);
    }
  }
  for (std::size_t idx = 0; idx < distances.size(); ++idx) {
    if (!outside[idx]) distances[idx] = -distances[idx];
  }
  return SdfGrid{spec, std::move(distances)};
}

SdfGrid build_sdf(const TriangleMesh& mesh, const GridSpec& spec, unsigned workers) {
  return sign_by_flood_fill(unsigned_distance(mesh, spec, workers), spec);
}

std::array<int, 2> OccupancyGrid::world_to_cell(const Vec2& p) const {
  return {static_cast<int>(std::floor((p.x() - origin.x()) / resolution + 0.5)),
          static_cast<int>(std::floor((p.y() - origin.y()) / resolution + 0.5))};
}

Vec2 OccupancyGrid::cell_center(int ix, int iy) const {
  return origin + resolution * Vec2(ix, iy);
}

Cell OccupancyGrid::at_world(const Vec2& p) const {
  const auto [ix, iy] = world_to_cell(p);
  return in_bounds(ix, iy) ? at(ix, iy) : Cell::Unknown;
}

std::string occupancy_to_json(const OccupancyGrid& grid) {
  nlohmann::ordered_json j;
  j["origin"] = {grid.origin.x(), grid.origin.y()};
  j["resolution"] = grid.resolution;
  j["width"] = grid.width;
  j["height"] = grid.height;
  std::string cells(grid.cells.size(), '?');
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    cells[i] = grid.cells[i] == Cell::Free ? '.' : grid.cells[i] == Cell::Occupied ? '#' : '?';
  }
  j["cells"] = std::move(cells);
  return j.dump();
}

OccupancyGrid occupancy_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedDocument, e.what());
  }
  auto bad = [](const std::string& what) { throw Error(Errc::MalformedDocument, what); };
  if (!j.is_object()) bad("grid must be an object");
  for (const char* key : {"origin", "resolution", "width", "height", "cells"}) {
    if (!j.contains(key)) bad(std::string("grid is missing '") + key + "'");
  }
  if (!j["origin"].is_array() || j["origin"].size() != 2 || !j["origin"][0].is_number() ||
      !j["origin"][1].is_number()) {
    bad("origin must be [x,y]");
  }
  if (!j["resolution"].is_number() || !j["width"].is_number_integer() ||
      !j["height"].is_number_integer() || !j["cells"].is_string()) {
    bad("grid header has wrong types");
  }
  OccupancyGrid g;
  g.origin = Vec2(j["origin"][0].get<double>(), j["origin"][1].get<double>());
  g.resolution = j["resolution"].get<double>();
  g.width = j["width"].get<int>();
  g.height = j["height"].get<int>();
  if (!(g.resolution > 0.0) || g.width < 0 || g.height < 0) bad("grid dimensions out of range");
  const auto& cells = j["cells"].get_ref<const std::string&>();
  if (cells.size() != static_cast<std::size_t>(g.width) * g.height) {
    bad("cells length does not match width*height");
  }
  g.cells.reserve(cells.size());
  for (char c : cells) {
    switch (c) {
      case '.': g.cells.push_back(Cell::Free); break;
      case '#': g.cells.push_back(Cell::Occupied); break;
      case '?': g.cells.push_back(Cell::Unknown); break;
      default: bad(std::string("bad cell character '") + c + "'");
    }
  }
  return g;
}

OccupancyGrid load_occupancy(const std::filesystem::path& path) {
  return occupancy_from_json(internal::read_file(path));
}

void save_occupancy(const std::filesystem::path& path, const OccupancyGrid& grid) {
  internal::write_file_atomic(path, occupancy_to_json(grid));
}

OccupancyGrid extract_slice(const SdfGrid& sdf, const SliceConfig& cfg) {
  if (cfg.occupied_band < 0.0) throw Error(Errc::InvalidArgument, "occupied_band must be >= 0");
  const GridSpec& spec = sdf.spec;
  const int nz = spec.dims[2];
  const double f = (cfg.z_height - spec.origin.z()) / spec.resolution;
  if (!(f >= 0.0) || f > nz - 1) {
    throw Error(Errc::SliceOutOfRange, "z " + std::to_string(cfg.z_height) +
                                           " is outside the grid");
  }
  const int k0 = std::min(static_cast<int>(std::floor(f)), std::max(nz - 2, 0));
  const int k1 = std::min(k0 + 1, nz - 1);
  const double t = f - k0;

  OccupancyGrid g;
  g.origin = Vec2(spec.origin.x(), spec.origin.y());
  g.resolution = spec.resolution;
  g.width = spec.dims[0];
  g.height = spec.dims[1];
  g.cells.resize(static_cast<std::size_t>(g.width) * g.height);
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) {
      const double v = t == 0.0 ? sdf.at(i, j, k0)
                                : (1.0 - t) * sdf.at(i, j, k0) + t * sdf.at(i, j, k1);
      g.at(i, j) = v <= cfg.occupied_band ? Cell::Occupied : Cell::Free;
    }
  }
  return g;
}

}  // namespace anchorline
