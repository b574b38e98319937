#include "kpose/core/io.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>
#include <vector>

#include "kpose/core/error.hpp"

namespace kpose {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '\r')
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long> parse_int(std::string_view s) {
  long v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<std::string> properties;  // scalar property names
  bool has_list = false;
};

struct PlyHeader {
  std::vector<PlyElement> elements;
  long lines = 0;
};

PlyHeader read_ply_header(std::istream& in, const std::string& source) {
  PlyHeader header;
  std::string line;
  long& n = header.lines;
  if (!std::getline(in, line) || split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError(source, 1, "missing 'ply' magic");
  ++n;
  bool ended = false;
  while (std::getline(in, line)) {
    ++n;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii")
        throw ParseError(source, n, "only 'format ascii' is supported");
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError(source, n, "malformed element line");
      const auto count = parse_int(tok[2]);
      if (!count || *count < 0) throw ParseError(source, n, "bad element count");
      header.elements.push_back({std::string(tok[1]), *count, {}, false});
    } else if (tok[0] == "property") {
      if (header.elements.empty())
        throw ParseError(source, n, "property before element");
      auto& el = header.elements.back();
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) throw ParseError(source, n, "malformed list property");
        el.has_list = true;
        el.properties.emplace_back(tok[4]);
      } else {
        if (tok.size() != 3) throw ParseError(source, n, "malformed property line");
        el.properties.emplace_back(tok[2]);
      }
    } else if (tok[0] == "end_header") {
      ended = true;
      break;
    } else {
      throw ParseError(source, n, "unexpected header line '" + line + "'");
    }
  }
  if (!ended) throw ParseError(source, n, "missing end_header");
  return header;
}

int find_property(const PlyElement& el, std::string_view name) {
  for (std::size_t i = 0; i < el.properties.size(); ++i)
    if (el.properties[i] == name) return static_cast<int>(i);
  return -1;
}

struct PlyContents {
  PointCloudd cloud;
  std::vector<std::vector<long>> faces;
};

PlyContents read_ply(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  const PlyHeader header = read_ply_header(in, source);
  long n = header.lines;
  PlyContents contents;
  std::string line;

  auto next_line = [&]() -> std::vector<std::string_view> {
    while (std::getline(in, line)) {
      ++n;
      auto tok = split_ws(line);
      if (!tok.empty()) return tok;
    }
    throw ParseError(source, n, "unexpected end of file");
  };

  bool seen_vertex = false;
  for (const auto& el : header.elements) {
    if (el.name == "vertex") {
      if (el.has_list) throw ParseError(source, n, "list property on vertex");
      const std::array<int, 3> xyz{find_property(el, "x"), find_property(el, "y"),
                                   find_property(el, "z")};
      const std::array<int, 3> nxyz{find_property(el, "nx"), find_property(el, "ny"),
                                    find_property(el, "nz")};
      if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0)
        throw ParseError(source, n, "vertex element lacks x/y/z");
      const bool normals = nxyz[0] >= 0 && nxyz[1] >= 0 && nxyz[2] >= 0;
      contents.cloud.points.resize(3, el.count);
      if (normals) contents.cloud.normals.resize(3, el.count);
      // The element data lines store the values in the declared order.
      std::vector<std::string_view> tok;
      for (long v = 0; v < el.count; ++v) {
        tok = next_line();
        if (tok.size() != el.properties.size())
          throw ParseError(source, n, "expected " + std::to_string(el.properties.size()) +
                                          " values, found " + std::to_string(tok.size()));
        for (int a = 0; a < 3; ++a) {
          const auto x = parse_real(tok[static_cast<std::size_t>(xyz[a])]);
          if (!x) throw ParseError(source, n, "bad number");
          contents.cloud.points(a, v) = *x;
          if (normals) {
            const auto nx = parse_real(tok[static_cast<std::size_t>(nxyz[a])]);
            if (!nx) throw ParseError(source, n, "bad number");
            contents.cloud.normals(a, v) = *nx;
          }
        }
      }
      seen_vertex = true;
    } else if (el.name == "face") {
      for (long f = 0; f < el.count; ++f) {
        const auto tok = next_line();
        const auto count = parse_int(tok[0]);
        if (!count || *count < 3 || static_cast<std::size_t>(*count) + 1 > tok.size())
          throw ParseError(source, n, "bad face record");
        std::vector<long> face;
        for (long k = 1; k <= *count; ++k) {
          const auto idx = parse_int(tok[static_cast<std::size_t>(k)]);
          if (!idx) throw ParseError(source, n, "bad face index");
          face.push_back(*idx);
        }
        contents.faces.push_back(std::move(face));
      }
    } else {
      for (long k = 0; k < el.count; ++k) next_line();
    }
  }
  if (!seen_vertex) throw ParseError(source, n, "no vertex element");
  return contents;
}

TriangleMesh fan_triangulate(Eigen::Matrix3Xd vertices,
                             const std::vector<std::vector<long>>& faces) {
  std::size_t tris = 0;
  for (const auto& f : faces) tris += f.size() - 2;
  TriangleMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles.resize(3, static_cast<Index>(tris));
  Index t = 0;
  for (const auto& f : faces)
    for (std::size_t k = 1; k + 1 < f.size(); ++k) {
      mesh.triangles.col(t++) << static_cast<int>(f[0]), static_cast<int>(f[k]),
          static_cast<int>(f[k + 1]);
    }
  return mesh;
}

}  // namespace

std::string format_real(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

PointCloudd read_ply_cloud(const std::filesystem::path& path) {
  return read_ply(path).cloud;
}

void write_ply_cloud(const std::filesystem::path& path, const PointCloudd& cloud) {
  auto out = open_output(path);
  const bool normals = cloud.has_normals();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";
  std::string row;
  for (Index i = 0; i < cloud.size(); ++i) {
    row.clear();
    for (int a = 0; a < 3; ++a) {
      if (a) row += ' ';
      row += format_real(cloud.points(a, i));
    }
    if (normals)
      for (int a = 0; a < 3; ++a) {
        row += ' ';
        row += format_real(cloud.normals(a, i));
      }
    row += '\n';
    out << row;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TriangleMesh read_obj_mesh(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::vector<long>> faces;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError(source, n, "vertex needs 3 coordinates");
      Eigen::Vector3d v;
      for (int a = 0; a < 3; ++a) {
        const auto x = parse_real(tok[static_cast<std::size_t>(a + 1)]);
        if (!x) throw ParseError(source, n, "bad number '" + std::string(tok[static_cast<std::size_t>(a + 1)]) + "'");
        v(a) = *x;
      }
      verts.push_back(v);
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError(source, n, "face needs at least 3 vertices");
      std::vector<long> face;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const auto slash = tok[k].find('/');
        const auto idx = parse_int(tok[k].substr(0, slash));
        if (!idx || *idx == 0) throw ParseError(source, n, "bad face index");
        const long resolved = *idx > 0 ? *idx - 1 : static_cast<long>(verts.size()) + *idx;
        if (resolved < 0 || resolved >= static_cast<long>(verts.size()))
          throw ParseError(source, n, "face index out of range");
        face.push_back(resolved);
      }
      faces.push_back(std::move(face));
    }
    // vt, vn, g, o, s, usemtl, mtllib: not needed
  }
  Eigen::Matrix3Xd v(3, static_cast<Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) v.col(static_cast<Index>(i)) = verts[i];
  return fan_triangulate(std::move(v), faces);
}

void write_obj_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  auto out = open_output(path);
  for (Index i = 0; i < mesh.vertex_count(); ++i)
    out << "v " << format_real(mesh.vertices(0, i)) << ' '
        << format_real(mesh.vertices(1, i)) << ' '
        << format_real(mesh.vertices(2, i)) << '\n';
  for (Index t = 0; t < mesh.triangle_count(); ++t)
    out << "f " << mesh.triangles(0, t) + 1 << ' ' << mesh.triangles(1, t) + 1
        << ' ' << mesh.triangles(2, t) + 1 << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

TriangleMesh read_ply_mesh(const std::filesystem::path& path) {
  auto contents = read_ply(path);
  for (const auto& f : contents.faces)
    for (long idx : f)
      if (idx < 0 || idx >= contents.cloud.size())
        throw ParseError(path.string(), 0, "face index out of range");
  return fan_triangulate(std::move(contents.cloud.points), contents.faces);
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".obj") return read_obj_mesh(path);
  if (ext == ".ply") return read_ply_mesh(path);
  throw InvalidArgument("unsupported mesh format '" + ext + "'");
}

}  // namespace kpose
