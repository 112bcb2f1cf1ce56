#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "clothsr/error.hpp"
#include "clothsr/mesh.hpp"

namespace clothsr {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  // strtod needs a terminated buffer; from_chars for double is unavailable on older libstdc++.
  const std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("invalid number '" + s + "'", line);
  }
  return v;
}

long parse_index(std::string_view tok, std::size_t line) {
  // Only the position index matters: "7", "7/2", "7//3", "7/2/3".
  const auto slash = tok.find('/');
  const std::string_view head = tok.substr(0, slash);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
  if (ec != std::errc() || ptr != head.data() + head.size() || v == 0) {
    throw ParseError("invalid face index '" + std::string(tok) + "'", line);
  }
  return v;
}

}  // namespace

Mesh parse_obj(std::string_view text) {
  Positions vertices;
  std::vector<Face> faces;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto hash = raw.find('#');
    const auto tokens = split_ws(raw.substr(0, hash));
    if (tokens.empty()) continue;

    if (tokens[0] == "v") {
      if (tokens.size() < 4 || tokens.size() > 5) throw ParseError("vertex record needs 3 coordinates", line_no);
      vertices.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                            parse_double(tokens[3], line_no));
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) throw ParseError("face record needs at least 3 indices", line_no);
      std::vector<int> idx;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        long v = parse_index(tokens[k], line_no);
        // Negative indices count back from the most recent vertex.
        v = v > 0 ? v - 1 : static_cast<long>(vertices.size()) + v;
        if (v < 0 || v >= static_cast<long>(vertices.size())) {
          throw StructuralError("line " + std::to_string(line_no) + ": face index " +
                                std::string(tokens[k]) + " out of range (" +
                                std::to_string(vertices.size()) + " vertices defined)");
        }
        idx.push_back(static_cast<int>(v));
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
    // vt, vn, g, o, s, usemtl, mtllib and friends are ignored.
  }
  return Mesh(std::move(vertices), std::move(faces));
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_obj(buf.str());
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  save_obj(path, mesh, mesh.vertices());
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh, std::span<const Vec3> positions) {
  if (positions.size() != mesh.vertex_count()) throw ShapeError("position count does not match mesh");
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw Error("cannot write " + path.string());
  for (const auto& p : positions) std::fprintf(f, "v %.9g %.9g %.9g\n", p.x(), p.y(), p.z());
  for (const auto& t : mesh.faces()) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
  if (std::fclose(f) != 0) throw Error("failed writing " + path.string());
}

void save_obj_sequence(const std::filesystem::path& dir, const Mesh& topology,
                       const std::vector<Positions>& frames) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%05zu.obj", t);
    save_obj(dir / name, topology, frames[t]);
  }
}

MeshSequence load_obj_sequence(const std::filesystem::path& dir) {
  static const std::regex pattern(R"(frame_(\d{5})\.obj)");
  std::vector<std::pair<int, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoi(m[1]), entry.path());
  }
  std::sort(files.begin(), files.end());
  MeshSequence seq;
  for (std::size_t k = 0; k < files.size(); ++k) {
    if (files[k].first != static_cast<int>(k)) {
      throw FormatError("frame sequence in " + dir.string() + " is missing frame " + std::to_string(k));
    }
    Mesh m = load_obj(files[k].second);
    if (k == 0) {
      seq.reference = m;
    } else if (m.faces() != seq.reference.faces()) {
      throw ShapeError(files[k].second.string() + " does not share the topology of frame 0");
    }
    seq.frames.push_back(m.vertices());
  }
  return seq;
}

}  // namespace clothsr
