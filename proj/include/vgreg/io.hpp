// io.hpp - the graph document format (JSON), file helpers with atomic
// replacement, and position-annotated parse errors.
//
// Document layout:
//   {
//     "format_version": 1,
//     "nodes": [{"id": 0, "coord": [x, y, z], "label": "optional"}, ...],
//     "edges": [{"a": 0, "b": 1, "path": [[x, y, z], ...], "length": l, "energy": u}, ...],
//     "provenance": { free-form object, optional }
//   }
// Node ids are 0..n-1 in order. Geodesic degrees are derived on load and
// never stored.
#pragma once

#include "graph.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace vgreg {

inline constexpr int kFormatVersion = 1;

/// Unreadable, unwritable or malformed input.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : IoError(line ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what : what),
        line_(line),
        column_(column) {}

  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

struct GraphDocument {
  int format_version = kFormatVersion;
  SpatialGraph graph;
  nlohmann::json provenance;  // null when absent
};

namespace detail {

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < offset; ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ParseError(where + "/" + key + ": unknown field '" + key + "'");
}

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

inline double number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(where + ": non-finite number");
  return x;
}

inline std::size_t index(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ParseError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline Vec3 point(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ParseError(where + ": expected [x, y, z]");
  return {number(v[0], where + "/0"), number(v[1], where + "/1"), number(v[2], where + "/2")};
}

inline nlohmann::ordered_json to_json(const Vec3& p) { return nlohmann::ordered_json::array({p.x(), p.y(), p.z()}); }

}  // namespace detail

inline GraphDocument parse_document(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw ParseError(msg, line, col);
  }
  if (!doc.is_object()) throw ParseError("document root must be an object");
  detail::reject_unknown(doc, {"format_version", "nodes", "edges", "provenance"}, "");

  GraphDocument out;
  const auto& ver = detail::field(doc, "format_version", "");
  if (!ver.is_number_integer()) throw ParseError("/format_version: expected an integer");
  out.format_version = ver.get<int>();
  if (out.format_version != kFormatVersion)
    throw ParseError("/format_version: unsupported version " + std::to_string(out.format_version));

  const auto& jn = detail::field(doc, "nodes", "");
  if (!jn.is_array()) throw ParseError("/nodes: expected an array");
  std::vector<Node> nodes;
  for (std::size_t k = 0; k < jn.size(); ++k) {
    const std::string at = "/nodes/" + std::to_string(k);
    const auto& o = jn[k];
    if (!o.is_object()) throw ParseError(at + ": expected an object");
    detail::reject_unknown(o, {"id", "coord", "label"}, at);
    Node n;
    n.id = detail::index(detail::field(o, "id", at), at + "/id");
    if (n.id != k) throw ParseError(at + "/id: node ids must be 0..n-1 in order (found " + std::to_string(n.id) + ")");
    n.coord = detail::point(detail::field(o, "coord", at), at + "/coord");
    if (auto it = o.find("label"); it != o.end()) {
      if (!it->is_string()) throw ParseError(at + "/label: expected a string");
      n.label = it->get<std::string>();
    }
    nodes.push_back(std::move(n));
  }

  const auto& je = detail::field(doc, "edges", "");
  if (!je.is_array()) throw ParseError("/edges: expected an array");
  std::vector<Edge> edges;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  for (std::size_t k = 0; k < je.size(); ++k) {
    const std::string at = "/edges/" + std::to_string(k);
    const auto& o = je[k];
    if (!o.is_object()) throw ParseError(at + ": expected an object");
    detail::reject_unknown(o, {"a", "b", "path", "length", "energy"}, at);
    Edge e;
    e.a = detail::index(detail::field(o, "a", at), at + "/a");
    e.b = detail::index(detail::field(o, "b", at), at + "/b");
    for (auto [end, name] : {std::pair{e.a, "a"}, std::pair{e.b, "b"}})
      if (end >= nodes.size())
        throw ParseError(at + "/" + name + ": edge " + std::to_string(k) + " references node " + std::to_string(end) +
                         " of a " + std::to_string(nodes.size()) + "-node graph");
    if (e.a == e.b) throw ParseError(at + ": edge " + std::to_string(k) + " is a self-loop");
    const auto key = (static_cast<std::uint64_t>(std::min(e.a, e.b)) << 32) | std::max(e.a, e.b);
    if (auto [it, fresh] = seen.emplace(key, k); !fresh)
      throw ParseError(at + ": edge " + std::to_string(k) + " duplicates edge " + std::to_string(it->second));
    const auto& jp = detail::field(o, "path", at);
    if (!jp.is_array()) throw ParseError(at + "/path: expected an array of points");
    for (std::size_t q = 0; q < jp.size(); ++q) e.path.push_back(detail::point(jp[q], at + "/path/" + std::to_string(q)));
    e.length = detail::number(detail::field(o, "length", at), at + "/length");
    e.energy = detail::number(detail::field(o, "energy", at), at + "/energy");
    edges.push_back(std::move(e));
  }

  if (auto it = doc.find("provenance"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("/provenance: expected an object");
    out.provenance = *it;
  }

  try {
    out.graph = SpatialGraph(std::move(nodes), std::move(edges), DuplicateEdges::reject);
  } catch (const Error& e) {
    throw ParseError(std::string("invalid graph: ") + e.what());
  }
  return out;
}

inline SpatialGraph parse_graph(std::string_view text) { return parse_document(text).graph; }

inline std::string serialize_graph(const SpatialGraph& g, const nlohmann::json& provenance = nullptr) {
  nlohmann::ordered_json doc;
  doc["format_version"] = kFormatVersion;
  auto& jn = doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes()) {
    nlohmann::ordered_json o;
    o["id"] = n.id;
    o["coord"] = detail::to_json(n.coord);
    if (n.label) o["label"] = *n.label;
    jn.push_back(std::move(o));
  }
  auto& je = doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) {
    nlohmann::ordered_json o;
    o["a"] = e.a;
    o["b"] = e.b;
    auto& path = o["path"] = nlohmann::ordered_json::array();
    for (const auto& p : e.path) path.push_back(detail::to_json(p));
    o["length"] = e.length;
    o["energy"] = e.energy;
    je.push_back(std::move(o));
  }
  if (!provenance.is_null()) doc["provenance"] = nlohmann::ordered_json::parse(provenance.dump());
  return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return ss.str();
}

/// Writes to a temporary sibling and renames it over `path`, so readers
/// never see a partial file.
inline void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("error while writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace '" + path.string() + "'");
  }
}

inline GraphDocument load_graph_document(const std::filesystem::path& path) {
  try {
    return parse_document(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline SpatialGraph load_graph(const std::filesystem::path& path) { return load_graph_document(path).graph; }

inline void save_graph(const std::filesystem::path& path, const SpatialGraph& g,
                       const nlohmann::json& provenance = nullptr) {
  write_text_file_atomic(path, serialize_graph(g, provenance));
}

}  // namespace vgreg
