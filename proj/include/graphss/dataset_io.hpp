#pragma once
// Dataset file format:
//   meta.json      {"num_nodes": N, "num_classes": K, "num_features": d}
//   edges.csv      src,dst            (undirected semantics, header optional)
//   features.csv   node_id,feature_index,value   (sparse triplets)
//   labels.csv     node_id,label
// All integers base-10, UTF-8, LF or CRLF line endings.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphss/graph.hpp"

namespace graphss {

namespace detail {

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline bool parse_int(const std::string& s, long long& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [ptr, ec] = std::from_chars(b, e, out, 10);
  while (ptr < e && (*ptr == ' ' || *ptr == '\t')) ++ptr;
  return ec == std::errc() && ptr == e && b != e;
}

inline bool parse_real(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

[[noreturn]] inline void malformed(const std::string& path, int line_no,
                                   const std::string& what) {
  throw ValidationError(path + ":" + std::to_string(line_no) + ": " + what);
}

// Reads non-empty lines; skips an initial header (first field not an integer).
template <typename RowFn>
void for_each_csv_row(const std::string& path, int expected_fields, RowFn&& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string raw;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (first) {
      first = false;
      long long probe;
      if (!parse_int(fields[0], probe)) continue;  // header row
    }
    if (static_cast<int>(fields.size()) != expected_fields)
      malformed(path, line_no, "expected " + std::to_string(expected_fields) +
                                   " fields, got " + std::to_string(fields.size()));
    fn(fields, line_no);
  }
}

}  // namespace detail

// Loads a graph from the four-file format above. Edges are symmetrized
// (each undirected edge stored both ways) and duplicates collapse; self-loops
// are rejected since normalization adds them itself.
inline Graph load_graph(const std::string& edges_path,
                        const std::string& features_path,
                        const std::string& labels_path,
                        const std::string& meta_path) {
  using detail::malformed;

  std::ifstream meta_in(meta_path);
  if (!meta_in) throw ValidationError("cannot open " + meta_path);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const std::exception& e) {
    throw ValidationError(meta_path + ": invalid JSON: " + e.what());
  }
  for (const char* key : {"num_nodes", "num_classes", "num_features"})
    if (!meta.contains(key) || !meta[key].is_number_integer())
      throw ValidationError(meta_path + ": missing integer field '" + key + "'");
  const int n = meta["num_nodes"].get<int>();
  const int k = meta["num_classes"].get<int>();
  const int d = meta["num_features"].get<int>();
  if (n <= 0 || k <= 0 || d <= 0)
    throw ValidationError(meta_path + ": sizes must be positive");

  std::vector<std::pair<int, int>> edges;
  detail::for_each_csv_row(edges_path, 2, [&](const auto& f, int line_no) {
    long long u, v;
    if (!detail::parse_int(f[0], u) || !detail::parse_int(f[1], v))
      malformed(edges_path, line_no, "non-integer edge endpoint");
    if (u < 0 || u >= n || v < 0 || v >= n)
      malformed(edges_path, line_no, "edge endpoint out of range");
    if (u == v) malformed(edges_path, line_no, "self-loop rejected");
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  });

  Mat features = Mat::Zero(n, d);
  detail::for_each_csv_row(features_path, 3, [&](const auto& f, int line_no) {
    long long node, feat;
    double value;
    if (!detail::parse_int(f[0], node) || !detail::parse_int(f[1], feat) ||
        !detail::parse_real(f[2], value))
      malformed(features_path, line_no, "malformed feature triplet");
    if (node < 0 || node >= n) malformed(features_path, line_no, "node id out of range");
    if (feat < 0 || feat >= d)
      malformed(features_path, line_no, "feature index out of range");
    if (!std::isfinite(value)) malformed(features_path, line_no, "non-finite value");
    features(static_cast<int>(node), static_cast<int>(feat)) = value;
  });

  std::vector<int> labels(n, -1);
  detail::for_each_csv_row(labels_path, 2, [&](const auto& f, int line_no) {
    long long node, label;
    if (!detail::parse_int(f[0], node) || !detail::parse_int(f[1], label))
      malformed(labels_path, line_no, "malformed label row");
    if (node < 0 || node >= n) malformed(labels_path, line_no, "node id out of range");
    if (label < 0 || label >= k) malformed(labels_path, line_no, "label out of range [0, K)");
    labels[static_cast<int>(node)] = static_cast<int>(label);
  });
  for (int v = 0; v < n; ++v)
    if (labels[v] < 0)
      throw ValidationError(labels_path + ": node " + std::to_string(v) + " unlabeled");

  return build_graph(n, k, edges, std::move(features), std::move(labels));
}

// Writes the four files; loading them back reproduces (N, K, edge set,
// features, labels) exactly. Output bytes are deterministic.
inline void save_graph(const Graph& g, const std::string& edges_path,
                       const std::string& features_path,
                       const std::string& labels_path,
                       const std::string& meta_path) {
  {
    nlohmann::json meta{{"num_nodes", g.num_nodes},
                        {"num_classes", g.num_classes},
                        {"num_features", g.num_features()}};
    std::ofstream out(meta_path);
    if (!out) throw ValidationError("cannot write " + meta_path);
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(edges_path);
    if (!out) throw ValidationError("cannot write " + edges_path);
    out << "src,dst\n";
    for (int v = 0; v < g.num_nodes; ++v)
      for (int u : g.neighbors(v))
        if (v < u) out << v << "," << u << "\n";
  }
  {
    std::ofstream out(features_path);
    if (!out) throw ValidationError("cannot write " + features_path);
    out << "node_id,feature_index,value\n";
    char buf[64];
    for (int v = 0; v < g.num_nodes; ++v)
      for (int f = 0; f < g.num_features(); ++f)
        if (g.features(v, f) != 0.0) {
          std::snprintf(buf, sizeof(buf), "%.17g", g.features(v, f));
          out << v << "," << f << "," << buf << "\n";
        }
  }
  {
    std::ofstream out(labels_path);
    if (!out) throw ValidationError("cannot write " + labels_path);
    out << "node_id,label\n";
    for (int v = 0; v < g.num_nodes; ++v) {
      const int z = g.latent_labels.empty() ? 0 : g.latent_labels[v];
      out << v << "," << z << "\n";
    }
  }
}

struct DatasetPaths {
  std::string edges, features, labels, meta;
};

inline DatasetPaths dataset_paths_in(const std::string& dir) {
  namespace fs = std::filesystem;
  return {(fs::path(dir) / "edges.csv").string(),
          (fs::path(dir) / "features.csv").string(),
          (fs::path(dir) / "labels.csv").string(),
          (fs::path(dir) / "meta.json").string()};
}

}  // namespace graphss
