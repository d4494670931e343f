#include "ebtree/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "ebtree/errors.hpp"
#include "json.hpp"

namespace ebtree::io {

using nlohmann::json;

std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) throw ParseError("not a number: '" + text + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + text + "'", line);
  return v;
}

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    throw ValidationError(std::string(what) + " '" + s + "' cannot be written to CSV");
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

// --- canonical JSON writer -------------------------------------------------

bool is_scalar(const json& j) { return !j.is_object() && !j.is_array(); }

void write_scalar(std::string& out, const json& j) {
  if (j.is_number_float()) {
    out += format_double(j.get<double>());
  } else {
    out += j.dump();
  }
}

void write_canonical(std::string& out, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      out += inner + json(it.key()).dump() + ": ";
      write_canonical(out, it.value(), indent + 1);
    }
    out += "\n" + pad + "}";
  } else if (j.is_array()) {
    if (std::all_of(j.begin(), j.end(), is_scalar)) {
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ", ";
        write_scalar(out, j[i]);
      }
      out += "]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += inner;
      write_canonical(out, j[i], indent + 1);
    }
    out += "\n" + pad + "]";
  } else {
    write_scalar(out, j);
  }
}

// Single-line form with the same number formatting.
void write_compact(std::string& out, const json& j) {
  if (j.is_object()) {
    out += "{";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",";
      first = false;
      out += json(it.key()).dump() + ":";
      write_compact(out, it.value());
    }
    out += "}";
  } else if (j.is_array()) {
    out += "[";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",";
      write_compact(out, j[i]);
    }
    out += "]";
  } else {
    write_scalar(out, j);
  }
}

std::string compact(const json& j) {
  std::string out;
  write_compact(out, j);
  return out;
}

json config_to_json(const BuildConfig& c) {
  json j;
  j["k"] = c.k;
  j["distance_mode"] = std::string(to_string(c.distance_mode));
  j["max_children"] = c.max_children;
  j["seed"] = c.seed;
  j["baseline"] = c.baseline;
  j["lsh"] = {{"num_tables", c.lsh.num_tables},
              {"hashes_per_table", c.lsh.hashes_per_table},
              {"bucket_width", c.lsh.bucket_width},
              {"seed", c.lsh.seed},
              {"segments", c.lsh.segments}};
  j["margin"] = {{"c", c.margin.c},
                 {"max_iters", c.margin.max_iters},
                 {"tolerance", c.margin.tolerance},
                 {"seed", c.margin.seed}};
  return j;
}

BuildConfig config_from_json(const json& j) {
  BuildConfig c;
  c.k = j.at("k").get<std::size_t>();
  c.distance_mode = distance_mode_from_string(j.at("distance_mode").get<std::string>());
  c.max_children = j.at("max_children").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.baseline = j.at("baseline").get<bool>();
  const auto& l = j.at("lsh");
  c.lsh.num_tables = l.at("num_tables").get<std::size_t>();
  c.lsh.hashes_per_table = l.at("hashes_per_table").get<std::size_t>();
  c.lsh.bucket_width = l.at("bucket_width").get<double>();
  c.lsh.seed = l.at("seed").get<std::uint64_t>();
  c.lsh.segments = l.at("segments").get<std::size_t>();
  const auto& m = j.at("margin");
  c.margin.c = m.at("c").get<double>();
  c.margin.max_iters = m.at("max_iters").get<std::size_t>();
  c.margin.tolerance = m.at("tolerance").get<double>();
  c.margin.seed = m.at("seed").get<std::uint64_t>();
  return c;
}

json path_json(const TraversalPath& path) {
  json steps = json::array();
  for (const auto& s : path.steps) steps.push_back({{"node_id", s.node_id}, {"distance", s.distance}});
  return steps;
}

}  // namespace

EmbeddingFile parse_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty embedding file", 1);
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
    throw ParseError("header must start with 'id,label'", line_no);
  }
  std::size_t col = 2;
  const bool has_pred = col < header.size() && header[col] == "pred";
  if (has_pred) ++col;
  const bool has_source = col < header.size() && header[col] == "source_ref";
  if (has_source) ++col;
  const std::size_t first_dim = col;
  for (std::size_t d = 0; col < header.size(); ++col, ++d) {
    if (header[col] != "d" + std::to_string(d)) {
      throw ParseError("expected column 'd" + std::to_string(d) + "', found '" + header[col] + "'", line_no);
    }
  }
  const std::size_t dim = header.size() - first_dim;
  if (dim < 2) throw ParseError("at least two embedding columns (d0, d1) are required", line_no);

  std::vector<EmbeddedPoint> points;
  Predictions predictions;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    EmbeddedPoint p;
    p.id = fields[0];
    p.label = fields[1];
    if (p.id.empty()) throw ParseError("empty id", line_no);
    if (p.label.empty()) throw ParseError("empty label", line_no);
    if (!ids.insert(p.id).second) throw ParseError("duplicate id '" + p.id + "'", line_no);
    std::string pred = has_pred ? fields[2] : p.label;
    if (pred.empty()) throw ParseError("empty prediction", line_no);
    if (has_source) p.source_ref = fields[first_dim - 1];
    p.embedding.reserve(dim);
    for (std::size_t c = first_dim; c < fields.size(); ++c) p.embedding.push_back(parse_number(fields[c], line_no));
    points.push_back(std::move(p));
    predictions.push_back(std::move(pred));
  }
  EmbeddingFile file{LabeledDataset(std::move(points)), std::move(predictions), has_pred};
  return file;
}

EmbeddingFile load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_embeddings(in);
}

void write_embeddings(std::ostream& out, const LabeledDataset& dataset, const Predictions& predictions) {
  if (predictions.size() != dataset.size()) throw ValidationError("predictions do not cover the dataset");
  const bool with_source = std::any_of(dataset.points().begin(), dataset.points().end(),
                                       [](const EmbeddedPoint& p) { return !p.source_ref.empty(); });
  out << "id,label,pred";
  if (with_source) out << ",source_ref";
  for (std::size_t d = 0; d < dataset.dimension(); ++d) out << ",d" << d;
  out << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& p = dataset[i];
    check_field(p.id, "id");
    check_field(p.label, "label");
    check_field(predictions[i], "prediction");
    out << p.id << ',' << p.label << ',' << predictions[i];
    if (with_source) {
      check_field(p.source_ref, "source_ref");
      out << ',' << p.source_ref;
    }
    for (double v : p.embedding) out << ',' << format_double(v);
    out << '\n';
  }
}

void save_embeddings(const std::filesystem::path& path, const LabeledDataset& dataset, const Predictions& predictions) {
  auto out = open_for_write(path);
  write_embeddings(out, dataset, predictions);
}

std::string tree_to_json(const BoundaryTree& tree) {
  json doc;
  doc["format_version"] = kTreeFormatVersion;
  doc["dimension"] = tree.dimension();
  doc["build_config"] = config_to_json(tree.config());
  doc["provenance"] = tree.provenance();
  doc["root"] = tree.root();
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    json node;
    node["node_id"] = n.node_id;
    node["id"] = n.point.id;
    node["label"] = n.point.label;
    node["pred"] = n.label;
    node["source_ref"] = n.point.source_ref;
    node["embedding"] = n.point.embedding;
    node["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    node["children"] = n.children;
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  std::string out;
  write_canonical(out, doc, 0);
  out += '\n';
  return out;
}

BoundaryTree tree_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid tree JSON: ") + e.what(), 0);
  }
  try {
    if (doc.at("format_version").get<int>() != kTreeFormatVersion) throw ParseError("unsupported tree format version", 0);
    BoundaryTree tree(doc.at("dimension").get<std::size_t>(), config_from_json(doc.at("build_config")));
    if (doc.at("root").get<std::size_t>() != 0) throw ParseError("root must be node 0", 0);
    const auto& nodes = doc.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.at("node_id").get<std::size_t>() != i) throw ParseError("node ids must be dense and in order", 0);
      std::optional<NodeId> parent;
      if (!n.at("parent").is_null()) parent = n.at("parent").get<std::size_t>();
      EmbeddedPoint p{n.at("id").get<std::string>(), n.at("label").get<std::string>(),
                      n.at("embedding").get<Vector>(), n.at("source_ref").get<std::string>()};
      tree.insert(parent, std::move(p), n.at("pred").get<std::string>());
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].at("children").get<std::vector<NodeId>>() != tree.node(i).children) {
        throw ParseError("children of node " + std::to_string(i) + " disagree with parent links", 0);
      }
    }
    if (const auto problem = check_tree_invariants(tree); !problem.empty()) throw ParseError(problem, 0);
    tree.set_provenance(doc.at("provenance").get<std::string>());
    return tree;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed tree document: ") + e.what(), 0);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("invalid tree: ") + e.what(), 0);
  }
}

void save_tree(const std::filesystem::path& path, const BoundaryTree& tree) {
  auto out = open_for_write(path);
  out << tree_to_json(tree);
}

BoundaryTree load_tree(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return tree_from_json(buf.str());
}

std::string explanation_record(const Explanation& e) {
  json j;
  j["query_id"] = e.query_id;
  j["predicted_label"] = e.predicted_label;
  j["final_node"] = e.path.final_node;
  json points = json::array();
  for (const auto& p : e.path_points) {
    points.push_back({{"node_id", p.node_id},
                      {"point_id", p.point_id},
                      {"label", p.label},
                      {"truth_label", p.truth_label},
                      {"source_ref", p.source_ref},
                      {"distance", p.distance}});
  }
  j["path"] = std::move(points);
  j["family"] = {{"parent", e.family_parent ? json(*e.family_parent) : json(nullptr)},
                 {"children", e.family_children}};
  return compact(j);
}

std::string classification_record(const std::string& id, const TraversalPath& path) {
  json j;
  j["id"] = id;
  j["predicted_label"] = path.predicted_label;
  j["final_node"] = path.final_node;
  j["steps"] = path_json(path);
  return compact(j);
}

std::string verdict_record(const NoveltyVerdict& v) {
  json j;
  j["point_id"] = v.point_id;
  j["final_node"] = v.final_node;
  j["predicted_label"] = v.predicted_label;
  j["p_value"] = v.p_value;
  j["alpha"] = v.alpha;
  j["is_novel"] = v.is_novel;
  j["support"] = v.support;
  j["insufficient_support"] = v.insufficient_support;
  return compact(j);
}

std::string segment_record(const BoundaryTree& tree, const BoundarySegment& segment) {
  json j;
  j["class_a"] = segment.class_a;
  j["class_b"] = segment.class_b;
  json pairs = json::array();
  for (const auto& p : segment.pairs) {
    pairs.push_back({{"node_a", p.node_a},
                     {"node_b", p.node_b},
                     {"point_a", tree.node(p.node_a).point.id},
                     {"point_b", tree.node(p.node_b).point.id},
                     {"edge_length", p.edge_length},
                     {"ordering_coordinate", p.ordering_coordinate},
                     {"a_mislabeled", p.a_mislabeled},
                     {"b_mislabeled", p.b_mislabeled}});
  }
  j["pairs"] = std::move(pairs);
  std::string out;
  write_canonical(out, j, 0);
  out += '\n';
  return out;
}

}  // namespace ebtree::io
