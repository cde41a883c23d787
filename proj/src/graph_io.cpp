#include "matformer/graph_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "matformer/hash.hpp"

namespace matformer {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json graph_to_json(const MaterialGraph& graph) {
  json nodes = json::array();
  for (const auto& n : graph.nodes()) {
    const auto& schema = graph.schema(n.id);
    json params = json::object();
    for (const auto& p : n.params) params[schema.params[p.param_index].name] = p.values;
    nodes.push_back({{"id", n.id}, {"type", schema.name}, {"params", params}});
  }
  json edges = json::array();
  for (const auto& e : sorted_edges(graph)) {
    edges.push_back({{"from", {{"node", e.from.node}, {"slot", e.from.slot}}},
                     {"to", {{"node", e.to.node}, {"slot", e.to.slot}}}});
  }
  return {{"format_version", kGraphFormatVersion},
          {"library_version", graph.library().version()},
          {"nodes", nodes},
          {"edges", edges}};
}

std::string graph_to_string(const MaterialGraph& graph) { return graph_to_json(graph).dump(); }

MaterialGraph graph_from_json(const json& doc, std::shared_ptr<const OperatorLibrary> library) {
  try {
    if (!doc.is_object()) throw GraphFormatError("graph document must be a JSON object");
    const int version = doc.at("format_version").get<int>();
    if (version != kGraphFormatVersion) throw GraphFormatError("unsupported graph format version " + std::to_string(version));
    const auto lib_version = doc.at("library_version").get<std::string>();
    if (lib_version != library->version()) {
      throw GraphFormatError("graph uses operator library '" + lib_version + "', expected '" + library->version() + "'");
    }
    std::map<long long, const json*> by_id;
    for (const auto& n : doc.at("nodes")) {
      const auto id = n.at("id").get<long long>();
      if (!by_id.emplace(id, &n).second) throw GraphFormatError("duplicate node id " + std::to_string(id));
    }
    MaterialGraph g(library);
    std::map<long long, NodeId> remap;
    for (const auto& [id, n] : by_id) {
      const auto name = n->at("type").get<std::string>();
      const auto type = library->find(name);
      if (!type) throw GraphError(GraphError::Kind::unknown_type, "unknown operator type '" + name + "'");
      const auto& schema = library->schema(*type);
      std::vector<ParamValue> params;
      if (n->contains("params")) {
        for (const auto& [pname, values] : n->at("params").items()) {
          const int k = schema.param_index(pname);
          if (k < 0) throw GraphError(GraphError::Kind::bad_param, name + " has no parameter '" + pname + "'");
          params.push_back({k, values.get<std::vector<double>>()});
        }
      }
      remap[id] = g.add_node(*type, std::move(params));
    }
    auto node_of = [&](const json& end) {
      const auto id = end.at("node").get<long long>();
      auto it = remap.find(id);
      if (it == remap.end()) throw GraphError(GraphError::Kind::dangling, "edge references missing node " + std::to_string(id));
      return it->second;
    };
    for (const auto& e : doc.at("edges")) {
      g.add_edge(out_slot(node_of(e.at("from")), e.at("from").at("slot").get<int>()),
                 in_slot(node_of(e.at("to")), e.at("to").at("slot").get<int>()));
    }
    return g;
  } catch (const json::exception& e) {
    throw GraphFormatError(std::string("malformed graph document: ") + e.what());
  }
}

MaterialGraph graph_from_string(const std::string& text, std::shared_ptr<const OperatorLibrary> library) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw GraphFormatError(std::string("graph document is not JSON: ") + e.what());
  }
  return graph_from_json(doc, std::move(library));
}

void save_graph(const MaterialGraph& graph, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << graph_to_string(graph) << '\n';
}

MaterialGraph load_graph(const std::filesystem::path& path, std::shared_ptr<const OperatorLibrary> library) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return graph_from_string(ss.str(), std::move(library));
  } catch (const GraphFormatError& e) {
    throw GraphFormatError(path.string() + ": " + e.what());
  }
}

std::string graph_hash(const MaterialGraph& graph) { return hex64(fnv1a(graph_to_string(graph))); }

json library_to_json(const OperatorLibrary& library) {
  json ops = json::array();
  for (const auto& s : library.schemas()) {
    json params = json::array();
    for (const auto& p : s.params) {
      params.push_back({{"name", p.name},
                        {"kind", p.kind == ParamKind::scalar ? "scalar" : p.kind == ParamKind::vector ? "vector" : "array"},
                        {"vector_dim", p.vector_dim},
                        {"discrete", p.is_discrete},
                        {"min", p.min_value},
                        {"max", p.max_value},
                        {"default", p.default_value}});
    }
    ops.push_back({{"type", s.type.id},
                   {"name", s.name},
                   {"inputs", s.input_names},
                   {"outputs", s.output_names},
                   {"generator", s.is_generator},
                   {"output_marker", s.is_output_marker},
                   {"channel", s.output_channel},
                   {"params", params}});
  }
  return {{"version", library.version()}, {"hash", hex64(library.hash())}, {"operators", ops}};
}

}  // namespace matformer
