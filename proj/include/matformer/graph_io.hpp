#pragma once

#include <filesystem>
#include <json.hpp>
#include <memory>
#include <stdexcept>
#include <string>

#include "matformer/graph.hpp"

namespace matformer {

inline constexpr int kGraphFormatVersion = 1;

class GraphFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical graph document: sorted keys, nodes by id with sparse parameters
/// keyed by name, edges in sorted_edges() order.
nlohmann::json graph_to_json(const MaterialGraph& graph);
std::string graph_to_string(const MaterialGraph& graph);

/// Parses a graph document. Node ids may be any distinct integers; they are
/// renumbered 0..n-1 in ascending order. Throws GraphFormatError for malformed
/// documents or a library version mismatch and GraphError for invalid graphs.
MaterialGraph graph_from_json(const nlohmann::json& doc, std::shared_ptr<const OperatorLibrary> library);
MaterialGraph graph_from_string(const std::string& text, std::shared_ptr<const OperatorLibrary> library);

void save_graph(const MaterialGraph& graph, const std::filesystem::path& path);
MaterialGraph load_graph(const std::filesystem::path& path, std::shared_ptr<const OperatorLibrary> library);

/// Hex digest of the canonical document.
std::string graph_hash(const MaterialGraph& graph);

/// Operator schemas as a JSON document (names, slots, parameter specs).
nlohmann::json library_to_json(const OperatorLibrary& library);

std::string hex64(std::uint64_t v);

}  // namespace matformer
