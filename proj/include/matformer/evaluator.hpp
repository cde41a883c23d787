#pragma once

#include <string>

#include "matformer/graph.hpp"
#include "matformer/image.hpp"

namespace matformer {

/// Material channels produced by a graph. Normal is RGB; albedo is RGB;
/// roughness, height and metallic are grayscale.
struct MaterialOutput {
  ChannelImage albedo;
  ChannelImage normal;
  ChannelImage roughness;
  ChannelImage height;
  ChannelImage metallic;

  const ChannelImage& channel(const std::string& name) const;
  ChannelImage& channel(const std::string& name);
};

/// Runs every kernel in topological order at `resolution` x `resolution`.
/// Unconnected input slots receive an all-zero grayscale image; unconnected
/// channels come back all zero. When several markers name the same channel
/// the lowest node id wins. Throws std::invalid_argument for a non-positive
/// resolution or an operator with no kernel.
MaterialOutput evaluate_graph(const MaterialGraph& graph, int resolution);

}  // namespace matformer
