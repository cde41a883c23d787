#include "matformer/evaluator.hpp"

#include <stdexcept>

#include "matformer/operators.hpp"

namespace matformer {

const ChannelImage& MaterialOutput::channel(const std::string& name) const {
  return const_cast<MaterialOutput*>(this)->channel(name);
}

ChannelImage& MaterialOutput::channel(const std::string& name) {
  if (name == "albedo") return albedo;
  if (name == "normal") return normal;
  if (name == "roughness") return roughness;
  if (name == "height") return height;
  if (name == "metallic") return metallic;
  throw std::invalid_argument("unknown material channel " + name);
}

MaterialOutput evaluate_graph(const MaterialGraph& graph, int resolution) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  const int n = graph.node_count();
  std::vector<const OperatorKernel*> kernels(n);
  for (int i = 0; i < n; ++i) {
    kernels[i] = find_kernel(graph.schema(i).name);
    if (!kernels[i]) throw std::invalid_argument("no kernel for operator " + graph.schema(i).name);
  }

  const ChannelImage zero(resolution, resolution, 1, 0.0f);
  std::vector<std::vector<ChannelImage>> outputs(n);
  MaterialOutput result;
  result.albedo = ChannelImage(resolution, resolution, 3);
  result.normal = ChannelImage(resolution, resolution, 3);
  result.roughness = zero;
  result.height = zero;
  result.metallic = zero;
  std::vector<NodeId> channel_owner(material_channels().size(), -1);

  for (NodeId id : topological_order(graph)) {
    const auto& schema = graph.schema(id);
    std::vector<ChannelImage> inputs;
    inputs.reserve(schema.num_input_slots);
    for (int s = 0; s < schema.num_input_slots; ++s) {
      const Edge* e = graph.incoming(id, s);
      inputs.push_back(e ? outputs[e->from.node][e->from.slot] : zero);
    }
    if (schema.is_output_marker) {
      const auto& names = material_channels();
      const auto slot = std::find(names.begin(), names.end(), schema.output_channel) - names.begin();
      if (channel_owner[slot] >= 0 && channel_owner[slot] < id) continue;
      channel_owner[slot] = id;
      auto& dst = result.channel(schema.output_channel);
      dst = dst.channels == 3 ? to_rgb(inputs[0]) : to_gray(inputs[0]);
      continue;
    }
    const auto values = graph.full_params(id);
    const ParamReader reader(schema, values);
    auto out = kernels[id]->eval(inputs, reader, resolution);
    if (static_cast<int>(out.size()) != schema.num_output_slots) {
      throw std::logic_error(schema.name + " produced the wrong number of outputs");
    }
    for (auto& img : out) img.clamp();
    outputs[id] = std::move(out);
  }
  return result;
}

}  // namespace matformer
