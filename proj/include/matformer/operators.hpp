#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "matformer/graph.hpp"
#include "matformer/image.hpp"

namespace matformer {

/// Read access to a node's full parameter assignment by parameter name.
class ParamReader {
 public:
  ParamReader(const OperatorSchema& schema, const std::vector<std::vector<double>>& values)
      : schema_(schema), values_(values) {}

  double scalar(std::string_view name) const { return get(name).front(); }
  int integer(std::string_view name) const { return static_cast<int>(get(name).front()); }
  const std::vector<double>& vec(std::string_view name) const { return get(name); }

 private:
  const std::vector<double>& get(std::string_view name) const;

  const OperatorSchema& schema_;
  const std::vector<std::vector<double>>& values_;
};

/// Pure image operator: input images (one per input slot, unconnected slots
/// receive an all-zero grayscale image) to one image per output slot.
using KernelFn =
    std::function<std::vector<ChannelImage>(std::span<const ChannelImage> inputs, const ParamReader& params, int resolution)>;

struct OperatorKernel {
  OperatorSchema schema;
  KernelFn eval;
};

inline constexpr const char* kBuiltinLibraryVersion = "matformer-synthetic-1";

/// Synthetic operator set: generators, filters and one output marker per
/// material channel.
const std::vector<OperatorKernel>& builtin_kernels();

/// Schemas of builtin_kernels(), shared.
std::shared_ptr<const OperatorLibrary> builtin_library();

/// Kernel for an operator name, or nullptr.
const OperatorKernel* find_kernel(std::string_view name);

inline const std::vector<std::string>& material_channels() {
  static const std::vector<std::string> names{"albedo", "height", "metallic", "normal", "roughness"};
  return names;
}

}  // namespace matformer
