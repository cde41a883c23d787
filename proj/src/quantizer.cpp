#include "matformer/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <stdexcept>

#include "matformer/hash.hpp"

namespace matformer {

Quantizer::Quantizer(int levels) : levels_(levels) {
  if (levels < 2) throw std::invalid_argument("quantizer needs at least two levels");
}

Quantizer Quantizer::fit(const OperatorLibrary& library, std::span<const MaterialGraph> graphs, int levels) {
  Quantizer q(levels);
  std::map<QuantKey, std::pair<double, double>> seen;
  for (const auto& g : graphs) {
    for (const auto& node : g.nodes()) {
      const auto& schema = library.schema(node.type);
      for (const auto& p : node.params) {
        const auto& ps = schema.params[p.param_index];
        if (ps.is_discrete) continue;
        for (size_t c = 0; c < p.values.size(); ++c) {
          const QuantKey key{node.type.id, p.param_index, static_cast<int>(c % ps.vector_dim)};
          auto [it, fresh] = seen.try_emplace(key, p.values[c], p.values[c]);
          if (!fresh) {
            it->second.first = std::min(it->second.first, p.values[c]);
            it->second.second = std::max(it->second.second, p.values[c]);
          }
        }
      }
    }
  }
  for (const auto& schema : library.schemas()) {
    for (size_t k = 0; k < schema.params.size(); ++k) {
      const auto& ps = schema.params[k];
      if (ps.is_discrete) continue;
      for (int c = 0; c < ps.vector_dim; ++c) {
        const QuantKey key{schema.type.id, static_cast<int>(k), c};
        if (auto it = seen.find(key); it != seen.end()) {
          q.set_bounds(key, it->second.first, it->second.second);
        } else {
          q.set_bounds(key, ps.min_value, ps.max_value);
        }
      }
    }
  }
  return q;
}

void Quantizer::set_bounds(QuantKey key, double min, double max) {
  if (!(min <= max)) throw std::invalid_argument("quantizer bounds must satisfy min <= max");
  Bounds b{min, max, false};
  if (min == max) {
    b.max = min + std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(min));
    b.widened = true;
  }
  bounds_[key] = b;
}

const Quantizer::Bounds& Quantizer::bounds(QuantKey key) const {
  auto it = bounds_.find(key);
  if (it == bounds_.end()) {
    throw std::out_of_range("no quantizer bounds for operator " + std::to_string(key.type) + " parameter " +
                            std::to_string(key.param) + " component " + std::to_string(key.component));
  }
  return it->second;
}

double Quantizer::bin_width(QuantKey key) const {
  const auto& b = bounds(key);
  return (b.max - b.min) / levels_;
}

int Quantizer::quantize(double value, QuantKey key) const {
  const auto& b = bounds(key);
  const double t = (value - b.min) / (b.max - b.min);
  const auto level = static_cast<long>(std::floor(t * levels_));
  return static_cast<int>(std::clamp<long>(level, 0, levels_ - 1));
}

double Quantizer::dequantize(int level, QuantKey key) const {
  const auto& b = bounds(key);
  if (level < 0 || level >= levels_) throw std::out_of_range("quantization level out of range");
  return b.min + (level + 0.5) * (b.max - b.min) / levels_;
}

std::string Quantizer::to_json() const {
  nlohmann::json j;
  j["levels"] = levels_;
  auto& entries = j["bounds"] = nlohmann::json::array();
  for (const auto& [k, b] : bounds_) {
    entries.push_back({k.type, k.param, k.component, b.min, b.max, b.widened});
  }
  return j.dump();
}

Quantizer Quantizer::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Quantizer q(j.at("levels").get<int>());
  for (const auto& e : j.at("bounds")) {
    const QuantKey key{e[0].get<int>(), e[1].get<int>(), e[2].get<int>()};
    q.bounds_[key] = Bounds{e[3].get<double>(), e[4].get<double>(), e[5].get<bool>()};
  }
  return q;
}

std::uint64_t Quantizer::hash() const { return fnv1a(to_json()); }

}  // namespace matformer
