#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "matformer/graph.hpp"

namespace matformer {

/// Identifies one continuous parameter component: (operator, parameter, vector element).
struct QuantKey {
  int type = 0;
  int param = 0;
  int component = 0;
  auto operator<=>(const QuantKey&) const = default;
};

/// Uniform binning of continuous parameter components between observed
/// bounds. Level l covers [min + l*w, min + (l+1)*w) and dequantizes to its
/// centre.
class Quantizer {
 public:
  static constexpr int kDefaultLevels = 32;

  struct Bounds {
    double min = 0.0;
    double max = 1.0;
    bool widened = false;  // observed min == max; max was nudged up
  };

  explicit Quantizer(int levels = kDefaultLevels);

  /// Registers every continuous component of `library` with schema bounds,
  /// then narrows each to the values observed in `graphs` (only explicitly
  /// set, non-default values count).
  static Quantizer fit(const OperatorLibrary& library, std::span<const MaterialGraph> graphs,
                       int levels = kDefaultLevels);

  void set_bounds(QuantKey key, double min, double max);
  bool contains(QuantKey key) const { return bounds_.count(key) > 0; }
  const Bounds& bounds(QuantKey key) const;
  double bin_width(QuantKey key) const;
  int levels() const { return levels_; }

  /// Throws std::out_of_range for an unknown key. Values outside the bounds
  /// clamp to the first/last level.
  int quantize(double value, QuantKey key) const;
  double dequantize(int level, QuantKey key) const;

  std::string to_json() const;
  static Quantizer from_json(const std::string& text);
  std::uint64_t hash() const;

  const std::map<QuantKey, Bounds>& all() const { return bounds_; }

 private:
  int levels_;
  std::map<QuantKey, Bounds> bounds_;
};

}  // namespace matformer
