#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace matformer {

/// Row-major grayscale (1 channel) or RGB (3 channel) image with values in [0,1].
struct ChannelImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  ChannelImage() = default;
  ChannelImage(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c = 0) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }

  /// Toroidal lookup; procedural materials tile.
  float wrapped(int x, int y, int c = 0) const {
    x %= width;
    y %= height;
    if (x < 0) x += width;
    if (y < 0) y += height;
    return at(x, y, c);
  }

  void clamp() {
    for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
  }

  bool operator==(const ChannelImage&) const = default;
};

ChannelImage to_gray(const ChannelImage& img);
ChannelImage to_rgb(const ChannelImage& img);
/// Nearest-neighbour resampling.
ChannelImage resize_nearest(const ChannelImage& img, int width, int height);
/// Rec. 601 luminance of a pixel.
float luminance(const ChannelImage& img, int x, int y);

void write_png(const ChannelImage& img, const std::filesystem::path& path);
std::string encode_png(const ChannelImage& img);
void write_ppm(const ChannelImage& img, const std::filesystem::path& path);
std::string base64_encode(const std::string& bytes);

}  // namespace matformer
