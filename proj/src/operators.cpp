#include "matformer/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace matformer {

const std::vector<double>& ParamReader::get(std::string_view name) const {
  const int k = schema_.param_index(name);
  if (k < 0) throw std::logic_error(schema_.name + " has no parameter " + std::string(name));
  return values_[k];
}

namespace {

constexpr float kPi = std::numbers::pi_v<float>;

ParamSchema scalar(std::string name, double lo, double hi, double def) {
  return {std::move(name), ParamKind::scalar, 1, false, lo, hi, {def}};
}
ParamSchema discrete(std::string name, int lo, int hi, int def) {
  return {std::move(name), ParamKind::scalar, 1, true, double(lo), double(hi), {double(def)}};
}
ParamSchema vec(std::string name, double lo, double hi, std::vector<double> def) {
  const int dim = static_cast<int>(def.size());
  return {std::move(name), ParamKind::vector, dim, false, lo, hi, std::move(def)};
}
ParamSchema array(std::string name, int dim, double lo, double hi, std::vector<double> def) {
  return {std::move(name), ParamKind::array, dim, false, lo, hi, std::move(def)};
}

float fract(float v) { return v - std::floor(v); }

float smoothstep(float a, float b, float x) {
  if (b <= a) return x >= a ? 1.0f : 0.0f;
  const float t = std::clamp((x - a) / (b - a), 0.0f, 1.0f);
  return t * t * (3.0f - 2.0f * t);
}

uint32_t hash3(int x, int y, int seed) {
  uint32_t h = static_cast<uint32_t>(x) * 0x8da6b343u ^ static_cast<uint32_t>(y) * 0xd8163841u ^
               static_cast<uint32_t>(seed) * 0xcb1ab31fu;
  h ^= h >> 13;
  h *= 0x5bd1e995u;
  h ^= h >> 15;
  return h;
}

float hash01(int x, int y, int seed) { return static_cast<float>(hash3(x, y, seed) & 0xffffffu) / 16777216.0f; }

int wrap(int v, int n) { return ((v % n) + n) % n; }

template <typename F>
ChannelImage generate(int res, F&& f) {
  ChannelImage out(res, res, 1);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      out.at(x, y) = f((x + 0.5f) / res, (y + 0.5f) / res);
    }
  }
  return out;
}

template <typename F>
ChannelImage pointwise(const ChannelImage& in, F&& f) {
  ChannelImage out = in;
  for (auto& v : out.data) v = f(v);
  return out;
}

ChannelImage box_blur(const ChannelImage& in, int radius) {
  if (radius <= 0) return in;
  const float norm = 1.0f / (2 * radius + 1);
  ChannelImage tmp(in.width, in.height, in.channels);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int c = 0; c < in.channels; ++c) {
        float s = 0;
        for (int d = -radius; d <= radius; ++d) s += in.wrapped(x + d, y, c);
        tmp.at(x, y, c) = s * norm;
      }
    }
  }
  ChannelImage out(in.width, in.height, in.channels);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int c = 0; c < in.channels; ++c) {
        float s = 0;
        for (int d = -radius; d <= radius; ++d) s += tmp.wrapped(x, y + d, c);
        out.at(x, y, c) = s * norm;
      }
    }
  }
  return out;
}

/// Samples `in` at texture coordinates (u,v) with wrap-around, nearest pixel.
float sample(const ChannelImage& in, float u, float v, int c) {
  const int x = static_cast<int>(std::floor(u * in.width));
  const int y = static_cast<int>(std::floor(v * in.height));
  return in.wrapped(x, y, c);
}

template <typename F>
ChannelImage remap(const ChannelImage& in, F&& coords) {
  ChannelImage out(in.width, in.height, in.channels);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const auto [u, v] = coords(x, y);
      for (int c = 0; c < in.channels; ++c) out.at(x, y, c) = sample(in, u, v, c);
    }
  }
  return out;
}

float value_noise(float u, float v, int cells, int seed) {
  const float fx = u * cells, fy = v * cells;
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const float tx = fx - x0, ty = fy - y0;
  const float sx = tx * tx * (3 - 2 * tx), sy = ty * ty * (3 - 2 * ty);
  auto corner = [&](int dx, int dy) { return hash01(wrap(x0 + dx, cells), wrap(y0 + dy, cells), seed); };
  const float a = corner(0, 0) + (corner(1, 0) - corner(0, 0)) * sx;
  const float b = corner(0, 1) + (corner(1, 1) - corner(0, 1)) * sx;
  return a + (b - a) * sy;
}

std::array<float, 3> rgb_to_hsl(float r, float g, float b) {
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const float l = 0.5f * (mx + mn);
  if (mx - mn < 1e-6f) return {0.0f, 0.0f, l};
  const float d = mx - mn;
  const float s = l > 0.5f ? d / (2.0f - mx - mn) : d / (mx + mn);
  float h;
  if (mx == r) {
    h = (g - b) / d + (g < b ? 6.0f : 0.0f);
  } else if (mx == g) {
    h = (b - r) / d + 2.0f;
  } else {
    h = (r - g) / d + 4.0f;
  }
  return {h / 6.0f, s, l};
}

float hue_channel(float p, float q, float t) {
  t = fract(t);
  if (t < 1.0f / 6) return p + (q - p) * 6 * t;
  if (t < 0.5f) return q;
  if (t < 2.0f / 3) return p + (q - p) * (2.0f / 3 - t) * 6;
  return p;
}

std::array<float, 3> hsl_to_rgb(float h, float s, float l) {
  if (s <= 0) return {l, l, l};
  const float q = l < 0.5f ? l * (1 + s) : l + s - l * s;
  const float p = 2 * l - q;
  return {hue_channel(p, q, h + 1.0f / 3), hue_channel(p, q, h), hue_channel(p, q, h - 1.0f / 3)};
}

using Images = std::vector<ChannelImage>;
using Inputs = std::span<const ChannelImage>;

OperatorSchema make_schema(std::string name, std::vector<std::string> inputs, std::vector<std::string> outputs,
                           std::vector<ParamSchema> params) {
  OperatorSchema s;
  s.name = std::move(name);
  s.num_input_slots = static_cast<int>(inputs.size());
  s.num_output_slots = static_cast<int>(outputs.size());
  s.input_names = std::move(inputs);
  s.output_names = std::move(outputs);
  s.params = std::move(params);
  std::sort(s.params.begin(), s.params.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  s.is_generator = s.num_input_slots == 0;
  return s;
}

std::vector<OperatorKernel> build_kernels() {
  std::vector<OperatorKernel> k;
  auto add = [&](std::string name, std::vector<std::string> in, std::vector<std::string> out,
                 std::vector<ParamSchema> params, KernelFn fn) {
    k.push_back({make_schema(std::move(name), std::move(in), std::move(out), std::move(params)), std::move(fn)});
  };

  // Generators.
  add("uniform_color", {}, {"output"}, {vec("color", 0, 1, {0.5, 0.5, 0.5})},
      [](Inputs, const ParamReader& p, int res) {
        const auto& c = p.vec("color");
        ChannelImage out(res, res, 3);
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<float>(c[i % 3]);
        return Images{out};
      });
  add("uniform_gray", {}, {"output"}, {scalar("value", 0, 1, 0.5)}, [](Inputs, const ParamReader& p, int res) {
    return Images{ChannelImage(res, res, 1, static_cast<float>(p.scalar("value")))};
  });
  add("checker", {}, {"output"}, {discrete("tiles", 1, 16, 4)}, [](Inputs, const ParamReader& p, int res) {
    const int tiles = p.integer("tiles");
    return Images{generate(res, [&](float u, float v) {
      const int cx = static_cast<int>(std::floor(u * tiles)), cy = static_cast<int>(std::floor(v * tiles));
      return static_cast<float>((cx + cy) % 2);
    })};
  });
  add("brick", {}, {"output"},
      {scalar("bevel", 0, 0.5, 0.1), discrete("columns", 1, 16, 4), scalar("gap", 0, 0.3, 0.05),
       scalar("offset", 0, 1, 0.5), discrete("rows", 1, 16, 8)},
      [](Inputs, const ParamReader& p, int res) {
        const int rows = p.integer("rows"), cols = p.integer("columns");
        const float gap = static_cast<float>(p.scalar("gap")), bevel = static_cast<float>(p.scalar("bevel"));
        const float offset = static_cast<float>(p.scalar("offset"));
        return Images{generate(res, [&](float u, float v) {
          const float fy = v * rows;
          const int row = static_cast<int>(std::floor(fy));
          const float fx = u * cols + (row % 2) * offset;
          const float lu = fract(fx), lv = fy - row;
          const float edge = std::min({lu, 1 - lu, lv, 1 - lv}) - gap * 0.5f;
          if (edge <= 0) return 0.0f;
          return bevel <= 0 ? 1.0f : std::min(1.0f, edge / bevel);
        })};
      });
  add("value_noise", {}, {"output"},
      {discrete("octaves", 1, 6, 3), scalar("persistence", 0, 1, 0.5), discrete("scale", 1, 32, 4),
       discrete("seed", 0, 31, 0)},
      [](Inputs, const ParamReader& p, int res) {
        const int octaves = p.integer("octaves"), scale = p.integer("scale"), seed = p.integer("seed");
        const float persistence = static_cast<float>(p.scalar("persistence"));
        return Images{generate(res, [&](float u, float v) {
          float sum = 0, amp = 1, norm = 0;
          int cells = scale;
          for (int o = 0; o < octaves; ++o) {
            sum += amp * value_noise(u, v, cells, seed * 7 + o);
            norm += amp;
            amp *= persistence;
            cells *= 2;
          }
          return norm > 0 ? sum / norm : 0.0f;
        })};
      });
  add("gradient_ramp", {}, {"output"}, {scalar("angle", 0, 1, 0), discrete("repeat", 1, 8, 1)},
      [](Inputs, const ParamReader& p, int res) {
        const float a = static_cast<float>(p.scalar("angle")) * 2 * kPi;
        const int rep = p.integer("repeat");
        return Images{generate(res, [&](float u, float v) {
          const float t = (u - 0.5f) * std::cos(a) + (v - 0.5f) * std::sin(a);
          return fract(t * rep + 0.5f);
        })};
      });
  add("polygon", {}, {"output"},
      {scalar("radius", 0, 1, 0.4), scalar("rotation", 0, 1, 0), discrete("sides", 3, 12, 6),
       scalar("softness", 0, 1, 0.05)},
      [](Inputs, const ParamReader& p, int res) {
        const float radius = static_cast<float>(p.scalar("radius")), soft = static_cast<float>(p.scalar("softness"));
        const float rot = static_cast<float>(p.scalar("rotation")) * 2 * kPi;
        const int sides = p.integer("sides");
        const float sector = 2 * kPi / sides;
        return Images{generate(res, [&](float u, float v) {
          const float dx = u - 0.5f, dy = v - 0.5f;
          const float ang = std::atan2(dy, dx) - rot;
          const float local = ang - sector * std::floor(ang / sector) - sector * 0.5f;
          const float dist = std::hypot(dx, dy) * std::cos(local) / std::cos(sector * 0.5f);
          return 1.0f - smoothstep(radius - soft * 0.5f, radius + soft * 0.5f + 1e-6f, dist);
        })};
      });
  add("cell_noise", {}, {"distance", "cell"},
      {scalar("jitter", 0, 1, 0.8), discrete("scale", 1, 32, 6), discrete("seed", 0, 31, 0)},
      [](Inputs, const ParamReader& p, int res) {
        const int cells = p.integer("scale"), seed = p.integer("seed");
        const float jitter = static_cast<float>(p.scalar("jitter"));
        ChannelImage dist(res, res, 1), cell(res, res, 1);
        for (int y = 0; y < res; ++y) {
          for (int x = 0; x < res; ++x) {
            const float fx = (x + 0.5f) / res * cells, fy = (y + 0.5f) / res * cells;
            const int cx = static_cast<int>(std::floor(fx)), cy = static_cast<int>(std::floor(fy));
            float best = 1e9f;
            float best_id = 0;
            for (int oy = -1; oy <= 1; ++oy) {
              for (int ox = -1; ox <= 1; ++ox) {
                const int gx = cx + ox, gy = cy + oy;
                const int wx = wrap(gx, cells), wy = wrap(gy, cells);
                const float px = gx + 0.5f + jitter * (hash01(wx, wy, seed) - 0.5f);
                const float py = gy + 0.5f + jitter * (hash01(wx, wy, seed + 97) - 0.5f);
                const float d = std::hypot(fx - px, fy - py);
                if (d < best) {
                  best = d;
                  best_id = hash01(wx, wy, seed + 31);
                }
              }
            }
            dist.at(x, y) = std::min(1.0f, best / 1.2f);
            cell.at(x, y) = best_id;
          }
        }
        return Images{dist, cell};
      });
  add("stripes", {}, {"output"},
      {scalar("angle", 0, 1, 0), discrete("count", 1, 32, 8), scalar("width", 0, 1, 0.5)},
      [](Inputs, const ParamReader& p, int res) {
        const float a = static_cast<float>(p.scalar("angle")) * 2 * kPi;
        const int count = p.integer("count");
        const float width = static_cast<float>(p.scalar("width"));
        return Images{generate(res, [&](float u, float v) {
          const float t = u * std::cos(a) + v * std::sin(a);
          return fract(t * count) < width ? 1.0f : 0.0f;
        })};
      });

  // Filters.
  add("invert", {"input"}, {"output"}, {},
      [](Inputs in, const ParamReader&, int) { return Images{pointwise(in[0], [](float v) { return 1.0f - v; })}; });
  add("levels", {"input"}, {"output"},
      {scalar("gamma", 0.1, 4, 1), scalar("in_high", 0, 1, 1), scalar("in_low", 0, 1, 0), scalar("out_high", 0, 1, 1),
       scalar("out_low", 0, 1, 0)},
      [](Inputs in, const ParamReader& p, int) {
        const float il = static_cast<float>(p.scalar("in_low")), ih = static_cast<float>(p.scalar("in_high"));
        const float ol = static_cast<float>(p.scalar("out_low")), oh = static_cast<float>(p.scalar("out_high"));
        const float g = static_cast<float>(p.scalar("gamma"));
        return Images{pointwise(in[0], [&](float v) {
          float t = ih > il ? std::clamp((v - il) / (ih - il), 0.0f, 1.0f) : (v >= il ? 1.0f : 0.0f);
          t = std::pow(t, 1.0f / g);
          return ol + t * (oh - ol);
        })};
      });
  add("blur", {"input"}, {"output"}, {scalar("intensity", 0, 1, 0.2)}, [](Inputs in, const ParamReader& p, int) {
    const int radius = static_cast<int>(std::lround(p.scalar("intensity") * in[0].width / 16.0));
    return Images{box_blur(in[0], radius)};
  });
  add("sharpen", {"input"}, {"output"}, {scalar("intensity", 0, 4, 1)}, [](Inputs in, const ParamReader& p, int) {
    const auto soft = box_blur(in[0], 1);
    const float k = static_cast<float>(p.scalar("intensity"));
    ChannelImage out = in[0];
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += k * (in[0].data[i] - soft.data[i]);
    return Images{out};
  });
  add("transform_2d", {"input"}, {"output"},
      {vec("offset", -1, 1, {0, 0}), scalar("rotation", 0, 1, 0), vec("scale", 0.25, 4, {1, 1})},
      [](Inputs in, const ParamReader& p, int) {
        const auto& off = p.vec("offset");
        const auto& sc = p.vec("scale");
        const float r = static_cast<float>(p.scalar("rotation")) * 2 * kPi;
        const float c = std::cos(r), s = std::sin(r);
        const int w = in[0].width, h = in[0].height;
        return Images{remap(in[0], [&](int x, int y) {
          const float u = (x + 0.5f) / w - 0.5f - static_cast<float>(off[0]);
          const float v = (y + 0.5f) / h - 0.5f - static_cast<float>(off[1]);
          const float ru = (c * u + s * v) / static_cast<float>(sc[0]);
          const float rv = (-s * u + c * v) / static_cast<float>(sc[1]);
          return std::pair{ru + 0.5f, rv + 0.5f};
        })};
      });
  add("tile", {"input"}, {"output"}, {discrete("x_count", 1, 8, 2), discrete("y_count", 1, 8, 2)},
      [](Inputs in, const ParamReader& p, int) {
        const int nx = p.integer("x_count"), ny = p.integer("y_count");
        const int w = in[0].width, h = in[0].height;
        return Images{remap(in[0], [&](int x, int y) {
          return std::pair{fract((x + 0.5f) / w * nx), fract((y + 0.5f) / h * ny)};
        })};
      });
  add("warp", {"input", "gradient"}, {"output"}, {scalar("intensity", 0, 1, 0.1)},
      [](Inputs in, const ParamReader& p, int) {
        const auto g = to_gray(in[1]);
        const float k = static_cast<float>(p.scalar("intensity"));
        const int w = in[0].width, h = in[0].height;
        return Images{remap(in[0], [&](int x, int y) {
          const float dx = 0.5f * (g.wrapped(x + 1, y) - g.wrapped(x - 1, y));
          const float dy = 0.5f * (g.wrapped(x, y + 1) - g.wrapped(x, y - 1));
          return std::pair{(x + 0.5f) / w + k * dx * w / 16.0f, (y + 0.5f) / h + k * dy * h / 16.0f};
        })};
      });
  add("blend", {"foreground", "background"}, {"output"}, {discrete("mode", 0, 5, 0), scalar("opacity", 0, 1, 0.5)},
      [](Inputs in, const ParamReader& p, int) {
        const bool color = in[0].channels == 3 || in[1].channels == 3;
        const auto fg = color ? to_rgb(in[0]) : in[0];
        const auto bg = color ? to_rgb(in[1]) : in[1];
        const int mode = p.integer("mode");
        const float o = static_cast<float>(p.scalar("opacity"));
        ChannelImage out = bg;
        for (size_t i = 0; i < out.data.size(); ++i) {
          const float f = fg.data[i], b = bg.data[i];
          float m = f;
          switch (mode) {
            case 1: m = f + b; break;
            case 2: m = b - f; break;
            case 3: m = f * b; break;
            case 4: m = std::max(f, b); break;
            case 5: m = std::min(f, b); break;
            default: break;
          }
          out.data[i] = b * (1 - o) + m * o;
        }
        return Images{out};
      });
  add("mask_blend", {"foreground", "background", "mask"}, {"output"}, {scalar("opacity", 0, 1, 1)},
      [](Inputs in, const ParamReader& p, int) {
        const bool color = in[0].channels == 3 || in[1].channels == 3;
        const auto fg = color ? to_rgb(in[0]) : in[0];
        const auto bg = color ? to_rgb(in[1]) : in[1];
        const auto mask = to_gray(in[2]);
        const float o = static_cast<float>(p.scalar("opacity"));
        ChannelImage out = bg;
        const int ch = out.channels;
        for (size_t i = 0; i < out.data.size(); ++i) {
          const float m = mask.data[i / ch] * o;
          out.data[i] = bg.data[i] * (1 - m) + fg.data[i] * m;
        }
        return Images{out};
      });
  add("to_grayscale", {"input"}, {"output"}, {vec("weights", 0, 1, {0.299, 0.587, 0.114})},
      [](Inputs in, const ParamReader& p, int) {
        const auto rgb = to_rgb(in[0]);
        const auto& w = p.vec("weights");
        ChannelImage out(rgb.width, rgb.height, 1);
        for (size_t i = 0; i < out.data.size(); ++i) {
          out.data[i] = static_cast<float>(w[0] * rgb.data[3 * i] + w[1] * rgb.data[3 * i + 1] +
                                           w[2] * rgb.data[3 * i + 2]);
        }
        return Images{out};
      });
  add("to_color", {"input"}, {"output"}, {vec("tint", 0, 1, {1, 1, 1})}, [](Inputs in, const ParamReader& p, int) {
    const auto gray = to_gray(in[0]);
    const auto& t = p.vec("tint");
    ChannelImage out(gray.width, gray.height, 3);
    for (size_t i = 0; i < gray.data.size(); ++i) {
      for (int c = 0; c < 3; ++c) out.data[3 * i + c] = gray.data[i] * static_cast<float>(t[c]);
    }
    return Images{out};
  });
  add("threshold", {"input"}, {"output"}, {scalar("softness", 0, 0.5, 0), scalar("threshold", 0, 1, 0.5)},
      [](Inputs in, const ParamReader& p, int) {
        const float t = static_cast<float>(p.scalar("threshold")), s = static_cast<float>(p.scalar("softness"));
        return Images{pointwise(in[0], [&](float v) { return smoothstep(t - s, t + s, v); })};
      });
  add("gradient_map", {"input"}, {"output"}, {array("colors", 3, 0, 1, {0, 0, 0, 1, 1, 1})},
      [](Inputs in, const ParamReader& p, int) {
        const auto gray = to_gray(in[0]);
        const auto& keys = p.vec("colors");
        const int n = static_cast<int>(keys.size() / 3);
        ChannelImage out(gray.width, gray.height, 3);
        for (size_t i = 0; i < gray.data.size(); ++i) {
          const float pos = std::clamp(gray.data[i], 0.0f, 1.0f) * (n - 1);
          const int a = std::min(static_cast<int>(pos), n - 1), b = std::min(a + 1, n - 1);
          const float t = pos - a;
          for (int c = 0; c < 3; ++c) {
            out.data[3 * i + c] = static_cast<float>(keys[3 * a + c] * (1 - t) + keys[3 * b + c] * t);
          }
        }
        return Images{out};
      });
  add("normal_from_height", {"height"}, {"normal"}, {scalar("intensity", 0, 16, 1)},
      [](Inputs in, const ParamReader& p, int) {
        const auto h = to_gray(in[0]);
        const float k = static_cast<float>(p.scalar("intensity")) / 16.0f;
        ChannelImage out(h.width, h.height, 3);
        for (int y = 0; y < h.height; ++y) {
          for (int x = 0; x < h.width; ++x) {
            const float dx = 0.5f * (h.wrapped(x + 1, y) - h.wrapped(x - 1, y)) * h.width * k;
            const float dy = 0.5f * (h.wrapped(x, y + 1) - h.wrapped(x, y - 1)) * h.height * k;
            const float len = std::sqrt(dx * dx + dy * dy + 1.0f);
            out.at(x, y, 0) = 0.5f * (-dx / len) + 0.5f;
            out.at(x, y, 1) = 0.5f * (-dy / len) + 0.5f;
            out.at(x, y, 2) = 0.5f * (1.0f / len) + 0.5f;
          }
        }
        return Images{out};
      });
  add("height_from_grayscale", {"input"}, {"height"}, {scalar("contrast", 0, 4, 1), scalar("offset", -1, 1, 0)},
      [](Inputs in, const ParamReader& p, int) {
        const float c = static_cast<float>(p.scalar("contrast")), o = static_cast<float>(p.scalar("offset"));
        return Images{pointwise(to_gray(in[0]), [&](float v) { return (v - 0.5f) * c + 0.5f + o; })};
      });
  add("channel_merge", {"red", "green", "blue"}, {"output"}, {}, [](Inputs in, const ParamReader&, int) {
    const auto r = to_gray(in[0]), g = to_gray(in[1]), b = to_gray(in[2]);
    ChannelImage out(r.width, r.height, 3);
    for (size_t i = 0; i < r.data.size(); ++i) {
      out.data[3 * i] = r.data[i];
      out.data[3 * i + 1] = g.data[i];
      out.data[3 * i + 2] = b.data[i];
    }
    return Images{out};
  });
  add("channel_split", {"input"}, {"red", "green", "blue"}, {}, [](Inputs in, const ParamReader&, int) {
    const auto rgb = to_rgb(in[0]);
    Images out(3, ChannelImage(rgb.width, rgb.height, 1));
    for (size_t i = 0; i < out[0].data.size(); ++i) {
      for (int c = 0; c < 3; ++c) out[c].data[i] = rgb.data[3 * i + c];
    }
    return out;
  });
  add("hsl", {"input"}, {"output"},
      {scalar("hue", 0, 1, 0.5), scalar("lightness", 0, 1, 0.5), scalar("saturation", 0, 1, 0.5)},
      [](Inputs in, const ParamReader& p, int) {
        auto rgb = to_rgb(in[0]);
        const float dh = static_cast<float>(p.scalar("hue")) - 0.5f;
        const float ds = 2.0f * static_cast<float>(p.scalar("saturation"));
        const float dl = static_cast<float>(p.scalar("lightness")) - 0.5f;
        for (size_t i = 0; i < rgb.data.size(); i += 3) {
          auto [h, s, l] = rgb_to_hsl(rgb.data[i], rgb.data[i + 1], rgb.data[i + 2]);
          const auto c = hsl_to_rgb(fract(h + dh), std::clamp(s * ds, 0.0f, 1.0f), std::clamp(l + dl, 0.0f, 1.0f));
          for (int k = 0; k < 3; ++k) rgb.data[i + k] = c[k];
        }
        return Images{rgb};
      });
  add("edge_detect", {"input"}, {"output"}, {scalar("width", 0, 1, 0.2)}, [](Inputs in, const ParamReader& p, int) {
    const auto g = to_gray(in[0]);
    const float gain = 1.0f + 15.0f * static_cast<float>(p.scalar("width"));
    ChannelImage out(g.width, g.height, 1);
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        const float dx = g.wrapped(x + 1, y) - g.wrapped(x - 1, y);
        const float dy = g.wrapped(x, y + 1) - g.wrapped(x, y - 1);
        out.at(x, y) = gain * std::sqrt(dx * dx + dy * dy);
      }
    }
    return Images{out};
  });
  add("histogram_scan", {"input"}, {"output"}, {scalar("contrast", 0, 1, 0.5), scalar("position", 0, 1, 0.5)},
      [](Inputs in, const ParamReader& p, int) {
        const float pos = static_cast<float>(p.scalar("position"));
        const float gain = 1.0f + 20.0f * static_cast<float>(p.scalar("contrast"));
        return Images{pointwise(to_gray(in[0]), [&](float v) { return (v - pos) * gain + 0.5f; })};
      });

  // Output markers annotate the graph; the evaluator reads their input.
  for (const auto& channel : material_channels()) {
    OperatorSchema s = make_schema("output_" + channel, {"input"}, {}, {});
    s.is_output_marker = true;
    s.output_channel = channel;
    k.push_back({s, [](Inputs, const ParamReader&, int) { return Images{}; }});
  }
  for (size_t i = 0; i < k.size(); ++i) k[i].schema.type = OperatorType{static_cast<int>(i)};
  return k;
}

}  // namespace

const std::vector<OperatorKernel>& builtin_kernels() {
  static const std::vector<OperatorKernel> kernels = build_kernels();
  return kernels;
}

std::shared_ptr<const OperatorLibrary> builtin_library() {
  static const auto library = [] {
    std::vector<OperatorSchema> schemas;
    for (const auto& k : builtin_kernels()) schemas.push_back(k.schema);
    return std::make_shared<const OperatorLibrary>(kBuiltinLibraryVersion, std::move(schemas));
  }();
  return library;
}

const OperatorKernel* find_kernel(std::string_view name) {
  for (const auto& k : builtin_kernels()) {
    if (k.schema.name == name) return &k;
  }
  return nullptr;
}

}  // namespace matformer
