#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segaug/class_table.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"

namespace segaug {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  auto operator<=>(const Rgb&) const = default;
};

// Injective class-id -> color map (including the ignore id). Injectivity is
// what makes the palette renderer invertible.
class Palette {
 public:
  explicit Palette(std::map<std::uint8_t, Rgb> colors);

  // Cityscapes convention colors for every class in `table` whose name is
  // known, deterministic distinct fallback colors otherwise; ignore -> black.
  static Palette defaults_for(const ClassTable& table);

  static Palette from_json(const Json& j);
  Json to_json() const;

  bool contains(std::uint8_t id) const { return colors_.count(id) != 0; }
  Rgb color_of(std::uint8_t id) const;
  const std::map<std::uint8_t, Rgb>& colors() const { return colors_; }

 private:
  std::map<std::uint8_t, Rgb> colors_;
};

// Row-major RGB raster, 3 bytes per pixel.
struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static RenderedImage filled(int width, int height, Rgb color);

  const std::uint8_t* px(int x, int y) const {
    return data.data() + 3 * (std::size_t(y) * width + x);
  }
  std::uint8_t* px(int x, int y) {
    return data.data() + 3 * (std::size_t(y) * width + x);
  }

  bool operator==(const RenderedImage&) const = default;
};

// Deterministic stand-in for a learned label-to-image generator: palette
// color per class plus optional seeded Gaussian noise, rounded and clamped
// to [0, 255]. noise_sigma = 0 reproduces palette colors exactly.
RenderedImage render_palette(const LabelMap& map, const Palette& palette,
                             double noise_sigma, std::uint64_t seed);

// Nearest-color decode: exact palette match first, otherwise minimal squared
// RGB distance, ties to the lowest class id. Inverse of render_palette at
// noise_sigma = 0.
LabelMap invert_palette(const RenderedImage& image, const Palette& palette);

// Process-boundary contract for real generators: the label map is written as
// PGM to a temp file, `command_template` (with {in} and {out} substituted) is
// run through the shell, and the output is read back as a binary PPM whose
// dimensions must match the input.
struct ExternalGenerator {
  std::string command_template;
  double timeout_s = 300.0;
};

RenderedImage render_external(const LabelMap& map, const ExternalGenerator& gen);

}  // namespace segaug
