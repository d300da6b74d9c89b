#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "segaug/generator.hpp"
#include "segaug/labelmap.hpp"

namespace segaug {

// Binary netpbm codecs, maxval 255. PGM (P5) carries label maps, PPM (P6)
// carries rendered RGB images. Saving is canonical ("P5\n<w> <h>\n255\n" +
// payload), so load(save(m)) == m byte-for-byte on re-save. Loading accepts
// any standard whitespace/comment layout and reports failures with the byte
// offset.
LabelMap load_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> save_pgm(const LabelMap& map);

RenderedImage load_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> save_ppm(const RenderedImage& image);

LabelMap load_pgm_file(const std::filesystem::path& path);
void save_pgm_file(const std::filesystem::path& path, const LabelMap& map);
RenderedImage load_ppm_file(const std::filesystem::path& path);
void save_ppm_file(const std::filesystem::path& path, const RenderedImage& image);

}  // namespace segaug
