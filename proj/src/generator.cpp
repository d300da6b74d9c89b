#include "segaug/generator.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "segaug/errors.hpp"
#include "segaug/fsio.hpp"
#include "segaug/pnm.hpp"
#include "segaug/rng.hpp"

namespace segaug {

Palette::Palette(std::map<std::uint8_t, Rgb> colors) : colors_(std::move(colors)) {
  if (colors_.empty()) {
    throw ValidationError("palette: empty");
  }
  std::map<Rgb, std::uint8_t> seen;
  for (const auto& [id, rgb] : colors_) {
    auto [it, inserted] = seen.emplace(rgb, id);
    if (!inserted) {
      throw ValidationError("palette: classes " + std::to_string(it->second) +
                            " and " + std::to_string(id) +
                            " share a color; palette must be injective");
    }
  }
}

namespace {

struct NamedColor {
  const char* name;
  Rgb rgb;
};

// Cityscapes convention colors.
constexpr NamedColor kCityscapesColors[] = {
    {"road", {128, 64, 128}},     {"sidewalk", {244, 35, 232}},
    {"building", {70, 70, 70}},   {"wall", {102, 102, 156}},
    {"fence", {190, 153, 153}},   {"pole", {153, 153, 153}},
    {"traffic light", {250, 170, 30}}, {"traffic sign", {220, 220, 0}},
    {"vegetation", {107, 142, 35}},    {"terrain", {152, 251, 152}},
    {"sky", {70, 130, 180}},      {"person", {220, 20, 60}},
    {"rider", {255, 0, 0}},       {"car", {0, 0, 142}},
    {"truck", {0, 0, 70}},        {"bus", {0, 60, 100}},
    {"train", {0, 80, 100}},      {"motorcycle", {0, 0, 230}},
    {"bicycle", {119, 11, 32}},
};

}  // namespace

Palette Palette::defaults_for(const ClassTable& table) {
  std::map<std::uint8_t, Rgb> colors;
  colors[table.ignore_id()] = {0, 0, 0};

  std::map<Rgb, bool> taken;
  taken[{0, 0, 0}] = true;

  for (const auto& e : table.entries()) {
    Rgb rgb{0, 0, 0};
    bool found = false;
    for (const auto& nc : kCityscapesColors) {
      if (e.name == nc.name) {
        rgb = nc.rgb;
        found = true;
        break;
      }
    }
    if (!found || taken.count(rgb)) {
      // Deterministic distinct fallback derived from the id.
      std::uint64_t h = mix64(0xC0109000ULL ^ e.id);
      do {
        rgb = {std::uint8_t(h & 0xff), std::uint8_t((h >> 8) & 0xff),
               std::uint8_t((h >> 16) & 0xff)};
        h = mix64(h);
      } while (taken.count(rgb));
    }
    taken[rgb] = true;
    colors[e.id] = rgb;
  }
  return Palette(std::move(colors));
}

Palette Palette::from_json(const Json& j) {
  std::map<std::uint8_t, Rgb> colors;
  for (const auto& c : require_key(j, "colors", "palette")) {
    int id = require_key(c, "id", "palette entry").get<int>();
    if (id < 0 || id > 255) {
      throw ValidationError("palette: id out of range: " + std::to_string(id));
    }
    const auto& rgb = require_key(c, "rgb", "palette entry");
    if (!rgb.is_array() || rgb.size() != 3) {
      throw ValidationError("palette: rgb must be a 3-element array");
    }
    int r = rgb.at(0).get<int>(), g = rgb.at(1).get<int>(), b = rgb.at(2).get<int>();
    for (int v : {r, g, b}) {
      if (v < 0 || v > 255) {
        throw ValidationError("palette: channel out of range 0..255");
      }
    }
    colors[std::uint8_t(id)] = {std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)};
  }
  return Palette(std::move(colors));
}

Json Palette::to_json() const {
  Json colors = Json::array();
  for (const auto& [id, rgb] : colors_) {
    colors.push_back({{"id", id}, {"rgb", {rgb.r, rgb.g, rgb.b}}});
  }
  return Json{{"colors", std::move(colors)}};
}

Rgb Palette::color_of(std::uint8_t id) const {
  auto it = colors_.find(id);
  if (it == colors_.end()) {
    throw ValidationError("palette: no color for class id " + std::to_string(id));
  }
  return it->second;
}

RenderedImage RenderedImage::filled(int width, int height, Rgb color) {
  if (width < 1 || height < 1) {
    throw ValidationError("image: width and height must be >= 1");
  }
  RenderedImage img;
  img.width = width;
  img.height = height;
  img.data.resize(3 * std::size_t(width) * height);
  for (std::size_t i = 0; i < img.data.size(); i += 3) {
    img.data[i] = color.r;
    img.data[i + 1] = color.g;
    img.data[i + 2] = color.b;
  }
  return img;
}

RenderedImage render_palette(const LabelMap& map, const Palette& palette,
                             double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) {
    throw ValidationError("render_palette: noise_sigma must be >= 0");
  }
  RenderedImage img;
  img.width = map.width;
  img.height = map.height;
  img.data.resize(3 * map.data.size());

  // Resolve colors once; also surfaces missing palette entries up front.
  Rgb lut[256];
  bool have[256] = {};
  for (std::uint8_t v : map.data) {
    if (!have[v]) {
      lut[v] = palette.color_of(v);
      have[v] = true;
    }
  }

  Rng rng(seed);
  std::size_t o = 0;
  for (std::uint8_t v : map.data) {
    const Rgb& c = lut[v];
    if (noise_sigma == 0.0) {
      img.data[o] = c.r;
      img.data[o + 1] = c.g;
      img.data[o + 2] = c.b;
    } else {
      const int channels[3] = {c.r, c.g, c.b};
      for (int k = 0; k < 3; ++k) {
        double noisy = channels[k] + rng.normal(0.0, noise_sigma);
        long q = std::lround(noisy);
        img.data[o + k] = std::uint8_t(std::clamp(q, 0L, 255L));
      }
    }
    o += 3;
  }
  return img;
}

LabelMap invert_palette(const RenderedImage& image, const Palette& palette) {
  LabelMap map;
  map.width = image.width;
  map.height = image.height;
  map.data.resize(std::size_t(image.width) * image.height);

  std::map<Rgb, std::uint8_t> exact;
  for (const auto& [id, rgb] : palette.colors()) {
    exact.emplace(rgb, id);
  }

  for (std::size_t i = 0; i < map.data.size(); ++i) {
    Rgb px{image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]};
    auto hit = exact.find(px);
    if (hit != exact.end()) {
      map.data[i] = hit->second;
      continue;
    }
    long best = -1;
    std::uint8_t best_id = 0;
    for (const auto& [id, rgb] : palette.colors()) {
      long dr = long(px.r) - rgb.r, dg = long(px.g) - rgb.g, db = long(px.b) - rgb.b;
      long d = dr * dr + dg * dg + db * db;
      if (best < 0 || d < best) {  // map iteration is id-ascending: ties keep lowest
        best = d;
        best_id = id;
      }
    }
    map.data[i] = best_id;
  }
  return map;
}

namespace {

std::string substitute_all(std::string tmpl, const std::string& key,
                           const std::string& value) {
  std::size_t pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    tmpl.replace(pos, key.size(), value);
    pos += value.size();
  }
  return tmpl;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

struct TempDirGuard {
  std::filesystem::path path;
  explicit TempDirGuard(std::filesystem::path p) : path(std::move(p)) {}
  ~TempDirGuard() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

std::filesystem::path make_temp_dir() {
  static std::atomic<std::uint64_t> counter{0};
  auto base = std::filesystem::temp_directory_path();
  auto dir = base / ("segaug-gen-" + std::to_string(::getpid()) + "-" +
                     std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir;
}

std::string log_tail(const std::filesystem::path& log_path) {
  std::error_code ec;
  if (!std::filesystem::exists(log_path, ec)) return "";
  std::string text;
  try {
    text = read_text(log_path);
  } catch (const Error&) {
    return "";
  }
  constexpr std::size_t kMax = 512;
  if (text.size() > kMax) text = "..." + text.substr(text.size() - kMax);
  return text;
}

// Run through the shell with stdout/stderr captured; returns the exit code
// or throws GeneratorError on timeout.
int run_with_timeout(const std::string& command, double timeout_s,
                     const std::filesystem::path& log_path) {
  pid_t pid = ::fork();
  if (pid < 0) {
    throw GeneratorError("render_external: fork failed");
  }
  if (pid == 0) {
    if (::freopen(log_path.c_str(), "w", stdout) != nullptr) {
      ::dup2(::fileno(stdout), ::fileno(stderr));
    }
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }

  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(timeout_s));
  int status = 0;
  for (;;) {
    pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) {
      throw GeneratorError("render_external: waitpid failed");
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw GeneratorError("render_external: generator timed out after " +
                           std::to_string(timeout_s) + "s: " + command);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFSIGNALED(status)) {
    throw GeneratorError("render_external: generator killed by signal " +
                         std::to_string(WTERMSIG(status)));
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

RenderedImage render_external(const LabelMap& map, const ExternalGenerator& gen) {
  if (gen.command_template.find("{in}") == std::string::npos ||
      gen.command_template.find("{out}") == std::string::npos) {
    throw GeneratorError(
        "render_external: command template must contain {in} and {out}");
  }
  if (gen.timeout_s <= 0.0) {
    throw GeneratorError("render_external: timeout must be > 0");
  }

  TempDirGuard tmp(make_temp_dir());
  auto in_path = tmp.path / "in.pgm";
  auto out_path = tmp.path / "out.ppm";
  auto log_path = tmp.path / "generator.log";
  save_pgm_file(in_path, map);

  std::string command = gen.command_template;
  command = substitute_all(command, "{in}", shell_quote(in_path.string()));
  command = substitute_all(command, "{out}", shell_quote(out_path.string()));

  int exit_code = run_with_timeout(command, gen.timeout_s, log_path);
  if (exit_code != 0) {
    throw GeneratorError("render_external: generator exited with code " +
                         std::to_string(exit_code) + ": " + command +
                         "\noutput: " + log_tail(log_path));
  }

  RenderedImage img;
  try {
    img = load_ppm_file(out_path);
  } catch (const Error& e) {
    throw GeneratorError(std::string("render_external: generator output is "
                                     "not a valid PPM: ") +
                         e.what() + "\noutput: " + log_tail(log_path));
  }
  if (img.width != map.width || img.height != map.height) {
    throw GeneratorError(
        "render_external: generator returned " + std::to_string(img.width) +
        "x" + std::to_string(img.height) + " for a " +
        std::to_string(map.width) + "x" + std::to_string(map.height) +
        " label map");
  }
  return img;
}

}  // namespace segaug
