#include "segaug/pnm.hpp"

#include <string>

#include "segaug/errors.hpp"
#include "segaug/fsio.hpp"

namespace segaug {

namespace {

// Netpbm header scanner: whitespace-separated decimal tokens, '#' comments
// running to end of line.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void expect_magic(char digit) {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != digit) {
      throw DecodeError(std::string("pnm: bad magic, expected \"P") + digit +
                            "\"",
                        0);
    }
    pos_ = 2;
  }

  long next_int(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !is_digit(bytes_[pos_])) {
      throw DecodeError(std::string("pnm: expected ") + what, pos_);
    }
    long value = 0;
    while (pos_ < bytes_.size() && is_digit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) {
        throw DecodeError(std::string("pnm: ") + what + " out of range", pos_);
      }
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates the maxval from the payload.
  void consume_payload_separator() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
      throw DecodeError("pnm: expected whitespace before payload", pos_);
    }
    ++pos_;
  }

  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  static bool is_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  }
  static bool is_digit(std::uint8_t c) { return c >= '0' && c <= '9'; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct PnmHeader {
  int width = 0;
  int height = 0;
  std::span<const std::uint8_t> payload;
  std::size_t payload_offset = 0;
};

PnmHeader parse_header(std::span<const std::uint8_t> bytes, char digit) {
  HeaderReader r(bytes);
  r.expect_magic(digit);
  long w = r.next_int("width");
  long h = r.next_int("height");
  if (w < 1 || h < 1 || w * h > (1L << 30)) {
    throw DecodeError("pnm: unsupported dimensions " + std::to_string(w) + "x" +
                          std::to_string(h),
                      r.pos());
  }
  std::size_t maxval_pos = r.pos();
  long maxval = r.next_int("maxval");
  if (maxval != 255) {
    throw DecodeError("pnm: maxval must be 255, got " + std::to_string(maxval),
                      maxval_pos);
  }
  r.consume_payload_separator();
  return {static_cast<int>(w), static_cast<int>(h), r.rest(), r.pos()};
}

void check_payload(const PnmHeader& hd, std::size_t expected) {
  if (hd.payload.size() < expected) {
    throw DecodeError("pnm: truncated payload, expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(hd.payload.size()),
                      hd.payload_offset + hd.payload.size());
  }
  if (hd.payload.size() > expected) {
    throw DecodeError("pnm: trailing data after payload",
                      hd.payload_offset + expected);
  }
}

std::string canonical_header(char digit, int width, int height) {
  return std::string("P") + digit + "\n" + std::to_string(width) + " " +
         std::to_string(height) + "\n255\n";
}

}  // namespace

LabelMap load_pgm(std::span<const std::uint8_t> bytes) {
  PnmHeader hd = parse_header(bytes, '5');
  check_payload(hd, std::size_t(hd.width) * hd.height);
  LabelMap m;
  m.width = hd.width;
  m.height = hd.height;
  m.data.assign(hd.payload.begin(), hd.payload.end());
  return m;
}

std::vector<std::uint8_t> save_pgm(const LabelMap& map) {
  if (map.width < 1 || map.height < 1 ||
      map.data.size() != std::size_t(map.width) * map.height) {
    throw ValidationError("save_pgm: inconsistent label map dimensions");
  }
  std::string header = canonical_header('5', map.width, map.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), map.data.begin(), map.data.end());
  return out;
}

RenderedImage load_ppm(std::span<const std::uint8_t> bytes) {
  PnmHeader hd = parse_header(bytes, '6');
  check_payload(hd, 3 * std::size_t(hd.width) * hd.height);
  RenderedImage img;
  img.width = hd.width;
  img.height = hd.height;
  img.data.assign(hd.payload.begin(), hd.payload.end());
  return img;
}

std::vector<std::uint8_t> save_ppm(const RenderedImage& image) {
  if (image.width < 1 || image.height < 1 ||
      image.data.size() != 3 * std::size_t(image.width) * image.height) {
    throw ValidationError("save_ppm: inconsistent image dimensions");
  }
  std::string header = canonical_header('6', image.width, image.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

LabelMap load_pgm_file(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  try {
    return load_pgm(bytes);
  } catch (const DecodeError& e) {
    // e.what() already carries the byte offset.
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_pgm_file(const std::filesystem::path& path, const LabelMap& map) {
  write_bytes(path, save_pgm(map));
}

RenderedImage load_ppm_file(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  try {
    return load_ppm(bytes);
  } catch (const DecodeError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_ppm_file(const std::filesystem::path& path,
                   const RenderedImage& image) {
  write_bytes(path, save_ppm(image));
}

}  // namespace segaug
