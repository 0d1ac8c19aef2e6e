#include "ma2/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace ma2 {

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

int to_byte(double v) {
  const double clamped = std::min(1.0, std::max(0.0, v));
  return static_cast<int>(std::lround(clamped * 255.0));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  __builtin_memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in) {
  const std::uint32_t bits = read_u32(in);
  float v;
  __builtin_memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void write_pgm(const GrayImage& image, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail("cannot open PGM for writing", path);
  out << (binary ? "P5" : "P2") << "\n"
      << image.cols() << " " << image.rows() << "\n255\n";
  for (Eigen::Index v = 0; v < image.rows(); ++v) {
    for (Eigen::Index u = 0; u < image.cols(); ++u) {
      const int byte = to_byte(image(v, u));
      if (binary) {
        out.put(static_cast<char>(byte));
      } else {
        out << byte << (u + 1 == image.cols() ? "\n" : " ");
      }
    }
  }
  if (!out) io_fail("failed writing PGM", path);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open PGM", path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") io_fail("not a P2/P5 PGM", path);
  long width, height, maxval;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    io_fail("malformed PGM header", path);
  }
  GrayImage image(height, width);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    for (Eigen::Index v = 0; v < height; ++v) {
      for (Eigen::Index u = 0; u < width; ++u) {
        const int c = in.get();
        if (c == EOF) io_fail("truncated PGM", path);
        image(v, u) = static_cast<double>(c) / maxval;
      }
    }
  } else {
    for (Eigen::Index v = 0; v < height; ++v) {
      for (Eigen::Index u = 0; u < width; ++u) {
        long c;
        in >> c;
        if (!in) io_fail("truncated PGM", path);
        image(v, u) = static_cast<double>(c) / maxval;
      }
    }
  }
  return image;
}

void write_float_raster(const GrayImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail("cannot open raster for writing", path);
  write_u32(out, static_cast<std::uint32_t>(image.cols()));
  write_u32(out, static_cast<std::uint32_t>(image.rows()));
  for (Eigen::Index v = 0; v < image.rows(); ++v) {
    for (Eigen::Index u = 0; u < image.cols(); ++u) {
      write_f32(out, static_cast<float>(image(v, u)));
    }
  }
  if (!out) io_fail("failed writing raster", path);
}

GrayImage read_float_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open raster", path);
  const std::uint32_t width = read_u32(in);
  const std::uint32_t height = read_u32(in);
  if (!in || width == 0 || height == 0) io_fail("malformed raster header", path);
  GrayImage image(height, width);
  for (std::uint32_t v = 0; v < height; ++v) {
    for (std::uint32_t u = 0; u < width; ++u) {
      image(v, u) = read_f32(in);
    }
  }
  if (!in) io_fail("truncated raster", path);
  return image;
}

}  // namespace ma2
