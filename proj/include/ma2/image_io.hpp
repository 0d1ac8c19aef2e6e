#pragma once

#include <string>

#include "ma2/field.hpp"

namespace ma2 {

// Plain portable graymap export, values scaled to 0..255. P5 is the
// binary default; P2 is ASCII for quick inspection.
void write_pgm(const GrayImage& image, const std::string& path, bool binary = true);

GrayImage read_pgm(const std::string& path);

// Exact float grid: 8-byte header (width,height as uint32 LE), then
// row-major little-endian float32 cells.
void write_float_raster(const GrayImage& image, const std::string& path);

GrayImage read_float_raster(const std::string& path);

}  // namespace ma2
