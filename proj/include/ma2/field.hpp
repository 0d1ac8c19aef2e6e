#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ma2/geometry.hpp"

namespace ma2 {

// Row-major-indexed grayscale grid in [0,1]; cell (row v, col u).
using GrayImage = Eigen::ArrayXXd;

struct DimensionMismatch : std::invalid_argument {
  DimensionMismatch() : std::invalid_argument("image/field dimensions differ") {}
};

struct FieldConfig {
  double sigma = 3.0;  // Gaussian width, pixels
  double floor = 0.0;  // additive baseline in [0,1)
  int stride = 1;      // trace subsampling

  void validate() const {
    if (sigma <= 0.0) throw std::invalid_argument("FieldConfig: sigma must be > 0");
    if (floor < 0.0 || floor >= 1.0)
      throw std::invalid_argument("FieldConfig: floor must be in [0,1)");
    if (stride < 1) throw std::invalid_argument("FieldConfig: stride must be >= 1");
  }
};

// Clamped focus field plus the pre-clamp Gaussian accumulator; the
// accumulator is what makes incremental extension exact.
struct FocusField {
  Eigen::ArrayXXd values;       // clamp(accumulator + floor, 0, 1)
  Eigen::ArrayXXd accumulator;  // unclamped sum of Gaussian maps

  static FocusField empty(int width, int height, const FieldConfig& cfg);
};

// Dense Gaussian response of one trace point over the full grid; computed
// for every cell even when the center lies outside the frame.
Eigen::ArrayXXd gaussian_map(const Pixel& center, const FieldConfig& cfg,
                             int width, int height);

// Sum of Gaussian maps over the stride-subsampled trace, plus floor,
// clamped to [0,1]. Summation runs in ascending trace order.
FocusField render_field(const std::vector<Pixel>& trace2d, const FieldConfig& cfg,
                        int width, int height);

// Incremental counterpart: adds one point's Gaussian map to the
// accumulator and re-clamps.
FocusField extend_field(const FocusField& field, const Pixel& new_point,
                        const FieldConfig& cfg);

// Element-wise modulation of an image by the field.
GrayImage apply_field(const GrayImage& image, const FocusField& field);

// Nearest-cell rasterization of the trace polyline at intensity 1;
// consecutive points are joined by linearly interpolated segments,
// out-of-frame samples are skipped, intensities saturate at 1.
GrayImage rasterize_trace(const std::vector<Pixel>& trace2d, int width, int height);

// Stamps one additional segment (or a lone point when prev == nullptr)
// onto an existing raster; matches rasterize_trace built point by point.
void rasterize_extend(GrayImage& raster, const Pixel* prev, const Pixel& next);

}  // namespace ma2
