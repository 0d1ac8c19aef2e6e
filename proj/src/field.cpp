#include "ma2/field.hpp"

#include <cmath>

namespace ma2 {

FocusField FocusField::empty(int width, int height, const FieldConfig& cfg) {
  cfg.validate();
  FocusField f;
  f.accumulator = Eigen::ArrayXXd::Zero(height, width);
  f.values = Eigen::ArrayXXd::Constant(height, width, cfg.floor);
  return f;
}

Eigen::ArrayXXd gaussian_map(const Pixel& center, const FieldConfig& cfg,
                             int width, int height) {
  cfg.validate();
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("gaussian_map: dimensions must be positive");
  }
  Eigen::ArrayXXd map(height, width);
  const double inv_two_sigma2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  for (int v = 0; v < height; ++v) {
    const double dv = v - center.y();
    for (int u = 0; u < width; ++u) {
      const double du = u - center.x();
      map(v, u) = std::exp(-(du * du + dv * dv) * inv_two_sigma2);
    }
  }
  return map;
}

namespace {

void clamp_into_values(FocusField& f, double floor) {
  f.values = (f.accumulator + floor).cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

FocusField render_field(const std::vector<Pixel>& trace2d, const FieldConfig& cfg,
                        int width, int height) {
  cfg.validate();
  FocusField f = FocusField::empty(width, height, cfg);
  for (std::size_t i = 0; i < trace2d.size(); i += cfg.stride) {
    f.accumulator += gaussian_map(trace2d[i], cfg, width, height);
  }
  clamp_into_values(f, cfg.floor);
  return f;
}

FocusField extend_field(const FocusField& field, const Pixel& new_point,
                        const FieldConfig& cfg) {
  cfg.validate();
  FocusField f;
  f.accumulator =
      field.accumulator + gaussian_map(new_point, cfg,
                                       static_cast<int>(field.accumulator.cols()),
                                       static_cast<int>(field.accumulator.rows()));
  clamp_into_values(f, cfg.floor);
  return f;
}

GrayImage apply_field(const GrayImage& image, const FocusField& field) {
  if (image.rows() != field.values.rows() || image.cols() != field.values.cols()) {
    throw DimensionMismatch();
  }
  return image * field.values;
}

namespace {

void stamp(GrayImage& raster, double u, double v) {
  const long col = std::lround(u);
  const long row = std::lround(v);
  if (col < 0 || col >= raster.cols() || row < 0 || row >= raster.rows()) return;
  raster(row, col) = 1.0;
}

void stamp_segment(GrayImage& raster, const Pixel& a, const Pixel& b) {
  const double span = std::max(std::abs(b.x() - a.x()), std::abs(b.y() - a.y()));
  const int n = std::max(1, static_cast<int>(std::ceil(span)));
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    stamp(raster, a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y()));
  }
}

}  // namespace

GrayImage rasterize_trace(const std::vector<Pixel>& trace2d, int width, int height) {
  GrayImage raster = GrayImage::Zero(height, width);
  if (trace2d.empty()) return raster;
  stamp(raster, trace2d[0].x(), trace2d[0].y());
  for (std::size_t i = 1; i < trace2d.size(); ++i) {
    stamp_segment(raster, trace2d[i - 1], trace2d[i]);
  }
  return raster;
}

void rasterize_extend(GrayImage& raster, const Pixel* prev, const Pixel& next) {
  if (prev == nullptr) {
    stamp(raster, next.x(), next.y());
  } else {
    stamp_segment(raster, *prev, next);
  }
}

}  // namespace ma2
