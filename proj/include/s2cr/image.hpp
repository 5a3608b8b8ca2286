#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s2cr/curve.hpp"

namespace s2cr {

/// Single real-valued plane, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
};

/// Planar RGB image with intensities in [0,1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  /// Zero-filled image. Throws on non-positive dimensions.
  ImageBuffer(int width, int height, double fill = 0.0);
  /// Takes ownership of three planes; throws if sizes disagree or any value is
  /// outside [0,1].
  ImageBuffer(int width, int height, std::array<std::vector<double>, 3> planes);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<const double> plane(int c) const { return planes_[c]; }
  /// Writers must keep values inside [0,1].
  std::span<double> mutable_plane(int c) { return planes_[c]; }

  double at(int c, int x, int y) const {
    return planes_[c][static_cast<std::size_t>(y) * width_ + x];
  }
  double& at(int c, int x, int y) { return planes_[c][static_cast<std::size_t>(y) * width_ + x]; }

  bool operator==(const ImageBuffer&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::array<std::vector<double>, 3> planes_;
};

/// Binary foreground mask.
class MaskBuffer {
 public:
  MaskBuffer() = default;
  MaskBuffer(int width, int height, std::uint8_t fill = 0);
  /// Throws if any value is not 0 or 1.
  MaskBuffer(int width, int height, std::vector<std::uint8_t> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::uint8_t at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, bool on) {
    values_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
  }

  std::size_t count() const;
  double ratio() const;
  bool empty_foreground() const { return count() == 0; }

  bool operator==(const MaskBuffer&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Throws Error(kDimension) unless the mask matches the image.
void require_same_dims(const ImageBuffer& image, const MaskBuffer& mask);
void require_same_dims(const ImageBuffer& a, const ImageBuffer& b);

/// Area-weighted downsample. Identity when the size is unchanged; throws
/// Error(kInvalidArgument) on an upscale request.
ImageBuffer downsample(const ImageBuffer& image, int target_w, int target_h);
Plane downsample(const Plane& plane, int target_w, int target_h);

/// Bilinear resample (pixel-center aligned, edge clamped). Used for thumbnails
/// of inputs smaller than the thumbnail size.
ImageBuffer resample_bilinear(const ImageBuffer& image, int target_w, int target_h);
Plane resample_bilinear(const Plane& plane, int target_w, int target_h);

/// Resize to an arbitrary size: downsample per axis when shrinking, bilinear
/// when growing.
ImageBuffer thumbnail_of(const ImageBuffer& image, int size);
MaskBuffer thumbnail_of(const MaskBuffer& mask, int size);

/// Nearest-neighbor integer upscale.
ImageBuffer upscale_nearest(const ImageBuffer& image, int factor);
MaskBuffer upscale_nearest(const MaskBuffer& mask, int factor);

/// value >= 0.5 -> 1, else 0.
MaskBuffer binarize_mask(const Plane& raw);
Plane mask_to_plane(const MaskBuffer& mask);

struct Regions {
  ImageBuffer foreground;
  ImageBuffer background;
};

/// foreground = image * mask, background = image * (1 - mask).
Regions split_regions(const ImageBuffer& image, const MaskBuffer& mask);

enum class RenderMode {
  kLut,    // tabulated curve, linear interpolation (default)
  kExact,  // direct summation
};

struct RenderOptions {
  RenderMode mode = RenderMode::kLut;
  int lut_resolution = kDefaultLutResolution;
  int threads = 1;
};

/// Applies the per-channel curves to masked pixels; unmasked pixels are copied.
ImageBuffer render_region(const ImageBuffer& image, const MaskBuffer& mask,
                          const CurveParams& params, const RenderOptions& options = {});

struct MetricReport {
  double mse = 0.0;   // 0-255 scale, all pixels and channels
  double psnr = std::numeric_limits<double>::infinity();
  double fmse = 0.0;  // 0-255 scale, masked pixels only
  double fg_ratio = 0.0;

  /// {"mse":..,"psnr":..,"fmse":..,"fg_ratio":..}; infinite PSNR as "inf".
  std::string to_json() const;
};

MetricReport metrics(const ImageBuffer& pred, const ImageBuffer& target,
                     const MaskBuffer& mask);

/// Foreground-only MSE on the 0-255 scale.
double foreground_mse(const ImageBuffer& pred, const ImageBuffer& target,
                      const MaskBuffer& mask);

}  // namespace s2cr
