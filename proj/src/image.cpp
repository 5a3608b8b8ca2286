#include "s2cr/image.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "s2cr/error.hpp"
#include "s2cr/parallel.hpp"

namespace s2cr {
namespace {

void check_dims(int w, int h) {
  if (w <= 0 || h <= 0) {
    fail(ErrorKind::kInvalidArgument,
         "image dimensions must be positive, got " + std::to_string(w) + "x" +
             std::to_string(h));
  }
}

struct Tap {
  int index;
  double weight;
};

// Per-output-pixel source taps for area averaging along one axis.
std::vector<std::vector<Tap>> area_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int j = 0; j < dst; ++j) {
    const double lo = j * scale;
    const double hi = (j + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
    double total = 0.0;
    for (int i = first; i <= last; ++i) {
      const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
      if (overlap > 0.0) {
        taps[j].push_back({i, overlap});
        total += overlap;
      }
    }
    for (auto& t : taps[j]) t.weight /= total;
  }
  return taps;
}

// Bilinear taps with pixel-center alignment and edge clamping.
std::vector<std::vector<Tap>> bilinear_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int j = 0; j < dst; ++j) {
    double s = (j + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(src - 1, i0 + 1);
    const double f = s - i0;
    if (i1 == i0 || f == 0.0) {
      taps[j].push_back({i0, 1.0});
    } else {
      taps[j].push_back({i0, 1.0 - f});
      taps[j].push_back({i1, f});
    }
  }
  return taps;
}

std::vector<double> separable(std::span<const double> src, int sw, int sh, int dw, int dh,
                              const std::vector<std::vector<Tap>>& xt,
                              const std::vector<std::vector<Tap>>& yt) {
  std::vector<double> tmp(static_cast<std::size_t>(dw) * sh);
  for (int y = 0; y < sh; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * sw;
    double* out = tmp.data() + static_cast<std::size_t>(y) * dw;
    for (int x = 0; x < dw; ++x) {
      double acc = 0.0;
      for (const Tap& t : xt[x]) acc += row[t.index] * t.weight;
      out[x] = acc;
    }
  }
  std::vector<double> dst(static_cast<std::size_t>(dw) * dh, 0.0);
  for (int y = 0; y < dh; ++y) {
    double* out = dst.data() + static_cast<std::size_t>(y) * dw;
    for (const Tap& t : yt[y]) {
      const double* row = tmp.data() + static_cast<std::size_t>(t.index) * dw;
      for (int x = 0; x < dw; ++x) out[x] += row[x] * t.weight;
    }
    for (int x = 0; x < dw; ++x) out[x] = std::clamp(out[x], 0.0, 1.0);
  }
  return dst;
}

std::vector<double> resize_plane(std::span<const double> src, int sw, int sh, int dw, int dh) {
  const auto xt = dw <= sw ? area_taps(sw, dw) : bilinear_taps(sw, dw);
  const auto yt = dh <= sh ? area_taps(sh, dh) : bilinear_taps(sh, dh);
  return separable(src, sw, sh, dw, dh, xt, yt);
}

}  // namespace

Plane::Plane(int w, int h, double fill) : width(w), height(h) {
  check_dims(w, h);
  values.assign(static_cast<std::size_t>(w) * h, fill);
}

ImageBuffer::ImageBuffer(int width, int height, double fill) : width_(width), height_(height) {
  check_dims(width, height);
  for (auto& p : planes_) p.assign(static_cast<std::size_t>(width) * height, fill);
}

ImageBuffer::ImageBuffer(int width, int height, std::array<std::vector<double>, 3> planes)
    : width_(width), height_(height), planes_(std::move(planes)) {
  check_dims(width, height);
  for (const auto& p : planes_) {
    if (p.size() != pixel_count()) {
      fail(ErrorKind::kDimension, "image plane size does not match dimensions");
    }
    for (double v : p) {
      if (!(v >= 0.0 && v <= 1.0)) {
        fail(ErrorKind::kInvalidArgument, "image intensity outside [0,1]");
      }
    }
  }
}

MaskBuffer::MaskBuffer(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  if (fill > 1) fail(ErrorKind::kInvalidArgument, "mask values must be 0 or 1");
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

MaskBuffer::MaskBuffer(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    fail(ErrorKind::kDimension, "mask size does not match dimensions");
  }
  for (auto v : values_) {
    if (v > 1) fail(ErrorKind::kInvalidArgument, "mask values must be 0 or 1");
  }
}

std::size_t MaskBuffer::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 1));
}

double MaskBuffer::ratio() const {
  return values_.empty() ? 0.0 : static_cast<double>(count()) / values_.size();
}

void require_same_dims(const ImageBuffer& image, const MaskBuffer& mask) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    fail(ErrorKind::kDimension, "mask is " + std::to_string(mask.width()) + "x" +
                                    std::to_string(mask.height()) + " but image is " +
                                    std::to_string(image.width()) + "x" +
                                    std::to_string(image.height()));
  }
}

void require_same_dims(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorKind::kDimension, "image dimensions differ: " + std::to_string(a.width()) +
                                    "x" + std::to_string(a.height()) + " vs " +
                                    std::to_string(b.width()) + "x" +
                                    std::to_string(b.height()));
  }
}

ImageBuffer downsample(const ImageBuffer& image, int target_w, int target_h) {
  check_dims(target_w, target_h);
  if (target_w > image.width() || target_h > image.height()) {
    fail(ErrorKind::kInvalidArgument, "downsample cannot upscale");
  }
  if (target_w == image.width() && target_h == image.height()) return image;
  const auto xt = area_taps(image.width(), target_w);
  const auto yt = area_taps(image.height(), target_h);
  std::array<std::vector<double>, 3> planes;
  for (int c = 0; c < 3; ++c) {
    planes[c] = separable(image.plane(c), image.width(), image.height(), target_w, target_h,
                          xt, yt);
  }
  return ImageBuffer(target_w, target_h, std::move(planes));
}

Plane downsample(const Plane& plane, int target_w, int target_h) {
  check_dims(target_w, target_h);
  if (target_w > plane.width || target_h > plane.height) {
    fail(ErrorKind::kInvalidArgument, "downsample cannot upscale");
  }
  if (target_w == plane.width && target_h == plane.height) return plane;
  Plane out;
  out.width = target_w;
  out.height = target_h;
  out.values = separable(plane.values, plane.width, plane.height, target_w, target_h,
                         area_taps(plane.width, target_w), area_taps(plane.height, target_h));
  return out;
}

ImageBuffer resample_bilinear(const ImageBuffer& image, int target_w, int target_h) {
  check_dims(target_w, target_h);
  const auto xt = bilinear_taps(image.width(), target_w);
  const auto yt = bilinear_taps(image.height(), target_h);
  std::array<std::vector<double>, 3> planes;
  for (int c = 0; c < 3; ++c) {
    planes[c] = separable(image.plane(c), image.width(), image.height(), target_w, target_h,
                          xt, yt);
  }
  return ImageBuffer(target_w, target_h, std::move(planes));
}

Plane resample_bilinear(const Plane& plane, int target_w, int target_h) {
  check_dims(target_w, target_h);
  Plane out;
  out.width = target_w;
  out.height = target_h;
  out.values = separable(plane.values, plane.width, plane.height, target_w, target_h,
                         bilinear_taps(plane.width, target_w),
                         bilinear_taps(plane.height, target_h));
  return out;
}

ImageBuffer thumbnail_of(const ImageBuffer& image, int size) {
  if (image.width() >= size && image.height() >= size) return downsample(image, size, size);
  std::array<std::vector<double>, 3> planes;
  for (int c = 0; c < 3; ++c) {
    planes[c] = resize_plane(image.plane(c), image.width(), image.height(), size, size);
  }
  return ImageBuffer(size, size, std::move(planes));
}

MaskBuffer thumbnail_of(const MaskBuffer& mask, int size) {
  const Plane plane = mask_to_plane(mask);
  Plane small;
  small.width = size;
  small.height = size;
  small.values = resize_plane(plane.values, plane.width, plane.height, size, size);
  return binarize_mask(small);
}

ImageBuffer upscale_nearest(const ImageBuffer& image, int factor) {
  if (factor < 1) fail(ErrorKind::kInvalidArgument, "upscale factor must be >= 1");
  ImageBuffer out(image.width() * factor, image.height() * factor);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        out.at(c, x, y) = image.at(c, x / factor, y / factor);
      }
    }
  }
  return out;
}

MaskBuffer upscale_nearest(const MaskBuffer& mask, int factor) {
  if (factor < 1) fail(ErrorKind::kInvalidArgument, "upscale factor must be >= 1");
  MaskBuffer out(mask.width() * factor, mask.height() * factor);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.set(x, y, mask.at(x / factor, y / factor) != 0);
  }
  return out;
}

MaskBuffer binarize_mask(const Plane& raw) {
  std::vector<std::uint8_t> v(raw.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = raw.values[i] >= 0.5 ? 1 : 0;
  return MaskBuffer(raw.width, raw.height, std::move(v));
}

Plane mask_to_plane(const MaskBuffer& mask) {
  Plane p(mask.width(), mask.height());
  const auto v = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i) p.values[i] = v[i];
  return p;
}

Regions split_regions(const ImageBuffer& image, const MaskBuffer& mask) {
  require_same_dims(image, mask);
  Regions r{ImageBuffer(image.width(), image.height()),
            ImageBuffer(image.width(), image.height())};
  const auto m = mask.values();
  for (int c = 0; c < 3; ++c) {
    const auto src = image.plane(c);
    auto fg = r.foreground.mutable_plane(c);
    auto bg = r.background.mutable_plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (m[i]) {
        fg[i] = src[i];
      } else {
        bg[i] = src[i];
      }
    }
  }
  return r;
}

ImageBuffer render_region(const ImageBuffer& image, const MaskBuffer& mask,
                          const CurveParams& params, const RenderOptions& options) {
  require_same_dims(image, mask);
  ImageBuffer out = image;
  const auto m = mask.values();
  const int w = image.width();
  if (options.mode == RenderMode::kLut) {
    const std::array<Lut, 3> luts = {build_lut(params.red(), options.lut_resolution),
                                     build_lut(params.green(), options.lut_resolution),
                                     build_lut(params.blue(), options.lut_resolution)};
    parallel_for(image.height(), options.threads, [&](int y0, int y1) {
      const std::size_t begin = static_cast<std::size_t>(y0) * w;
      const std::size_t end = static_cast<std::size_t>(y1) * w;
      for (int c = 0; c < 3; ++c) {
        const Lut& lut = luts[c];
        const auto src = image.plane(c);
        auto dst = out.mutable_plane(c);
        for (std::size_t i = begin; i < end; ++i) {
          if (m[i]) dst[i] = lut.apply(src[i]);
        }
      }
    });
  } else {
    parallel_for(image.height(), options.threads, [&](int y0, int y1) {
      const std::size_t begin = static_cast<std::size_t>(y0) * w;
      const std::size_t end = static_cast<std::size_t>(y1) * w;
      for (int c = 0; c < 3; ++c) {
        const ChannelCurve& curve = params.channel(c);
        const auto src = image.plane(c);
        auto dst = out.mutable_plane(c);
        for (std::size_t i = begin; i < end; ++i) {
          if (m[i]) dst[i] = render_intensity(src[i], curve);
        }
      }
    });
  }
  return out;
}

double foreground_mse(const ImageBuffer& pred, const ImageBuffer& target,
                      const MaskBuffer& mask) {
  return metrics(pred, target, mask).fmse;
}

MetricReport metrics(const ImageBuffer& pred, const ImageBuffer& target,
                     const MaskBuffer& mask) {
  require_same_dims(pred, target);
  require_same_dims(pred, mask);
  const auto m = mask.values();
  double total = 0.0;
  double fg = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto p = pred.plane(c);
    const auto t = target.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - t[i];
      total += d * d;
      if (m[i]) fg += d * d;
    }
  }
  constexpr double kScale = 255.0 * 255.0;
  const std::size_t n = pred.pixel_count();
  const std::size_t fg_count = mask.count();
  MetricReport r;
  r.mse = total * kScale / (3.0 * static_cast<double>(n));
  r.psnr = r.mse > 0.0 ? 10.0 * std::log10(kScale / r.mse)
                       : std::numeric_limits<double>::infinity();
  r.fmse = fg_count ? fg * kScale / (3.0 * static_cast<double>(fg_count)) : 0.0;
  r.fg_ratio = static_cast<double>(fg_count) / static_cast<double>(n);
  return r;
}

std::string MetricReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["mse"] = mse;
  if (std::isfinite(psnr)) {
    j["psnr"] = psnr;
  } else {
    j["psnr"] = "inf";
  }
  j["fmse"] = fmse;
  j["fg_ratio"] = fg_ratio;
  return j.dump();
}

}  // namespace s2cr
