#include "s2cr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "s2cr/error.hpp"

namespace s2cr {
namespace {

constexpr int kOffsetGrid = 64;

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  // Inclusive range; the modulo bias is negligible for the small ranges used.
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Bilinear upsample of a coarse grid to width x height.
std::vector<double> smooth_field(int width, int height, int grid, double center,
                                 double amplitude, std::mt19937_64& rng) {
  std::vector<double> nodes(static_cast<std::size_t>(grid) * grid);
  for (double& v : nodes) v = center + uniform_real(rng, -amplitude, amplitude);
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double gy = (y + 0.5) / height * (grid - 1);
    const int y0 = std::min(grid - 2, static_cast<int>(gy));
    const double fy = gy - y0;
    for (int x = 0; x < width; ++x) {
      const double gx = (x + 0.5) / width * (grid - 1);
      const int x0 = std::min(grid - 2, static_cast<int>(gx));
      const double fx = gx - x0;
      const double a = nodes[y0 * grid + x0];
      const double b = nodes[y0 * grid + x0 + 1];
      const double c = nodes[(y0 + 1) * grid + x0];
      const double d = nodes[(y0 + 1) * grid + x0 + 1];
      out[static_cast<std::size_t>(y) * width + x] =
          (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    }
  }
  return out;
}

ChannelCorruption sample_channel(const SynthConfig& config, int offset_steps,
                                 std::mt19937_64& rng) {
  const int levels = config.corruption_levels;
  const int ratio = kOffsetGrid / levels;
  // Keep every shifted knot inside the 64-level grid.
  const int last_knot = std::min(levels - 1, (kOffsetGrid - 1 - offset_steps) / ratio);
  const double offset = static_cast<double>(offset_steps) / kOffsetGrid;

  const int knots = uniform_int(rng, 1, 3);
  std::vector<int> where(knots);
  std::vector<double> share(knots);
  double share_sum = 0.0;
  for (int j = 0; j < knots; ++j) {
    where[j] = uniform_int(rng, 1, last_knot);
    share[j] = -std::log(1.0 - uniform_real(rng, 0.0, 1.0));
    share_sum += share[j];
  }
  double bend = uniform_real(rng, 0.0, config.max_bend);
  double depth = 0.0;
  for (int j = 0; j < knots; ++j) {
    depth += bend * share[j] / share_sum * where[j] / levels;
  }
  const double budget = config.max_shift - offset;
  if (depth > budget) bend *= budget / depth;

  std::vector<double> w(levels, 0.0);
  w[0] = 1.0 - bend;
  for (int j = 0; j < knots; ++j) w[where[j]] += bend * share[j] / share_sum;
  return ChannelCorruption{ChannelCurve(std::move(w)), offset};
}

}  // namespace

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kInvalidArgument, "synth: " + what); };
  if (image_size < 8) bad("image_size must be >= 8");
  if (!(fg_ratio_min > 0.0 && fg_ratio_min <= fg_ratio_max && fg_ratio_max <= 1.0)) {
    bad("fg_ratio range must lie within (0,1]");
  }
  if (corruption_levels < 2 || kOffsetGrid % corruption_levels != 0) {
    bad("corruption_levels must divide 64");
  }
  if (max_offset_steps < 0 || max_offset_steps > 4) bad("max_offset_steps must be in [0,4]");
  if (!(base_min >= 0.0 && base_min < base_max && base_max + max_shift <= 1.0)) {
    bad("base range plus max_shift must stay within [0,1]");
  }
  if (!(max_bend >= 0.0 && max_bend < 1.0)) bad("max_bend must be in [0,1)");
}

double ChannelCorruption::corrupt(double y) const {
  return std::clamp(CurveInverse(curve)(y) + offset, 0.0, 1.0);
}

ChannelCurve ChannelCorruption::restoring_curve(int levels) const {
  const int src_levels = curve.levels();
  if (levels % src_levels != 0) {
    fail(ErrorKind::kInvalidArgument, "restoring curve levels must be a multiple");
  }
  const int ratio = levels / src_levels;
  const double shift = offset * levels;
  const int steps = static_cast<int>(std::lround(shift));
  if (std::abs(shift - steps) > 1e-9) {
    fail(ErrorKind::kInvalidArgument, "offset is not on the target knot grid");
  }
  std::vector<double> w(levels, 0.0);
  const auto src = curve.weights();
  for (int i = 0; i < src_levels; ++i) {
    if (src[i] == 0.0) continue;
    const int j = i * ratio + steps;
    if (j >= levels) fail(ErrorKind::kInvalidArgument, "shifted knot leaves [0,1)");
    w[j] += src[i];
  }
  return ChannelCurve(std::move(w));
}

ImageBuffer procedural_base(int width, int height, const SynthConfig& config,
                            std::mt19937_64& rng) {
  std::array<std::vector<double>, 3> planes;
  const int coarse = uniform_int(rng, 3, 6);
  const int fine = uniform_int(rng, 8, 16);
  const double lo = config.base_min;
  const double hi = config.base_max;
  for (int c = 0; c < 3; ++c) {
    const double center = uniform_real(rng, lo + 0.15 * (hi - lo), hi - 0.15 * (hi - lo));
    auto field = smooth_field(width, height, coarse, center, 0.25 * (hi - lo), rng);
    const auto detail = smooth_field(width, height, fine, 0.0, 0.06 * (hi - lo), rng);
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double noise = uniform_real(rng, -0.02, 0.02) * (hi - lo);
      field[i] = std::clamp(field[i] + detail[i] + noise, lo, hi);
    }
    planes[c] = std::move(field);
  }
  return ImageBuffer(width, height, std::move(planes));
}

Corruption sample_corruption(const SynthConfig& config, std::mt19937_64& rng) {
  Corruption out{{ChannelCorruption{ChannelCurve::identity(config.corruption_levels), 0.0},
                  ChannelCorruption{ChannelCurve::identity(config.corruption_levels), 0.0},
                  ChannelCorruption{ChannelCurve::identity(config.corruption_levels), 0.0}},
                 config.identity,
                 std::nullopt};
  int shared_steps = -1;
  if (config.semantic_labels) {
    const int cls = uniform_int(rng, 0, kSemanticClassCount - 1);
    out.label = static_cast<SemanticLabel>(cls);
    shared_steps = std::min(cls, config.max_offset_steps);
  }
  if (config.identity) return out;
  for (auto& ch : out.channels) {
    const int steps =
        shared_steps >= 0 ? shared_steps : uniform_int(rng, 0, config.max_offset_steps);
    ch = sample_channel(config, steps, rng);
  }
  return out;
}

MaskBuffer sample_mask(int size, const SynthConfig& config, std::mt19937_64& rng) {
  const double area = static_cast<double>(size) * size;
  const double ratio = std::exp(
      uniform_real(rng, std::log(config.fg_ratio_min), std::log(config.fg_ratio_max)));
  const double aspect = std::exp(uniform_real(rng, std::log(0.5), std::log(2.0)));
  const bool ellipse = uniform_real(rng, 0.0, 1.0) < 0.5;
  const double scale = ellipse ? std::sqrt(4.0 / std::numbers::pi) : 1.0;
  const double w = std::clamp(std::sqrt(ratio * area * aspect) * scale, 1.0,
                              static_cast<double>(size));
  const double h = std::clamp(std::sqrt(ratio * area / aspect) * scale, 1.0,
                              static_cast<double>(size));
  const double cx = uniform_real(rng, w / 2, size - w / 2);
  const double cy = uniform_real(rng, h / 2, size - h / 2);

  MaskBuffer mask(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = (x + 0.5 - cx) / (w / 2);
      const double dy = (y + 0.5 - cy) / (h / 2);
      const bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                                  : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
      if (inside) mask.set(x, y, true);
    }
  }
  if (mask.empty_foreground()) {
    mask.set(std::clamp(static_cast<int>(cx), 0, size - 1),
             std::clamp(static_cast<int>(cy), 0, size - 1), true);
  }
  return mask;
}

TrainSample generate_sample(const ImageBuffer& base, const SynthConfig& config,
                            std::mt19937_64& rng, Corruption* drawn) {
  config.validate();
  const int size = config.image_size;
  if (base.width() < size || base.height() < size) {
    fail(ErrorKind::kInvalidArgument, "base image smaller than image_size");
  }
  const int ox = uniform_int(rng, 0, base.width() - size);
  const int oy = uniform_int(rng, 0, base.height() - size);
  const bool flip = uniform_real(rng, 0.0, 1.0) < 0.5;
  ImageBuffer target(size, size);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const int sx = flip ? ox + size - 1 - x : ox + x;
        target.at(c, x, y) = base.at(c, sx, oy + y);
      }
    }
  }
  MaskBuffer mask = sample_mask(size, config, rng);
  Corruption corruption = sample_corruption(config, rng);

  ImageBuffer composite = target;
  if (!corruption.identity) {
    const auto m = mask.values();
    for (int c = 0; c < 3; ++c) {
      const ChannelCorruption& ch = corruption.channels[c];
      const CurveInverse inverse(ch.curve);
      const auto src = target.plane(c);
      auto dst = composite.mutable_plane(c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        if (m[i]) dst[i] = std::clamp(inverse(src[i]) + ch.offset, 0.0, 1.0);
      }
    }
  }
  TrainSample sample{std::move(composite), std::move(mask), std::move(target), corruption.label};
  if (drawn) *drawn = std::move(corruption);
  return sample;
}

SyntheticDataset::SyntheticDataset(SynthConfig config, std::size_t count, std::uint64_t offset)
    : config_(std::move(config)), count_(count), offset_(offset) {
  config_.validate();
}

TrainSample SyntheticDataset::get(std::size_t index) const { return get(index, nullptr); }

TrainSample SyntheticDataset::get(std::size_t index, Corruption* drawn) const {
  if (index >= count_) fail(ErrorKind::kInvalidArgument, "sample index out of range");
  std::mt19937_64 rng(mix_seed(config_.seed, offset_ + index));
  const int margin = config_.image_size / 4;
  const ImageBuffer base = procedural_base(config_.image_size + margin,
                                           config_.image_size + margin, config_, rng);
  return generate_sample(base, config_, rng, drawn);
}

}  // namespace s2cr
