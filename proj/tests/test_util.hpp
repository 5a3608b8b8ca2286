#pragma once

#include <random>
#include <vector>

#include "s2cr/curve.hpp"
#include "s2cr/image.hpp"

namespace s2cr::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random valid curve; some weights are zeroed to exercise flat pieces.
inline ChannelCurve random_curve(std::mt19937_64& rng, int levels, double scale = 1.0) {
  std::vector<double> p(levels);
  for (double& v : p) v = uniform(rng, 0.0, 1.0) < 0.2 ? 0.0 : uniform(rng, 0.0, scale);
  p[0] += 1e-3 * scale;
  return ChannelCurve(std::move(p));
}

inline CurveParams random_params(std::mt19937_64& rng, int levels) {
  return CurveParams(random_curve(rng, levels), random_curve(rng, levels),
                     random_curve(rng, levels));
}

inline ImageBuffer random_image(std::mt19937_64& rng, int w, int h) {
  ImageBuffer img(w, h);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.mutable_plane(c)) v = uniform(rng, 0.0, 1.0);
  }
  return img;
}

inline MaskBuffer random_mask(std::mt19937_64& rng, int w, int h, double p = 0.5) {
  MaskBuffer m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, uniform(rng, 0.0, 1.0) < p);
  }
  return m;
}

/// Uniform L-level curve p = (1, ..., 1).
inline ChannelCurve uniform_curve(int levels) {
  return ChannelCurve(std::vector<double>(levels, 1.0));
}

}  // namespace s2cr::test
