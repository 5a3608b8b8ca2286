#include "s2cr/curve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "s2cr/error.hpp"

namespace s2cr {
namespace {

void check_intensity(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    fail(ErrorKind::kInvalidArgument,
         "intensity outside [0,1]: " + std::to_string(x));
  }
}

double knot(int i, int levels) {
  return static_cast<double>(i) / static_cast<double>(levels);
}

}  // namespace

ChannelCurve::ChannelCurve(std::vector<double> weights)
    : weights_(std::move(weights)) {
  if (weights_.size() < 2) {
    fail(ErrorKind::kInvalidArgument, "curve needs at least 2 levels");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!std::isfinite(w) || w < 0.0) {
      fail(ErrorKind::kInvalidArgument,
           "curve weight " + std::to_string(i) + " is negative or non-finite");
    }
    sum += w;
  }
  if (!(sum >= kMinCurveMass)) {
    fail(ErrorKind::kInvalidArgument, "curve mass below minimum");
  }
  mass_ = sum;
}

ChannelCurve ChannelCurve::identity(int levels) {
  if (levels < 2) fail(ErrorKind::kInvalidArgument, "curve needs at least 2 levels");
  std::vector<double> w(levels, 0.0);
  w[0] = 1.0;
  return ChannelCurve(std::move(w));
}

ChannelCurve ChannelCurve::normalized() const {
  std::vector<double> w(weights_);
  for (double& v : w) v /= mass_;
  return ChannelCurve(std::move(w));
}

CurveParams::CurveParams(ChannelCurve red, ChannelCurve green, ChannelCurve blue)
    : channels_{std::move(red), std::move(green), std::move(blue)} {
  if (channels_[1].levels() != channels_[0].levels() ||
      channels_[2].levels() != channels_[0].levels()) {
    fail(ErrorKind::kInvalidArgument, "curve channels disagree on level count");
  }
}

CurveParams CurveParams::identity(int levels) {
  return CurveParams(ChannelCurve::identity(levels), ChannelCurve::identity(levels),
                     ChannelCurve::identity(levels));
}

double render_intensity(double x, const ChannelCurve& curve) {
  check_intensity(x);
  const auto p = curve.weights();
  const int levels = curve.levels();
  double acc = 0.0;
  for (int i = 0; i < levels; ++i) {
    acc += p[i] * hinge01(x - knot(i, levels));
  }
  return acc / curve.mass();
}

double grad_wrt_input(double x, const ChannelCurve& curve) {
  check_intensity(x);
  const auto p = curve.weights();
  const int levels = curve.levels();
  double acc = 0.0;
  for (int i = 0; i < levels; ++i) {
    const double y = x - knot(i, levels);
    if (y >= 0.0 && y < 1.0) acc += p[i];
  }
  return acc / curve.mass();
}

std::vector<double> grad_wrt_params(double x, const ChannelCurve& curve) {
  const double psi = render_intensity(x, curve);
  const int levels = curve.levels();
  std::vector<double> g(levels);
  for (int i = 0; i < levels; ++i) {
    g[i] = (hinge01(x - knot(i, levels)) - psi) / curve.mass();
  }
  return g;
}

Lut::Lut(int resolution, std::vector<double> table)
    : resolution_(resolution), table_(std::move(table)) {
  if (resolution_ < 1 || table_.size() != static_cast<std::size_t>(resolution_) + 1) {
    fail(ErrorKind::kInvalidArgument, "lut table size must be resolution + 1");
  }
}

Lut build_lut(const ChannelCurve& curve, int resolution) {
  if (resolution < curve.levels()) {
    fail(ErrorKind::kInvalidArgument, "lut resolution below curve levels");
  }
  // On [0,1] only the hinges with knot <= x are active and none saturates
  // before x = 1, so psi(x) * mass = x * P(x) - Q(x) with P, Q the running sums
  // of p_i and p_i * knot_i over active pieces.
  const auto p = curve.weights();
  const int levels = curve.levels();
  std::vector<double> table(static_cast<std::size_t>(resolution) + 1);
  double mass_active = 0.0;
  double moment_active = 0.0;
  int next = 0;
  for (int k = 0; k <= resolution; ++k) {
    while (next < levels && static_cast<std::int64_t>(next) * resolution <=
                                static_cast<std::int64_t>(k) * levels) {
      mass_active += p[next];
      moment_active += p[next] * knot(next, levels);
      ++next;
    }
    const double x = static_cast<double>(k) / resolution;
    table[k] = std::clamp((x * mass_active - moment_active) / curve.mass(), 0.0, 1.0);
  }
  return Lut(resolution, std::move(table));
}

CurveInverse::CurveInverse(const ChannelCurve& curve) {
  const auto p = curve.weights();
  const int levels = curve.levels();
  if (!(p[0] > 0.0)) {
    fail(ErrorKind::kInvalidArgument, "curve is flat near zero and not invertible");
  }
  knot_values_.resize(levels);
  slopes_.resize(levels);
  double cumulative = 0.0;
  for (int k = 0; k < levels; ++k) {
    knot_values_[k] = render_intensity(knot(k, levels), curve);
    cumulative += p[k];
    slopes_[k] = cumulative / curve.mass();
  }
}

double CurveInverse::operator()(double y) const {
  if (y <= 0.0) return 0.0;
  const int levels = static_cast<int>(knot_values_.size());
  int k = levels - 1;
  while (k > 0 && knot_values_[k] > y) --k;
  return knot(k, levels) + (y - knot_values_[k]) / slopes_[k];
}

}  // namespace s2cr
