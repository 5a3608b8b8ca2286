#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace s2cr {

/// Smallest admissible total piece mass of a curve.
inline constexpr double kMinCurveMass = 1e-6;

/// Default table resolution used by the full-resolution render path.
inline constexpr int kDefaultLutResolution = 4096;

/// Monotone piecewise-linear intensity curve over [0,1].
///
/// The curve is psi(x) = (1/S) * sum_i p_i * clamp01(x - i/L), where S is the
/// total piece mass. Weights are nonnegative and S >= kMinCurveMass, so the
/// mapping is nondecreasing with psi(0) = 0. Instances are immutable.
class ChannelCurve {
 public:
  /// Throws Error(kInvalidArgument) if L < 2, any weight is negative or
  /// non-finite, or the mass is below kMinCurveMass.
  explicit ChannelCurve(std::vector<double> weights);

  /// p = (1, 0, ..., 0): psi(x) = x on [0,1).
  static ChannelCurve identity(int levels);

  int levels() const { return static_cast<int>(weights_.size()); }
  std::span<const double> weights() const { return weights_; }
  double mass() const { return mass_; }

  /// Copy rescaled so that the weights sum to one. Same mapping.
  ChannelCurve normalized() const;

  bool operator==(const ChannelCurve&) const = default;

 private:
  std::vector<double> weights_;
  double mass_ = 0.0;
};

/// Per-channel curves for R, G and B with a shared level count.
class CurveParams {
 public:
  CurveParams(ChannelCurve red, ChannelCurve green, ChannelCurve blue);

  static CurveParams identity(int levels);

  int levels() const { return channels_[0].levels(); }
  const ChannelCurve& channel(int c) const { return channels_.at(c); }
  const ChannelCurve& red() const { return channels_[0]; }
  const ChannelCurve& green() const { return channels_[1]; }
  const ChannelCurve& blue() const { return channels_[2]; }

  bool operator==(const CurveParams&) const = default;

 private:
  std::array<ChannelCurve, 3> channels_;
};

/// The hinge used by the rendering function: 0 below 0, identity on [0,1),
/// saturating at 1.
inline double hinge01(double y) {
  if (y < 0.0) return 0.0;
  if (y < 1.0) return y;
  return 1.0;
}

/// Evaluates the curve at x in [0,1]. Reference (direct summation) path.
double render_intensity(double x, const ChannelCurve& curve);

/// d psi / d x with the right-continuous convention at knots.
double grad_wrt_input(double x, const ChannelCurve& curve);

/// d psi / d p_i for every piece i.
std::vector<double> grad_wrt_params(double x, const ChannelCurve& curve);

/// Tabulated curve sampled at k / resolution, k = 0..resolution.
class Lut {
 public:
  Lut(int resolution, std::vector<double> table);

  int resolution() const { return resolution_; }
  std::span<const double> table() const { return table_; }

  /// Linear interpolation between samples; exact at the sample points.
  double apply(double x) const {
    const double t = x * resolution_;
    int k = static_cast<int>(t);
    if (k >= resolution_) return table_[resolution_];
    const double frac = t - k;
    if (frac == 0.0) return table_[k];
    return table_[k] + (table_[k + 1] - table_[k]) * frac;
  }

 private:
  int resolution_;
  std::vector<double> table_;
};

/// Throws Error(kInvalidArgument) when resolution < curve.levels().
Lut build_lut(const ChannelCurve& curve, int resolution = kDefaultLutResolution);

inline double apply_lut(const Lut& lut, double x) { return lut.apply(x); }

/// Inverse of a curve with p_0 > 0 (strictly increasing). Values above psi(1)
/// extend the last segment, which always has slope 1.
class CurveInverse {
 public:
  /// Throws Error(kInvalidArgument) when p_0 == 0.
  explicit CurveInverse(const ChannelCurve& curve);

  double operator()(double y) const;

 private:
  std::vector<double> knot_values_;  // psi(k/L), k = 0..L-1
  std::vector<double> slopes_;       // slope on [k/L, (k+1)/L)
};

inline double invert_intensity(double y, const ChannelCurve& curve) {
  return CurveInverse(curve)(y);
}

struct FitOptions {
  /// Require x coverage of [0,1] with gaps below 1/L.
  bool require_coverage = true;
  /// Tikhonov weight added when coverage is relaxed; keeps unobserved pieces
  /// well defined.
  double ridge = 1e-10;
};

struct CurveFit {
  ChannelCurve curve;
  double mse = 0.0;  // mean squared error on the [0,1] scale
};

/// Nonnegative least-squares fit of a curve to (x, y) samples. The result is
/// normalized to unit mass.
CurveFit fit_curve_to_mapping(std::span<const std::pair<double, double>> samples,
                              int levels, const FitOptions& options = {});

/// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.
/// A is row-major with `cols` columns.
std::vector<double> solve_nnls(std::span<const double> a, int rows, int cols,
                               std::span<const double> b);

}  // namespace s2cr
