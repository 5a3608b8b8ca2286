#include <gtest/gtest.h>

#include <cmath>

#include "s2cr/curve.hpp"
#include "s2cr/curve_io.hpp"
#include "s2cr/error.hpp"
#include "test_util.hpp"

namespace s2cr {
namespace {

using test::random_curve;
using test::uniform;
using test::uniform_curve;

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

double distance_to_knot(double x, int levels) {
  const double t = x * levels;
  return std::abs(t - std::round(t)) / levels;
}

TEST(ChannelCurve, RejectsInvalidWeights) {
  EXPECT_THROW(ChannelCurve({1.0}), Error);
  EXPECT_THROW(ChannelCurve({1.0, -0.1}), Error);
  EXPECT_THROW(ChannelCurve({1.0, std::nan("")}), Error);
  EXPECT_THROW(ChannelCurve({1.0, INFINITY}), Error);
  EXPECT_THROW(ChannelCurve({5e-7, 4e-7}), Error);
  EXPECT_NO_THROW(ChannelCurve({1e-6, 0.0}));
}

TEST(ChannelCurve, NormalizedHasUnitMassAndSameMapping) {
  const ChannelCurve c({2.0, 1.0, 0.5, 0.5});
  const ChannelCurve n = c.normalized();
  EXPECT_NEAR(n.mass(), 1.0, 1e-15);
  for (double x : {0.0, 0.1, 0.37, 0.8, 1.0}) {
    EXPECT_NEAR(render_intensity(x, c), render_intensity(x, n), 1e-15);
  }
}

TEST(CurveParams, RequiresSharedLevels) {
  EXPECT_THROW(CurveParams(ChannelCurve::identity(4), ChannelCurve::identity(4),
                           ChannelCurve::identity(8)),
               Error);
}

TEST(RenderIntensity, HandValues) {
  std::mt19937_64 rng(3);
  EXPECT_EQ(render_intensity(0.0, random_curve(rng, 16)), 0.0);
  EXPECT_NEAR(render_intensity(0.7, ChannelCurve::identity(64)), 0.7, 1e-12);
  EXPECT_NEAR(render_intensity(0.5, uniform_curve(4)), 0.1875, 1e-12);
}

TEST(RenderIntensity, RejectsOutOfRangeInput) {
  EXPECT_THROW(render_intensity(-0.01, uniform_curve(4)), Error);
  EXPECT_THROW(render_intensity(1.01, uniform_curve(4)), Error);
  EXPECT_THROW(render_intensity(std::nan(""), uniform_curve(4)), Error);
}

TEST(RenderIntensity, MonotoneBoundedAndScaleInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int levels = 2 + static_cast<int>(rng() % 80);
    const ChannelCurve c = random_curve(rng, levels);
    std::vector<double> scaled(c.weights().begin(), c.weights().end());
    const double k = uniform(rng, 0.01, 100.0);
    for (double& v : scaled) v *= k;
    const ChannelCurve ck(scaled);
    double prev = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double x = i / 100.0;
      const double y = render_intensity(x, c);
      EXPECT_GE(y, prev);
      EXPECT_GE(y, 0.0);
      EXPECT_LE(y, 1.0);
      EXPECT_NEAR(render_intensity(x, ck), y, 1e-12);
      prev = y;
    }
  }
}

TEST(GradWrtInput, HandValues) {
  EXPECT_EQ(grad_wrt_input(0.3, ChannelCurve::identity(8)), 1.0);
  EXPECT_EQ(grad_wrt_input(0.0, ChannelCurve::identity(8)), 1.0);
  EXPECT_NEAR(grad_wrt_input(0.5, uniform_curve(4)), 0.75, 1e-15);
}

TEST(GradWrtParams, HandValues) {
  const ChannelCurve c = uniform_curve(4);
  const auto g = grad_wrt_params(0.5, c);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_NEAR(g[0], 0.078125, 1e-15);
  // Pieces starting beyond x contribute -psi/S.
  EXPECT_NEAR(g[3], -0.1875 / 4.0, 1e-15);
}

TEST(Gradients, MatchCentralDifferences) {
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 1000) {
    const int levels = 2 + static_cast<int>(rng() % 63);
    // Weights bounded away from zero keep the parameter differences two-sided.
    std::vector<double> w(levels);
    for (double& v : w) v = uniform(rng, 0.01, 1.0);
    const ChannelCurve c(w);
    const double x = uniform(rng, 2e-4, 1.0 - 2e-4);
    if (distance_to_knot(x, levels) < 1e-4) continue;
    const double fd = (render_intensity(x + h, c) - render_intensity(x - h, c)) / (2 * h);
    EXPECT_LT(relative_error(grad_wrt_input(x, c), fd), 1e-4) << "x=" << x;

    const auto g = grad_wrt_params(x, c);
    std::vector<double> p(c.weights().begin(), c.weights().end());
    for (int i = 0; i < levels; ++i) {
      auto up = p;
      auto dn = p;
      up[i] += h;
      dn[i] -= h;
      const double fdp = (render_intensity(x, ChannelCurve(up)) -
                          render_intensity(x, ChannelCurve(dn))) /
                         (2 * h);
      EXPECT_LT(relative_error(g[i], fdp), 1e-4) << "i=" << i;
    }
    ++checked;
  }
}

TEST(Lut, HandTables) {
  const Lut id = build_lut(ChannelCurve::identity(8), 256);
  for (int k = 0; k <= 256; ++k) EXPECT_NEAR(id.table()[k], k / 256.0, 1e-15);

  const Lut u = build_lut(uniform_curve(4), 4);
  const std::vector<double> expected = {0.0, 0.0625, 0.1875, 0.375, 0.625};
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(u.table()[k], expected[k], 1e-15);
}

TEST(Lut, RejectsResolutionBelowLevels) {
  EXPECT_THROW(build_lut(uniform_curve(8), 4), Error);
}

TEST(Lut, ExactAtSamplesAndBoundedBetween) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const ChannelCurve c = random_curve(rng, 64);
    const Lut lut = build_lut(c, 4096);
    EXPECT_EQ(lut.table()[0], 0.0);
    for (int k = 0; k <= 4096; ++k) {
      const double x = k / 4096.0;
      EXPECT_NEAR(apply_lut(lut, x), render_intensity(x, c), 1e-12);
      if (k > 0) EXPECT_GE(lut.table()[k], lut.table()[k - 1]);
    }
    double max_slope = 0.0;
    double cumulative = 0.0;
    for (double p : c.weights()) max_slope = std::max(max_slope, (cumulative += p) / c.mass());
    const double bound = max_slope / (2.0 * 4096);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double x = uniform(rng, 0.0, 1.0);
      worst = std::max(worst, std::abs(apply_lut(lut, x) - render_intensity(x, c)));
    }
    EXPECT_LE(worst, bound);
    EXPECT_LE(worst, 2.5e-4);
  }
}

TEST(CurveInverse, InvertsStrictlyIncreasingCurves) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelCurve c = random_curve(rng, 16);
    const CurveInverse inv(c);
    for (int i = 0; i <= 50; ++i) {
      const double x = i / 50.0;
      EXPECT_NEAR(inv(render_intensity(x, c)), x, 1e-9);
    }
  }
  EXPECT_THROW(CurveInverse(ChannelCurve({0.0, 1.0})), Error);
}

std::vector<std::pair<double, double>> sample_mapping(const ChannelCurve& c, int n) {
  std::vector<std::pair<double, double>> s;
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) / (n - 1);
    s.emplace_back(x, render_intensity(x, c));
  }
  return s;
}

TEST(FitCurve, IdentityMapping) {
  const auto fit = fit_curve_to_mapping(sample_mapping(ChannelCurve::identity(16), 64), 16);
  EXPECT_NEAR(fit.curve.weights()[0], 1.0, 1e-6);
  for (int i = 1; i < 16; ++i) EXPECT_NEAR(fit.curve.weights()[i], 0.0, 1e-6);
  EXPECT_LT(fit.mse, 1e-8);
  EXPECT_NEAR(fit.curve.mass(), 1.0, 1e-12);
}

TEST(FitCurve, RoundTripsGeneratedCurves) {
  std::mt19937_64 rng(4);
  for (int levels : {4, 16, 64}) {
    const ChannelCurve c = random_curve(rng, levels);
    const auto fit = fit_curve_to_mapping(sample_mapping(c, 4 * levels), levels);
    for (int k = 0; k <= 1000; ++k) {
      const double x = k / 1000.0;
      EXPECT_LT(std::abs(render_intensity(x, fit.curve) - render_intensity(x, c)), 1e-4);
    }
  }
}

TEST(FitCurve, ScaleInvariantTargets) {
  std::mt19937_64 rng(8);
  const ChannelCurve c = random_curve(rng, 16);
  std::vector<double> tripled(c.weights().begin(), c.weights().end());
  for (double& v : tripled) v *= 3.0;
  const auto a = fit_curve_to_mapping(sample_mapping(c, 64), 16);
  const auto b = fit_curve_to_mapping(sample_mapping(ChannelCurve(tripled), 64), 16);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(a.curve.weights()[i], b.curve.weights()[i], 1e-9);
}

TEST(FitCurve, RejectsTooFewSamplesOrGaps) {
  EXPECT_THROW(fit_curve_to_mapping(sample_mapping(ChannelCurve::identity(16), 8), 16), Error);
  std::vector<std::pair<double, double>> gappy;
  for (int k = 0; k < 64; ++k) gappy.emplace_back(k / 128.0, k / 128.0);  // only [0, 0.5)
  EXPECT_THROW(fit_curve_to_mapping(gappy, 16), Error);
  FitOptions relaxed;
  relaxed.require_coverage = false;
  EXPECT_NO_THROW(fit_curve_to_mapping(gappy, 16, relaxed));
}

TEST(Nnls, MatchesKnownSolution) {
  // min ||A x - b||, x >= 0: unconstrained optimum has x1 < 0, so x1 = 0.
  const std::vector<double> a = {1, 0, 0, 1, 1, 1};
  const std::vector<double> b = {2, -1, 1};
  const auto x = solve_nnls(a, 3, 2, b);
  EXPECT_NEAR(x[0], 1.5, 1e-12);
  EXPECT_EQ(x[1], 0.0);
}

TEST(CurveJson, RoundTripsByteIdentically) {
  std::mt19937_64 rng(2);
  const CurveParams p = test::random_params(rng, 64);
  const std::string text = curves_to_json(p);
  EXPECT_EQ(curves_to_json(curves_from_json(text)), text);
  EXPECT_EQ(curves_from_json(text), p);

  const std::vector<CurveParams> stages = {p, CurveParams::identity(64)};
  const std::string staged = curve_stages_to_json(stages);
  EXPECT_EQ(curve_stages_to_json(curve_stages_from_json(staged)), staged);
  EXPECT_EQ(curve_stages_from_json(text).size(), 1u);
}

TEST(CurveJson, RejectsInvalidDocuments) {
  const auto expect_format_error = [](const std::string& text, const std::string& needle) {
    try {
      curve_stages_from_json(text);
      FAIL() << "accepted " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kFormat);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_format_error(R"({"version":2,"levels":2,"channels":{"r":[1,0],"g":[1,0],"b":[1,0]}})",
                      "version");
  expect_format_error(R"({"version":1,"levels":2,"channels":{"r":[1,0],"g":[1,0,0],"b":[1,0]}})",
                      "'g'");
  expect_format_error(R"({"version":1,"levels":2,"channels":{"r":[1,0],"g":[1,0],"b":[1,-1]}})",
                      "'b' index 1");
  expect_format_error("{not json", "");
}

}  // namespace
}  // namespace s2cr
