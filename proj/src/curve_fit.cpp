#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "s2cr/curve.hpp"
#include "s2cr/error.hpp"

namespace s2cr {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Least squares restricted to the passive set; other entries are zero.
Eigen::VectorXd solve_passive(const Matrix& a, const Eigen::VectorXd& b,
                              const std::vector<bool>& passive) {
  std::vector<int> idx;
  for (int j = 0; j < static_cast<int>(passive.size()); ++j) {
    if (passive[j]) idx.push_back(j);
  }
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) sub.col(k) = a.col(idx[k]);
  const Eigen::VectorXd z_sub = sub.colPivHouseholderQr().solve(b);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = z_sub(k);
  return z;
}

Eigen::VectorXd lawson_hanson(const Matrix& a, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(a.cols());
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     std::max<double>(1.0, a.lpNorm<Eigen::Infinity>()) *
                     std::max<double>(a.rows(), n);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  Eigen::VectorXd w = a.transpose() * (b - a * x);

  const int max_outer = 3 * n + 10;
  for (int outer = 0; outer < max_outer; ++outer) {
    int t = -1;
    double best = tol;
    for (int j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    passive[t] = true;

    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      Eigen::VectorXd z = solve_passive(a, b, passive);
      bool feasible = true;
      for (int j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= tol) feasible = false;
      }
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (int j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= tol) {
          const double denom = x(j) - z(j);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      }
      x += alpha * (z - x);
      for (int j = 0; j < n; ++j) {
        if (passive[j] && x(j) <= tol) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
    }
    w = a.transpose() * (b - a * x);
  }
  for (int j = 0; j < n; ++j) x(j) = std::max(0.0, x(j));
  return x;
}

}  // namespace

std::vector<double> solve_nnls(std::span<const double> a, int rows, int cols,
                               std::span<const double> b) {
  if (rows <= 0 || cols <= 0 || a.size() != static_cast<std::size_t>(rows) * cols ||
      b.size() != static_cast<std::size_t>(rows)) {
    fail(ErrorKind::kInvalidArgument, "nnls: inconsistent dimensions");
  }
  Matrix full = Eigen::Map<const Matrix>(a.data(), rows, cols);
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);

  // Reduce tall systems to the square triangular factor; the residual differs
  // by a constant so the minimizer is unchanged.
  if (rows > cols) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(full);
    const Eigen::MatrixXd r =
        qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qtb = (qr.householderQ().transpose() * rhs).head(cols);
    full = r;
    rhs = qtb;
  }
  const Eigen::VectorXd x = lawson_hanson(full, rhs);
  return std::vector<double>(x.data(), x.data() + x.size());
}

CurveFit fit_curve_to_mapping(std::span<const std::pair<double, double>> samples,
                              int levels, const FitOptions& options) {
  if (levels < 2) fail(ErrorKind::kInvalidArgument, "curve needs at least 2 levels");
  const int m = static_cast<int>(samples.size());
  if (m < levels) {
    fail(ErrorKind::kInvalidArgument, "curve fit needs at least " +
                                          std::to_string(levels) + " samples, got " +
                                          std::to_string(m));
  }
  for (const auto& [x, y] : samples) {
    if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || x > 1.0) {
      fail(ErrorKind::kInvalidArgument, "curve fit sample outside [0,1] or non-finite");
    }
  }
  if (options.require_coverage) {
    std::vector<double> xs;
    xs.reserve(m);
    for (const auto& s : samples) xs.push_back(s.first);
    std::sort(xs.begin(), xs.end());
    double gap = std::max(xs.front(), 1.0 - xs.back());
    for (int k = 1; k < m; ++k) gap = std::max(gap, xs[k] - xs[k - 1]);
    if (!(gap < 1.0 / levels)) {
      fail(ErrorKind::kInvalidArgument,
           "curve fit samples leave a gap of " + std::to_string(gap) +
               " in [0,1] (must be below 1/L)");
    }
  }

  const bool ridge = !options.require_coverage && options.ridge > 0.0;
  const int rows = m + 1 + (ridge ? levels : 0);
  std::vector<double> a(static_cast<std::size_t>(rows) * levels, 0.0);
  std::vector<double> b(rows, 0.0);
  for (int k = 0; k < m; ++k) {
    const double x = samples[k].first;
    for (int i = 0; i < levels; ++i) {
      a[static_cast<std::size_t>(k) * levels + i] =
          hinge01(x - static_cast<double>(i) / levels);
    }
    b[k] = samples[k].second;
  }
  // Unit-mass constraint as a heavily weighted row.
  const double weight = 1e4 * std::sqrt(static_cast<double>(m));
  for (int i = 0; i < levels; ++i) a[static_cast<std::size_t>(m) * levels + i] = weight;
  b[m] = weight;
  if (ridge) {
    const double r = std::sqrt(options.ridge * m);
    for (int i = 0; i < levels; ++i) {
      a[static_cast<std::size_t>(m + 1 + i) * levels + i] = r;
    }
  }

  std::vector<double> w = solve_nnls(a, rows, levels, b);
  double sum = 0.0;
  for (double v : w) sum += v;
  if (!(sum >= kMinCurveMass)) {
    fail(ErrorKind::kInvalidArgument, "curve fit produced an empty curve");
  }
  for (double& v : w) v /= sum;
  ChannelCurve curve(std::move(w));

  double sse = 0.0;
  for (const auto& [x, y] : samples) {
    const double d = render_intensity(x, curve) - y;
    sse += d * d;
  }
  return CurveFit{std::move(curve), sse / m};
}

}  // namespace s2cr
