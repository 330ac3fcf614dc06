#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flipkit/errors.hpp"

namespace flipkit::numerics {

// Deterministic Gaussian source. The uniform draw is built from the raw
// mt19937_64 output so streams are identical across platforms, not just runs.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

  // uniform in (0, 1]
  double uniform() {
    const std::uint64_t bits = gen_();
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
  }

  // standard normal via Box-Muller, one spare cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // additive complex Gaussian with standard deviation sigma per quadrature
  std::complex<double> complex_normal(double sigma) {
    const double re = normal();
    const double im = normal();
    return {sigma * re, sigma * im};
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // (n-1)-normalized
};

inline MeanStd mean_sample_std(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw domain_error("mean_sample_std: need at least 2 samples");
  }
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(samples.size() - 1))};
}

// Golden-section minimizer on [lo, hi]; assumes a bracketed minimum.
inline double golden_minimize(const std::function<double(double)>& fn, double lo, double hi,
                              double tol = 1e-11, int max_iterations = 400) {
  constexpr double kRatio = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kRatio * (b - a);
  double d = a + kRatio * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int i = 0; i < max_iterations && std::abs(b - a) > tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kRatio * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kRatio * (b - a);
      fd = fn(d);
    }
  }
  return 0.5 * (a + b);
}

struct LmOptions {
  int max_iterations = 300;
  double relative_tolerance = 1e-15;
  double initial_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1 at the solution
  double ssr = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& x, const Eigen::VectorXd& r0) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = std::max(1e-8 * std::abs(x[j]), 1e-11);
    Eigen::VectorXd xp = x;
    xp[j] += step;
    jac.col(j) = (residuals(xp) - r0) / step;
  }
  return jac;
}

}  // namespace detail

// Damped least squares with a numeric Jacobian. Small dense problems only.
inline LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    Eigen::VectorXd x0, const LmOptions& options = {}) {
  LmResult result;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = residuals(x);
  double ssr = r.squaredNorm();
  double lambda = options.initial_lambda;
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (ssr < 1e-28 * static_cast<double>(r.size())) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd jac = detail::numeric_jacobian(residuals, x, r);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    bool stepped = false;
    Eigen::VectorXd x_new;
    Eigen::VectorXd r_new;
    double ssr_new = ssr;
    for (int k = 0; k < 40; ++k) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index i = 0; i < damped.rows(); ++i) {
        damped(i, i) += lambda * std::max(jtj(i, i), 1e-300);
      }
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      x_new = x + step;
      r_new = residuals(x_new);
      ssr_new = r_new.squaredNorm();
      if (std::isfinite(ssr_new) && ssr_new <= ssr) {
        stepped = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      // no downhill step at any damping: numerical floor reached
      converged = true;
      break;
    }
    const double improvement = (ssr - ssr_new) / std::max(ssr, 1e-300);
    x = x_new;
    r = r_new;
    ssr = ssr_new;
    lambda = std::max(lambda * 0.1, 1e-14);
    if (improvement < options.relative_tolerance) {
      converged = true;
      break;
    }
  }

  result.params = x;
  result.ssr = ssr;
  result.iterations = iter;
  result.converged = converged;

  const Eigen::MatrixXd jac = detail::numeric_jacobian(residuals, x, r);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const Eigen::Index dof = std::max<Eigen::Index>(r.size() - x.size(), 1);
  const double variance = ssr / static_cast<double>(dof);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(x.size(), x.size());
  result.covariance = variance * jtj.ldlt().solve(identity);
  return result;
}

// Vertex of the parabola through three points; falls back to the middle point
// when the triple is degenerate. Grid spacing may be non-uniform.
struct ParabolicVertex {
  double x = 0.0;
  double y = 0.0;
};

inline ParabolicVertex parabolic_vertex(double x0, double y0, double x1, double y1, double x2,
                                        double y2) {
  const double d01 = x1 - x0, d12 = x1 - x2;
  const double num = d01 * d01 * (y1 - y2) - d12 * d12 * (y1 - y0);
  const double den = d01 * (y1 - y2) - d12 * (y1 - y0);
  if (std::abs(den) < 1e-300) {
    return {x1, y1};
  }
  const double xv = x1 - 0.5 * num / den;
  // Lagrange evaluation at the vertex
  const double l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2));
  const double l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2));
  const double l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
  return {xv, y0 * l0 + y1 * l1 + y2 * l2};
}

}  // namespace flipkit::numerics
