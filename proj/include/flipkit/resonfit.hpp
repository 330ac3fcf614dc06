#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flipkit/constants.hpp"
#include "flipkit/csv.hpp"
#include "flipkit/errors.hpp"
#include "flipkit/numerics.hpp"

// Notch-type resonator S21 model and circle-fit extraction of
// (fr, Ql, Qc, Qi, kappa). The model is the diameter-corrected notch with a
// complex coupling quality factor (impedance-mismatch angle phi):
//
//   S21(f) = a e^{i alpha} e^{-2 pi i f tau}
//            [1 - (Ql/|Qc|) e^{i phi} / (1 + 2 i Ql (f/fr - 1))]
//
// Frequencies in MHz, cable delay in ns.
namespace flipkit::resonfit {

struct S21Params {
  double fr_mhz = 0.0;
  double ql = 0.0;
  double qc_mag = 0.0;
  double phi_rad = 0.0;
  double amp = 1.0;
  double phase_rad = 0.0;
  double delay_ns = 0.0;
};

inline std::complex<double> s21_model(double f_mhz, const S21Params& params) {
  if (!(params.fr_mhz > 0.0) || !(params.ql > 0.0) || !(params.qc_mag > 0.0)) {
    throw domain_error("s21_model: fr, Ql and |Qc| must be positive");
  }
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> env =
      params.amp * std::exp(i * params.phase_rad) *
      std::exp(-i * (2.0 * constants::pi * f_mhz * params.delay_ns * 1e-3));
  const std::complex<double> dip = (params.ql / params.qc_mag) * std::exp(i * params.phi_rad) /
                                   (1.0 + 2.0 * i * params.ql * (f_mhz / params.fr_mhz - 1.0));
  return env * (1.0 - dip);
}

struct S21Trace {
  std::vector<double> freq_mhz;
  std::vector<std::complex<double>> s21;
  std::optional<double> noise_sigma;
};

struct ResonatorFit {
  double fr_mhz = 0.0;
  double ql = 0.0;
  double qc_mag = 0.0;
  double phi_rad = 0.0;
  double qi = 0.0;
  double kappa_over_2pi_mhz = 0.0;
  double amp = 0.0;
  double phase_rad = 0.0;
  double delay_ns = 0.0;
  double residual_rms = 0.0;
};

// 1/Qi = 1/Ql - cos(phi)/|Qc|
inline double qi_from(double ql, double qc_mag, double phi_rad) {
  if (!(ql > 0.0) || !(qc_mag > 0.0)) {
    throw domain_error("qi_from: Ql and |Qc| must be positive");
  }
  const double inv_qi = 1.0 / ql - std::cos(phi_rad) / qc_mag;
  if (inv_qi < 0.0) {
    throw domain_error("qi_from: non-physical result (1/Ql < cos(phi)/|Qc|)");
  }
  if (inv_qi == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / inv_qi;
}

namespace detail {

struct Circle {
  double xc = 0.0;
  double yc = 0.0;
  double radius = 0.0;
};

// Taubin algebraic circle fit (Newton on the characteristic polynomial).
inline Circle taubin_circle(const std::vector<std::complex<double>>& points) {
  const std::size_t n = points.size();
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    mean_x += p.real();
    mean_y += p.imag();
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (const auto& p : points) {
    const double x = p.real() - mean_x;
    const double y = p.imag() - mean_y;
    const double z = x * x + y * y;
    mxx += x * x;
    myy += y * y;
    mxy += x * y;
    mxz += x * z;
    myz += y * z;
    mzz += z * z;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mxx *= inv_n;
  myy *= inv_n;
  mxy *= inv_n;
  mxz *= inv_n;
  myz *= inv_n;
  mzz *= inv_n;

  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;
  const double a3 = 4.0 * mz;
  const double a2 = -3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 =
      mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;

  double root = 0.0;
  for (int iter = 0; iter < 99; ++iter) {
    const double poly = a0 + root * (a1 + root * (a2 + root * a3));
    const double dpoly = a1 + root * (2.0 * a2 + 3.0 * a3 * root);
    if (dpoly == 0.0) break;
    const double next = root - poly / dpoly;
    if (!std::isfinite(next) || std::abs(next - root) <= 1e-16 * std::max(1.0, std::abs(root))) {
      root = next;
      break;
    }
    root = next;
  }
  const double det = root * root - root * mz + cov_xy;
  if (det == 0.0 || !std::isfinite(det)) {
    throw numerics_error("circle fit degenerate (zero determinant)");
  }
  Circle circle;
  circle.xc = (mxz * (myy - root) - myz * mxy) / det * 0.5;
  circle.yc = (myz * (mxx - root) - mxz * mxy) / det * 0.5;
  circle.radius = std::sqrt(circle.xc * circle.xc + circle.yc * circle.yc + mz);
  circle.xc += mean_x;
  circle.yc += mean_y;
  if (!std::isfinite(circle.xc) || !std::isfinite(circle.yc) || !std::isfinite(circle.radius)) {
    throw numerics_error("circle fit produced non-finite values");
  }
  return circle;
}

inline std::vector<std::complex<double>> remove_delay(const std::vector<double>& freq_mhz,
                                                      const std::vector<std::complex<double>>& s21,
                                                      double delay_ns) {
  std::vector<std::complex<double>> out(s21.size());
  const std::complex<double> i(0.0, 1.0);
  for (std::size_t k = 0; k < s21.size(); ++k) {
    out[k] = s21[k] * std::exp(i * (2.0 * constants::pi * freq_mhz[k] * delay_ns * 1e-3));
  }
  return out;
}

// RMS orthogonal deviation of the delay-corrected trace from its best circle.
inline double circle_residual(const std::vector<double>& freq_mhz,
                              const std::vector<std::complex<double>>& s21, double delay_ns) {
  const auto corrected = remove_delay(freq_mhz, s21, delay_ns);
  const Circle circle = taubin_circle(corrected);
  double ss = 0.0;
  for (const auto& p : corrected) {
    const double d = std::abs(p - std::complex<double>(circle.xc, circle.yc)) - circle.radius;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(corrected.size()));
}

inline std::vector<double> unwrap_phase(const std::vector<std::complex<double>>& points) {
  std::vector<double> phase(points.size());
  double offset = 0.0;
  double prev = std::arg(points[0]);
  phase[0] = prev;
  for (std::size_t k = 1; k < points.size(); ++k) {
    double cur = std::arg(points[k]);
    double delta = cur - prev;
    if (delta > constants::pi) offset -= 2.0 * constants::pi;
    if (delta < -constants::pi) offset += 2.0 * constants::pi;
    phase[k] = cur + offset;
    prev = cur;
  }
  return phase;
}

// First-crossing of `level`, linearly interpolated; nullopt when not crossed.
inline std::optional<double> phase_crossing(const std::vector<double>& freq_mhz,
                                            const std::vector<double>& phase, double level) {
  for (std::size_t k = 0; k + 1 < phase.size(); ++k) {
    const bool sign_change = (phase[k] - level) * (phase[k + 1] - level) <= 0.0 &&
                             phase[k] != phase[k + 1];
    if (sign_change) {
      const double t = (level - phase[k]) / (phase[k + 1] - phase[k]);
      return freq_mhz[k] + t * (freq_mhz[k + 1] - freq_mhz[k]);
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Circle fit after cable-delay normalization, then a phase fit for (fr, Ql),
// Qc/Qi decomposition, and a final joint least-squares polish of all model
// parameters. Preconditions: >= 7 samples, strictly increasing frequencies,
// span of at least 3 linewidths.
inline ResonatorFit fit_trace(const S21Trace& trace) {
  const std::size_t n = trace.freq_mhz.size();
  if (n != trace.s21.size()) {
    throw domain_error("fit_trace: frequency and sample counts differ");
  }
  if (n < 7) throw domain_error("fit_trace: need at least 7 samples");
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!(trace.freq_mhz[k] < trace.freq_mhz[k + 1])) {
      throw domain_error("fit_trace: frequencies must be strictly increasing");
    }
  }
  const double span = trace.freq_mhz.back() - trace.freq_mhz.front();

  // quick degenerate screen: a trace with no structure cannot be fit
  std::complex<double> mean(0.0, 0.0);
  double scale = 0.0;
  for (const auto& z : trace.s21) mean += z;
  mean /= static_cast<double>(n);
  for (const auto& z : trace.s21) scale = std::max(scale, std::abs(z - mean));
  if (scale <= 1e-9 * (std::abs(mean) + 1.0)) {
    throw domain_error("fit_trace: degenerate trace (no resonance dip)");
  }

  // cable delay: wing phase slope seeds a scan over one winding ambiguity,
  // then golden-section refinement of the circle residual
  const std::vector<double> raw_phase = detail::unwrap_phase(trace.s21);
  const std::size_t n_wing = std::max<std::size_t>(2, n / 10);
  double sum_f = 0, sum_p = 0, sum_ff = 0, sum_fp = 0;
  std::size_t n_fit = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_wing || k >= n - n_wing) {
      sum_f += trace.freq_mhz[k];
      sum_p += raw_phase[k];
      sum_ff += trace.freq_mhz[k] * trace.freq_mhz[k];
      sum_fp += trace.freq_mhz[k] * raw_phase[k];
      ++n_fit;
    }
  }
  const double denom = n_fit * sum_ff - sum_f * sum_f;
  const double slope = denom != 0.0 ? (n_fit * sum_fp - sum_f * sum_p) / denom : 0.0;
  const double tau_wing = -slope * 1000.0 / (2.0 * constants::pi);

  const double window = 1.1 * 1000.0 / span + 2.0;  // ns; covers one 2pi winding
  double tau_best = tau_wing;
  double best_residual = std::numeric_limits<double>::infinity();
  constexpr int kScanPoints = 81;
  const double step = 2.0 * window / (kScanPoints - 1);
  for (int k = 0; k < kScanPoints; ++k) {
    const double tau = tau_wing - window + k * step;
    double residual;
    try {
      residual = detail::circle_residual(trace.freq_mhz, trace.s21, tau);
    } catch (const numerics_error&) {
      continue;
    }
    if (residual < best_residual) {
      best_residual = residual;
      tau_best = tau;
    }
  }
  if (!std::isfinite(best_residual)) {
    throw domain_error("fit_trace: degenerate trace (no circle at any delay)");
  }
  const double tau = numerics::golden_minimize(
      [&](double t) {
        try {
          return detail::circle_residual(trace.freq_mhz, trace.s21, t);
        } catch (const numerics_error&) {
          return std::numeric_limits<double>::infinity();
        }
      },
      tau_best - step, tau_best + step, 1e-9);

  const auto corrected = detail::remove_delay(trace.freq_mhz, trace.s21, tau);
  detail::Circle circle;
  try {
    circle = detail::taubin_circle(corrected);
  } catch (const numerics_error&) {
    throw domain_error("fit_trace: degenerate trace (circle fit failed)");
  }
  double ss = 0.0;
  for (const auto& p : corrected) {
    const double d = std::abs(p - std::complex<double>(circle.xc, circle.yc)) - circle.radius;
    ss += d * d;
  }
  const double circle_rms = std::sqrt(ss / static_cast<double>(n));
  if (circle.radius <= 5.0 * circle_rms) {
    throw domain_error("fit_trace: degenerate trace (no resolvable resonance circle)");
  }

  // phase fit around the circle centre: psi(f) = theta0 + 2 atan(2 Ql (1 - f/fr))
  std::vector<std::complex<double>> centered(n);
  for (std::size_t k = 0; k < n; ++k) {
    centered[k] = corrected[k] - std::complex<double>(circle.xc, circle.yc);
  }
  const std::vector<double> psi = detail::unwrap_phase(centered);
  const double mid = 0.5 * (psi.front() + psi.back());
  std::size_t k_mid = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(psi[k] - mid) < std::abs(psi[k_mid] - mid)) k_mid = k;
  }
  double fr0 = trace.freq_mhz[k_mid];
  const auto hi = detail::phase_crossing(trace.freq_mhz, psi, mid + constants::pi / 2.0);
  const auto lo = detail::phase_crossing(trace.freq_mhz, psi, mid - constants::pi / 2.0);
  double ql0 = (hi && lo && *hi != *lo) ? fr0 / std::abs(*lo - *hi) : 10.0 * fr0 / span;

  const auto& freq = trace.freq_mhz;
  const auto phase_residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const double model = p[2] + 2.0 * std::atan(2.0 * p[1] * (1.0 - freq[k] / p[0]));
      r[static_cast<Eigen::Index>(k)] = psi[k] - model;
    }
    return r;
  };
  Eigen::VectorXd p0(3);
  p0 << fr0, ql0, mid;
  const auto phase_fit = numerics::levenberg_marquardt(phase_residuals, p0);
  if (!phase_fit.converged) {
    throw numerics_error("fit_trace: phase fit did not converge");
  }
  double fr = phase_fit.params[0];
  double ql = phase_fit.params[1];
  const double theta0 = phase_fit.params[2];
  if (!(ql > 0.0) || fr <= freq.front() - span || fr >= freq.back() + span) {
    throw domain_error("fit_trace: fitted resonance is outside the trace span");
  }

  // off-resonant point and environment
  const std::complex<double> centre(circle.xc, circle.yc);
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> z_inf = centre + circle.radius * std::exp(i * (theta0 + constants::pi));
  double amp = std::abs(z_inf);
  double phase0 = std::arg(z_inf);
  double phi = std::arg((z_inf - centre) / z_inf);
  double qc_mag = ql * amp / (2.0 * circle.radius);

  // joint polish of the full model
  const auto& samples = trace.s21;
  const auto full_residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(2 * n));
    S21Params params{p[0], p[1], p[2], p[3], p[4], p[5], p[6]};
    if (!(params.fr_mhz > 0.0) || !(params.ql > 0.0) || !(params.qc_mag > 0.0)) {
      r.setConstant(1e6);
      return r;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::complex<double> diff = s21_model(freq[k], params) - samples[k];
      r[static_cast<Eigen::Index>(2 * k)] = diff.real();
      r[static_cast<Eigen::Index>(2 * k + 1)] = diff.imag();
    }
    return r;
  };
  Eigen::VectorXd q0(7);
  q0 << fr, ql, qc_mag, phi, amp, phase0, tau;
  const auto polish = numerics::levenberg_marquardt(full_residuals, q0);
  if (!polish.converged) {
    throw numerics_error("fit_trace: joint refinement did not converge");
  }

  ResonatorFit fit;
  fit.fr_mhz = polish.params[0];
  fit.ql = polish.params[1];
  fit.qc_mag = polish.params[2];
  fit.phi_rad = polish.params[3];
  fit.amp = polish.params[4];
  fit.phase_rad = polish.params[5];
  fit.delay_ns = polish.params[6];
  if (!(fit.ql > 0.0) || !(fit.qc_mag > 0.0) || !(fit.fr_mhz > 0.0)) {
    throw numerics_error("fit_trace: refinement left the physical parameter domain");
  }
  if (fit.amp < 0.0) {
    fit.amp = -fit.amp;
    fit.phase_rad += constants::pi;
  }
  fit.phase_rad = std::remainder(fit.phase_rad, 2.0 * constants::pi);
  fit.phi_rad = std::remainder(fit.phi_rad, 2.0 * constants::pi);
  if (std::abs(fit.phi_rad) >= constants::pi / 2.0) {
    throw domain_error("fit_trace: non-physical impedance-mismatch angle");
  }
  fit.residual_rms = std::sqrt(polish.ssr / static_cast<double>(n));
  fit.qi = qi_from(fit.ql, fit.qc_mag, fit.phi_rad);
  const double qc_real = fit.qc_mag / std::cos(fit.phi_rad);
  fit.kappa_over_2pi_mhz = fit.fr_mhz / qc_real;

  const double linewidth = fit.fr_mhz / fit.ql;
  if (span < 3.0 * linewidth) {
    throw domain_error("fit_trace: span too narrow (< 3 linewidths)");
  }
  if (span / static_cast<double>(n - 1) >= linewidth) {
    throw domain_error("fit_trace: frequency step exceeds the fitted linewidth");
  }
  return fit;
}

// Synthetic trace over [f_lo, f_hi]; test and CLI fixture support.
inline S21Trace make_trace(const S21Params& params, double f_lo_mhz, double f_hi_mhz,
                           std::size_t n_points) {
  if (n_points < 2 || !(f_hi_mhz > f_lo_mhz)) {
    throw domain_error("make_trace: need at least 2 points and f_hi > f_lo");
  }
  S21Trace trace;
  trace.freq_mhz.resize(n_points);
  trace.s21.resize(n_points);
  const double step = (f_hi_mhz - f_lo_mhz) / static_cast<double>(n_points - 1);
  for (std::size_t k = 0; k < n_points; ++k) {
    trace.freq_mhz[k] = f_lo_mhz + static_cast<double>(k) * step;
    trace.s21[k] = s21_model(trace.freq_mhz[k], params);
  }
  return trace;
}

// Additive complex Gaussian noise, sigma per quadrature, deterministic seed.
inline S21Trace add_noise(S21Trace trace, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw domain_error("add_noise: sigma must be non-negative");
  numerics::SeededRng rng(seed);
  for (auto& z : trace.s21) {
    z += rng.complex_normal(sigma);
  }
  trace.noise_sigma = sigma;
  return trace;
}

// Trace file: CSV columns (freq_mhz, re, im).
inline S21Trace load_trace_csv(std::string_view text, std::string_view source_name = "trace") {
  const csv::Table table = csv::parse(text, source_name);
  const std::size_t c_f = csv::column_index(table, "freq_mhz", source_name);
  const std::size_t c_re = csv::column_index(table, "re", source_name);
  const std::size_t c_im = csv::column_index(table, "im", source_name);
  S21Trace trace;
  for (const auto& row : table.rows) {
    trace.freq_mhz.push_back(csv::to_double(row[c_f], "freq_mhz"));
    trace.s21.emplace_back(csv::to_double(row[c_re], "re"), csv::to_double(row[c_im], "im"));
  }
  return trace;
}

inline void write_trace_csv(std::ostream& out, const S21Trace& trace) {
  out << "freq_mhz,re,im\n";
  for (std::size_t k = 0; k < trace.freq_mhz.size(); ++k) {
    out << csv::format_double(trace.freq_mhz[k]) << "," << csv::format_double(trace.s21[k].real())
        << "," << csv::format_double(trace.s21[k].imag()) << "\n";
  }
}

}  // namespace flipkit::resonfit
